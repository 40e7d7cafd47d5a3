import numpy as np
import pytest

from blocklab.disorder import DisorderConfig, FieldSample, SiteMeasure, sample_field
from blocklab.inequalities import (PreconditionError, beta_map_check,
                                   bracketing_gap_check,
                                   bracketing_ids_comparison,
                                   dos_bound_energy_dependent, feynman_hellmann_report,
                                   feynman_hellmann_sum, half_half_check,
                                   interlacing_check, minmaxmax_lambda1,
                                   wegner_finite_volume)
from blocklab.lattice import CubeSpec
from blocklab.operators import assemble_bracketing, build_h, build_h0
from blocklab.spectral import count_leq, eigensolve

POS = DisorderConfig(SiteMeasure.uniform(0, 1), SiteMeasure.uniform(0, 1), 77)


def constant_field(cube, v, b):
    return FieldSample(cube, {s: v for s in cube.sites()},
                       {s: b for s in cube.sites()}, 0)


# -- Wegner -------------------------------------------------------------------


def test_wegner_bound_holds():
    rep = wegner_finite_volume(POS, CubeSpec(1, 20), energy=2.0, eps=0.1, R=60)
    assert rep.passed
    n = CubeSpec(1, 20).site_count
    assert rep.parameters["bound"] == pytest.approx(8 * 0.1 * n * 4.0)
    assert rep.parameters["mean"] < rep.parameters["bound"]


def test_wegner_small_window_ratio_stays_bounded():
    n = CubeSpec(1, 20).site_count
    for eps in (0.2, 0.1, 0.05):
        rep = wegner_finite_volume(POS, CubeSpec(1, 20), 2.0, eps, R=80)
        assert rep.parameters["mean"] / eps <= 8 * n * 4.0


def test_wegner_rejects_point_mass():
    bad = DisorderConfig(SiteMeasure.uniform(0, 1), SiteMeasure.point_mass(0), 0)
    with pytest.raises(PreconditionError):
        wegner_finite_volume(bad, CubeSpec(1, 10), 2.0, 0.1, 5)


def test_wegner_rejects_negative_support():
    bad = DisorderConfig(SiteMeasure.uniform(-1, 1), SiteMeasure.uniform(0, 1), 0)
    with pytest.raises(PreconditionError):
        wegner_finite_volume(bad, CubeSpec(1, 10), 2.0, 0.1, 5)


def test_wegner_rejects_wide_window():
    with pytest.raises(PreconditionError):
        wegner_finite_volume(POS, CubeSpec(1, 10), energy=0.3, eps=0.2, R=5)


def test_dos_energy_bound_v_hypothesis():
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.point_mass(0), 3)
    rep = dos_bound_energy_dependent(cfg, CubeSpec(1, 16), np.linspace(-7, 7, 29), R=40)
    assert rep.passed


def test_dos_energy_bound_b_hypothesis():
    cfg = DisorderConfig(SiteMeasure.point_mass(0), SiteMeasure.uniform(1, 2), 3)
    rep = dos_bound_energy_dependent(cfg, CubeSpec(1, 16), np.linspace(-7, 7, 29), R=40)
    assert rep.passed


def test_dos_energy_bound_rejects_when_no_hypothesis():
    with pytest.raises(PreconditionError):
        dos_bound_energy_dependent(POS, CubeSpec(1, 10), np.linspace(-5, 5, 11), 5)


def test_dos_energy_bound_empty_bins_trivially_pass():
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.point_mass(0), 3)
    rep = dos_bound_energy_dependent(cfg, CubeSpec(1, 10), [40.0, 50.0], R=5)
    assert rep.passed and rep.worst_margin > 0


# -- Feynman-Hellmann ---------------------------------------------------------


def test_fh_closed_form_single_site():
    cube = CubeSpec(1, 2)
    f = constant_field(cube, 1.0, 2.0)
    val = feynman_hellmann_sum(cube, f, eigen_index=1)
    assert val == pytest.approx(5 / np.sqrt(13), abs=1e-8)


def test_fh_boundary_case_equals_one():
    cube = CubeSpec(1, 2)
    f = constant_field(cube, 0.0, 0.0)
    val = feynman_hellmann_sum(cube, f, eigen_index=1)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_fh_rejects_negative_eigenvalue():
    cube = CubeSpec(1, 2)
    f = constant_field(cube, 1.0, 2.0)
    with pytest.raises(PreconditionError):
        feynman_hellmann_sum(cube, f, eigen_index=0)


def test_fh_rejects_negative_b():
    cube = CubeSpec(1, 2)
    f = constant_field(cube, 1.0, -2.0)
    with pytest.raises(PreconditionError):
        feynman_hellmann_sum(cube, f, eigen_index=1)


def test_fh_random_fields_all_above_one():
    for r in range(6):
        f = sample_field(CubeSpec(1, 6), POS, r)
        rep = feynman_hellmann_report(CubeSpec(1, 6), f)
        assert rep.passed
        assert rep.worst_margin >= 0.0


# -- interlacing, beta map, half-half -----------------------------------------


def test_interlacing_equality_at_constant_b():
    cube = CubeSpec(1, 6)
    f = constant_field(cube, 0.5, 1.0)
    rep = interlacing_check(cube, f, beta=1.0)
    assert rep.passed
    assert rep.worst_margin == pytest.approx(1e-10, abs=1e-12)


def test_interlacing_random():
    cfg = DisorderConfig(SiteMeasure.uniform(0, 1), SiteMeasure.uniform(1, 2), 5)
    for r in range(25):
        f = sample_field(CubeSpec(1, 8), cfg, r)
        assert interlacing_check(CubeSpec(1, 8), f, beta=1.0).passed


def test_interlacing_beta_zero_dominates_scalar():
    cfg = DisorderConfig(SiteMeasure.uniform(0, 1), SiteMeasure.uniform(0, 1), 9)
    cube = CubeSpec(1, 8)
    for r in range(10):
        f = sample_field(cube, cfg, r)
        assert interlacing_check(cube, f, beta=0.0).passed
        h = build_h(cube, "simple", f)
        lam_pos = eigensolve(
            __import__("blocklab.operators", fromlist=["assemble_block"])
            .assemble_block(h, f)).eigenvalues[h.n:]
        scalar = np.sort(np.abs(np.linalg.eigvalsh(h.matrix)))
        assert np.all(lam_pos >= scalar - 1e-10)


def test_interlacing_rejects_b_below_beta():
    cube = CubeSpec(1, 6)
    f = constant_field(cube, 1.0, 0.5)
    with pytest.raises(PreconditionError):
        interlacing_check(cube, f, beta=1.0)


def test_beta_map_single_site():
    cube = CubeSpec(1, 2)
    h = build_h(cube, "simple", constant_field(cube, 1.0, 0.0))
    assert beta_map_check(h, 2.0).passed


def test_beta_map_toeplitz_frozen_values():
    h = build_h0(CubeSpec(1, 3), "simple")
    from blocklab.operators import assemble_beta_reference
    s = eigensolve(assemble_beta_reference(h, 1.0))
    e = np.array([2 - np.sqrt(2), 2.0, 2 + np.sqrt(2)])
    expected = np.sort(np.concatenate([np.sqrt(e ** 2 + 1), -np.sqrt(e ** 2 + 1)]))
    assert s.eigenvalues == pytest.approx(expected)
    assert beta_map_check(h, 1.0).passed


def test_beta_map_zero_coupling():
    cube = CubeSpec(2, 3)
    f = sample_field(cube, POS, 4)
    assert beta_map_check(build_h(cube, "simple", f), 0.0).passed


def test_beta_map_invariant_under_site_relabeling():
    cube = CubeSpec(1, 5)
    f = sample_field(cube, POS, 2)
    h = build_h(cube, "simple", f)
    perm = np.array([3, 0, 4, 1, 2])
    relabeled = h.matrix[np.ix_(perm, perm)]
    from blocklab.operators import ScalarOperator
    h2 = ScalarOperator(tuple(h.sites[i] for i in perm), relabeled, h.role)
    assert beta_map_check(h2, 0.7).passed


def test_half_half_exact_count():
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.uniform(0, 1), 21)
    cube = CubeSpec(1, 10)
    for r in range(30):
        f = sample_field(cube, cfg, r)
        rep = half_half_check(cube, f, lam=1.0, beta=0.0)
        assert rep.passed


def test_half_half_block_diagonal_case():
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.point_mass(0), 2)
    cube = CubeSpec(1, 8)
    f = sample_field(cube, cfg, 0)
    assert half_half_check(cube, f, lam=1.0, beta=0.0).passed


def test_half_half_rejects_v_below_lam():
    cube = CubeSpec(1, 8)
    f = sample_field(cube, POS, 0)      # V in [0, 1]
    with pytest.raises(PreconditionError):
        half_half_check(cube, f, lam=0.5, beta=0.0)


# -- min-max-max ---------------------------------------------------------------


def test_minmaxmax_2x2():
    assert minmaxmax_lambda1([[3.0]], [[2.0]], [[3.0]]) == pytest.approx(
        np.sqrt(13), abs=1e-9)


def test_minmaxmax_matches_beta_reference():
    h = build_h0(CubeSpec(1, 3), "simple").matrix
    beta = 1.3
    val = minmaxmax_lambda1(h, beta * np.eye(3), h, seed=4)
    e_min = 2 - np.sqrt(2)
    assert val == pytest.approx(np.sqrt(e_min ** 2 + beta ** 2), abs=1e-6)


def test_minmaxmax_random_spd_vs_eigensolve():
    rng = np.random.default_rng(0)
    for trial in range(12):
        n = int(rng.integers(1, 5))
        q = rng.standard_normal((n, n))
        a = q @ q.T + 0.3 * np.eye(n)
        d = a if trial % 2 == 0 else \
            (lambda m: m @ m.T + 0.3 * np.eye(n))(rng.standard_normal((n, n)))
        b = rng.standard_normal((n, n))
        b = 0.5 * (b + b.T)
        blk = np.block([[a, b], [b, -d]])
        top = np.max(np.linalg.eigvalsh(-d))
        oracle = np.linalg.eigvalsh(blk)
        oracle = oracle[oracle > top][0]
        est = minmaxmax_lambda1(a, b, d, seed=trial)
        assert est == pytest.approx(oracle, abs=1e-6)


def test_minmaxmax_rejects_bad_hypothesis():
    with pytest.raises(PreconditionError):
        minmaxmax_lambda1([[1.0]], [[0.0]], [[-2.0]])
    with pytest.raises(PreconditionError):
        minmaxmax_lambda1(np.eye(9), np.zeros((9, 9)), np.eye(9))


def test_minmaxmax_budget_exhaustion():
    rng = np.random.default_rng(3)
    q = rng.standard_normal((3, 3))
    a = q @ q.T + 0.3 * np.eye(3)
    with pytest.raises(RuntimeError):
        minmaxmax_lambda1(a, np.eye(3), a, budget=3)


# -- bracketing ----------------------------------------------------------------


def test_bracketing_gap_constant_fields():
    cube = CubeSpec(1, 8)
    f = constant_field(cube, 1.0, 1.0)
    rep = bracketing_gap_check(cube, f, lam=1.0, beta=1.0)
    assert rep.passed
    # equality can only occur at the degenerate Neumann ground state
    ev = eigensolve(assemble_bracketing(cube, f)).eigenvalues
    pos = ev[ev > 0]
    assert np.all(pos >= np.sqrt(2.0) - 1e-12)


def test_bracketing_gap_random():
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.uniform(1, 2), 6)
    for r in range(25):
        f = sample_field(CubeSpec(1, 10), cfg, r)
        assert bracketing_gap_check(CubeSpec(1, 10), f, 1.0, 1.0).passed


def test_bracketing_counting_extremes():
    cube = CubeSpec(1, 8)
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.uniform(1, 2), 10)
    f = sample_field(cube, cfg, 0)
    s = eigensolve(assemble_bracketing(cube, f))
    r = 4 + 2 + 2
    assert count_leq(s, -r) == 0
    assert count_leq(s, r) == s.dim


def test_bracketing_ids_comparison():
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.uniform(1, 2), 13)
    rep = bracketing_ids_comparison(cfg, CubeSpec(1, 8), CubeSpec(1, 40),
                                    np.linspace(-6, 6, 25), R=60)
    assert rep.passed
