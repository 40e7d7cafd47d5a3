import numpy as np
import pytest

from blocklab.disorder import DisorderConfig, FieldSample, SiteMeasure, sample_field
from blocklab.green import (block_element, block_norm, combes_thomas_check,
                            decay_profile, decay_rate_fit, edi_check,
                            gri_check, gri_residual, resolvent, sli_check)
from blocklab.inequalities import PreconditionError
from blocklab.lattice import CubeSpec, strictly_inside
from blocklab.operators import assemble_block, build_h
from blocklab.spectral import eigensolve

GAPPED = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.uniform(0, 1), 40)
MIXED = DisorderConfig(SiteMeasure.uniform(0, 1), SiteMeasure.uniform(0, 1), 41)


def constant_field(cube, v, b):
    return FieldSample(cube, {s: v for s in cube.sites()},
                       {s: b for s in cube.sites()}, 0)


def two_by_two():
    cube = CubeSpec(1, 2)
    f = constant_field(cube, 1.0, 2.0)
    return assemble_block(build_h(cube, "simple", f), f)


def plain_on(cube, cfg, r):
    f = sample_field(cube, cfg, r)
    return assemble_block(build_h(cube, "simple", f), f), f


def test_resolvent_2x2_closed_form():
    op = two_by_two()
    g = resolvent(op, 0.0)
    # H^2 = 13 I, so the inverse at E = 0 is H / 13
    assert np.allclose(g.matrix, op.matrix / 13.0, atol=1e-14)
    assert g.delta == pytest.approx(np.sqrt(13))


def test_resolvent_rejects_spectrum():
    op = two_by_two()
    e = float(eigensolve(op).eigenvalues[1])
    with pytest.raises(PreconditionError):
        resolvent(op, e)


def test_resolvent_norm_is_inverse_distance():
    op, _ = plain_on(CubeSpec(1, 9), MIXED, 0)
    g = resolvent(op, 0.05)
    assert np.linalg.norm(g.matrix, 2) == pytest.approx(1.0 / g.delta, rel=1e-10)


def test_block_element_identity():
    sites = CubeSpec(1, 5).sites()
    n = len(sites)
    eye = np.eye(2 * n)
    b = block_element(eye, sites, (0,), (0,))
    assert np.array_equal(b.entries, np.eye(2))
    assert block_norm(b) == pytest.approx(np.sqrt(2))
    assert np.all(block_element(eye, sites, (0,), (1,)).entries == 0)


def test_block_element_reads_assembly():
    cube = CubeSpec(1, 5)
    f = sample_field(cube, MIXED, 1)
    op = assemble_block(build_h(cube, "simple", f), f)
    b = block_element(op.matrix, op.sites, (0,), (0,))
    assert b.entries[0, 0] == pytest.approx(2.0 + f.V[(0,)])
    assert b.entries[0, 1] == pytest.approx(f.B[(0,)])
    assert b.entries[1, 0] == pytest.approx(f.B[(0,)])
    assert b.entries[1, 1] == pytest.approx(-2.0 - f.V[(0,)])


def test_hs_equality_of_block_norm():
    # Frobenius of the projected operator equals the 2x2 element norm
    cube = CubeSpec(1, 7)
    op, _ = plain_on(cube, MIXED, 3)
    nn = len(op.sites)
    rng = np.random.default_rng(0)
    a = rng.standard_normal((2 * nn, 2 * nn))
    for n, m in (((0,), (1,)), ((-2,), (3,)), ((1,), (1,))):
        i, j = op.sites.index(n), op.sites.index(m)
        proj = np.zeros_like(a)
        rows = [i, i + nn]
        cols = [j, j + nn]
        proj[np.ix_(rows, cols)] = a[np.ix_(rows, cols)]
        assert np.linalg.norm(proj, "fro") == pytest.approx(
            block_norm(block_element(a, op.sites, n, m)), abs=1e-12)


def test_gri_residual_tiny_in_gap():
    c1, c2, c3 = CubeSpec(1, 2), CubeSpec(1, 5), CubeSpec(1, 9)
    f = sample_field(c3, GAPPED, 0)
    assert gri_residual(c1, c2, c3, f, 0.0) <= 1e-10


def test_gri_blockwise_when_decoupled():
    c1, c2, c3 = CubeSpec(1, 2), CubeSpec(1, 5), CubeSpec(1, 9)
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.point_mass(0), 1)
    f = sample_field(c3, cfg, 0)
    assert gri_residual(c1, c2, c3, f, 0.0) <= 1e-12


def test_gri_random_nested_2d():
    rng = np.random.default_rng(7)
    count = 0
    for r in range(40):
        c1 = CubeSpec(2, 2)
        c2 = CubeSpec(2, int(rng.integers(3, 5)))
        c3 = CubeSpec(2, int(rng.integers(6, 8)))
        if not (strictly_inside(c1, c2) and strictly_inside(c2, c3)):
            continue
        f = sample_field(c3, GAPPED, r)
        e = float(rng.uniform(-1.0, 1.0))
        rep = gri_check(c1, c2, c3, f, e)
        assert rep.passed
        count += 1
    assert count >= 30


def test_gri_requires_nesting():
    f = sample_field(CubeSpec(1, 9), GAPPED, 0)
    with pytest.raises(PreconditionError):
        gri_residual(CubeSpec(1, 5), CubeSpec(1, 5), CubeSpec(1, 9), f, 0.0)


def test_sli_holds_on_random_instances():
    rng = np.random.default_rng(3)
    for r in range(25):
        d = 1 if r % 2 == 0 else 2
        lengths = (2, 5, 9) if d == 1 else (2, 4, 7)
        c1, c2, c3 = (CubeSpec(d, l) for l in lengths)
        f = sample_field(c3, GAPPED, r)
        e = float(rng.uniform(-1.0, 1.0))
        rep = sli_check(c1, c2, c3, f, e)
        assert rep.passed


def test_sli_degenerate_core():
    # singleton core equal to the interior of the middle cube
    c1, c2, c3 = CubeSpec(1, 2), CubeSpec(1, 3), CubeSpec(1, 7)
    f = sample_field(c3, GAPPED, 5)
    assert sli_check(c1, c2, c3, f, 0.3).passed


def test_sli_explicit_decoupled_case():
    c1, c2, c3 = CubeSpec(1, 2), CubeSpec(1, 5), CubeSpec(1, 9)
    f = constant_field(c3, 1.0, 0.0)
    assert sli_check(c1, c2, c3, f, 0.0).passed


def test_edi_ground_state():
    cube3 = CubeSpec(1, 9)
    region = CubeSpec(1, 3)
    f = sample_field(cube3, GAPPED, 2)
    rep = edi_check(region, cube3, f, eigen_index=0)
    assert rep.passed


def test_edi_all_eigenpairs_all_regions():
    cube3 = CubeSpec(1, 11)
    f = sample_field(cube3, GAPPED, 3)
    dim = 2 * cube3.site_count
    checked = 0
    for j in range(dim):
        for L in (3, 5, 7):
            region = CubeSpec(1, L)
            try:
                rep = edi_check(region, cube3, f, eigen_index=j)
            except PreconditionError:
                continue    # eigenvalue too close to the sub-cube spectrum
            assert rep.passed
            checked += 1
    assert checked > dim


def test_edi_interior_support_gives_slack():
    cube3 = CubeSpec(1, 9)
    region = CubeSpec(1, 3)
    f = sample_field(cube3, GAPPED, 4)
    rep = edi_check(region, cube3, f, eigen_index=0, probe_sites=[(0,)])
    assert rep.passed and rep.worst_margin > 0


def test_combes_thomas_diagonal_bound():
    op, _ = plain_on(CubeSpec(1, 11), GAPPED, 0)
    rep = combes_thomas_check(op, 0.0, pairs=[(n, n) for n in op.sites])
    assert rep.passed


def test_combes_thomas_all_pairs():
    cube = CubeSpec(1, 30)
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.point_mass(0), 9)
    for r in range(5):
        f = sample_field(cube, cfg, r)
        op = assemble_block(build_h(cube, "simple", f), f)
        rep = combes_thomas_check(op, 0.0)
        assert rep.passed
        assert rep.parameters["delta"] == pytest.approx(1.0)  # capped at 1


def test_decay_rate_beats_ct_rate():
    cube = CubeSpec(1, 30)
    cfg = DisorderConfig(SiteMeasure.uniform(1, 2), SiteMeasure.point_mass(0), 9)
    f = sample_field(cube, cfg, 1)
    op = assemble_block(build_h(cube, "simple", f), f)
    rate, _ = decay_rate_fit(op, 0.0)
    assert rate < 0
    assert -rate >= 1.0 / 12.0    # delta = 1, d = 1


def test_decay_profile_columns():
    op, _ = plain_on(CubeSpec(1, 7), GAPPED, 6)
    rows = decay_profile(op, 0.0, pairs=[((0,), (2,))])
    (n, m, dist, nrm, cap), = rows
    assert (n, m, dist) == ((0,), (2,), 2)
    assert nrm <= cap + 1e-12
