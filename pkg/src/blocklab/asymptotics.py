"""Band-edge tail measurements, initial-scale estimates, and correlators.

Everything here probes asymptotic statements at finite volume: the
double-log tail of the integrated density of states above the gap edge,
the test-function lower bound, the probability that a cube is suitable as
a multi-scale starting scale, and the eigenfunction correlator whose decay
expresses dynamical localization.  Exponent fits at desk scale are
reported with the fitting window, never extrapolated.
"""

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .disorder import DisorderConfig, FieldSample, case_beta, sample_field
from .inequalities import CheckReport, _require
from .lattice import CubeSpec, dist1, inner_boundary
from .operators import (MAX_BLOCK_DIM, assemble_block, build_h, build_h0,
                        component_indices)
from .spectral import Spectrum, count_leq, eigensolve, plain_block, run_realizations


# -- gap edge ----------------------------------------------------------------


@dataclass(frozen=True)
class GapEdge:
    """Internal band edge sqrt(lam^2 + beta^2) with its exponent targets."""

    lam: float
    beta: float
    case: int
    sign_flip: bool
    edge: float
    alpha_upper: float
    alpha_lower: float


def gap_edge(config: DisorderConfig, d: int) -> GapEdge:
    """Edge location and Lifschitz exponent targets for the configuration.

    The upper-bound target is d/2 except when lam = 0 with beta != 0, where
    it weakens to d/4; the lower-bound target is d/2 in all cases.
    """
    lam = config.mu_V.support_inf
    _require(lam >= 0.0, f"needs inf supp mu_V >= 0, got {lam}")
    bc = case_beta(config.mu_B)
    weak = (lam == 0.0 and bc.beta != 0.0)
    return GapEdge(lam, bc.beta, bc.case, bc.sign_flip,
                   float(np.hypot(lam, bc.beta)),
                   d / 4.0 if weak else d / 2.0, d / 2.0)


# -- tail curve ----------------------------------------------------------------


@dataclass(frozen=True)
class TailCurve:
    """Counting excess above the gap edge on an epsilon grid."""

    eps_grid: np.ndarray
    delta_n: np.ndarray
    stderr: np.ndarray
    lengths: np.ndarray
    censored: np.ndarray          # True where no eigenvalue was ever captured
    edge: float
    realizations: int
    samples: list = field(default_factory=list, repr=False)


def default_tail_length(eps: float, d: int, floor: int = 12) -> int:
    """Smallest workable cube length for resolving the edge at offset eps.

    Grows like 10/sqrt(eps) and is capped by the dense-solver budget.
    """
    L = floor if eps <= 0.0 else max(int(math.ceil(10.0 / math.sqrt(eps))), floor)
    while (2 * CubeSpec(d, L).site_count) > MAX_BLOCK_DIM and L > floor:
        L -= 1
    return L


def _tail_row(r, cube, config, threshold):
    s = eigensolve(plain_block(cube, config, r))
    return count_leq(s, threshold) / s.dim - 0.5


def tail_curve(config: DisorderConfig, d: int, eps_grid, R: int,
               lengths=None, mapper=None, keep_samples: bool = False) -> TailCurve:
    """Ensemble mean of N(edge + eps) - 1/2 over an epsilon grid.

    The per-realization values are non-negative by the half-half identity,
    which holds under the edge hypotheses (V at or above lam, B in its
    case).  Grid points where no realization captures an eigenvalue are
    flagged censored.
    """
    ge = gap_edge(config, d)
    eps_grid = np.asarray(sorted(eps_grid), dtype=float)
    if lengths is None:
        lengths = [default_tail_length(e, d) for e in eps_grid]
    means, errs, cens, samples = [], [], [], []
    for eps, L in zip(eps_grid, lengths):
        cube = CubeSpec(d, L)
        vals = np.array(run_realizations(
            partial(_tail_row, cube=cube, config=config, threshold=ge.edge + eps),
            R, mapper))
        means.append(vals.mean())
        errs.append(vals.std(ddof=1) / math.sqrt(R) if R > 1 else 0.0)
        cens.append(bool(np.all(vals == 0.0)))
        if keep_samples:
            samples.append(vals)
    return TailCurve(eps_grid, np.array(means), np.array(errs),
                     np.array(lengths, dtype=int), np.array(cens), ge.edge, R,
                     samples)


@dataclass(frozen=True)
class TailFit:
    alpha_hat: float
    intercept: float
    points_used: int
    censored_points: int


def tail_exponent_fit(curve: TailCurve, window=(0.0, 0.4)) -> TailFit:
    """Regress ln|ln dN| on ln eps; the negated slope estimates the exponent.

    Only points with dN inside the open window participate; censored points
    are excluded by construction.
    """
    lo, hi = window
    usable = (~curve.censored) & (curve.delta_n > lo) & (curve.delta_n < hi)
    if int(usable.sum()) < 2:
        raise ValueError("fewer than two usable points for the tail fit")
    x = np.log(curve.eps_grid[usable])
    y = np.log(np.abs(np.log(curve.delta_n[usable])))
    slope, intercept = np.polyfit(x, y, 1)
    return TailFit(float(-slope), float(intercept), int(usable.sum()),
                   int(curve.censored.sum()))


def bootstrap_stderr(values: np.ndarray, n_boot: int = 400,
                     seed: int = 0) -> float:
    """Bootstrap standard error of the mean (stderr consistency diagnostics)."""
    rng = np.random.default_rng(seed)
    values = np.asarray(values)
    means = np.array([rng.choice(values, size=len(values)).mean()
                      for _ in range(n_boot)])
    return float(means.std(ddof=1))


def tail_monotonicity_check(curve: TailCurve) -> CheckReport:
    """dN nondecreasing in eps within 3 sigma of the paired standard errors."""
    rep = CheckReport("tail_monotonicity", parameters={"edge": curve.edge})
    for k in range(len(curve.eps_grid) - 1):
        sigma = float(np.hypot(curve.stderr[k], curve.stderr[k + 1]))
        rep.record(curve.delta_n[k + 1] - curve.delta_n[k] + 3.0 * sigma)
    return rep


def finite_volume_tail_bound(region, field: FieldSample, lam: float,
                             beta: float, eps: float) -> CheckReport:
    """Exact-count bound of the block tail by the scalar counting function.

    Hypotheses as for interlacing: H > 0, V at or above lam, B at or above
    beta >= 0.  Counts are integers; any excess is a violation.
    """
    _require(beta >= 0.0 and lam >= 0.0, "needs lam >= 0 and beta >= 0")
    h = build_h(region, "simple", field)
    _require(float(np.linalg.eigvalsh(h.matrix)[0]) > 0.0, "needs H > 0")
    _require(min(field.v_vector(h.sites)) >= lam, "needs V_n >= lam")
    _require(min(field.b_vector(h.sites)) >= beta, "needs B_n >= beta")
    edge = np.hypot(lam, beta)
    threshold = edge + eps
    block_count = count_leq(eigensolve(assemble_block(h, field)), threshold) - h.n
    scalar_cut = math.sqrt(max(threshold ** 2 - beta ** 2, 0.0))
    scalar_count = int(np.searchsorted(np.linalg.eigvalsh(h.matrix), scalar_cut,
                                       side="right"))
    rep = CheckReport("finite_volume_tail_bound",
                      parameters={"lam": lam, "beta": beta, "eps": eps})
    rep.record(float(scalar_count - block_count))
    return rep


# -- test-function energy ------------------------------------------------------


def _tent_vector(cube: CubeSpec) -> np.ndarray:
    half = cube.L / 2.0
    psi = np.array([half - max(abs(c - o) for c, o in zip(s, cube.center))
                    for s in cube.sites()])
    return psi / np.linalg.norm(psi)


def trial_function_energy(cube: CubeSpec) -> float:
    """Dirichlet form of the normalized tent function on the cube."""
    _require(cube.L >= 4, f"test function needs L >= 4, got {cube.L}")
    psi = _tent_vector(cube)
    hd = build_h0(cube, "dirichlet").matrix
    return float(psi @ hd @ psi)


@dataclass(frozen=True)
class C0Estimate:
    c0_hat: float
    lengths: tuple
    scaled_values: tuple    # L^2 <psi, H^D psi> per length


def c0_estimate(lengths, d: int) -> C0Estimate:
    """sup of L^2 times the tent-function energy over a grid of lengths."""
    lengths = tuple(int(L) for L in lengths)
    vals = tuple(L ** 2 * trial_function_energy(CubeSpec(d, L)) for L in lengths)
    return C0Estimate(max(vals), lengths, vals)


def lower_bound_scale(c0_hat: float, eps: float) -> int:
    """Smallest integer length with c0 L^-2 < eps/2."""
    L = int(math.floor(math.sqrt(2.0 * c0_hat / eps))) + 1
    while c0_hat / L ** 2 >= eps / 2.0:
        L += 1
    return L


def _lower_bound_event(r, cube, config, lam, beta, eps, psi2):
    f = sample_field(cube, config, r)
    cube_sites = cube.sites()
    v = np.array(f.v_vector(cube_sites))
    b = np.array(f.b_vector(cube_sites))
    value = psi2 @ (v - lam) + math.sqrt(psi2 @ (b - beta) ** 2)
    return 1 if value < eps / 2.0 else 0


def lower_bound_probability(config: DisorderConfig, d: int, eps: float,
                            L: int, R: int, mapper=None,
                            min_successes: int = 10) -> CheckReport:
    """Frequency of the small-quadratic-form event against the product bound.

    The analytic bound is mass_V([lam, lam + eps/4[)^N times
    mass_B([beta - eps/4, beta + eps/4[)^N; the all-sites event it counts
    implies the quadratic-form event, so the frequency must reach the bound
    up to 3 sigma.  Runs with fewer than `min_successes` hits are censored.
    """
    ge = gap_edge(config, d)
    cube = CubeSpec(d, L)
    psi2 = _tent_vector(cube) ** 2
    n = cube.site_count
    bound = (config.mu_V.mass(ge.lam, ge.lam + eps / 4.0) ** n
             * config.mu_B.mass(ge.beta - eps / 4.0, ge.beta + eps / 4.0) ** n)
    hits = sum(run_realizations(
        partial(_lower_bound_event, cube=cube, config=config, lam=ge.lam,
                beta=ge.beta, eps=eps, psi2=psi2), R, mapper))
    phat = hits / R
    sigma = math.sqrt(max(phat * (1.0 - phat), 0.0) / R)
    rep = CheckReport("lower_bound_probability",
                      parameters={"eps": eps, "L": L, "R": R, "bound": bound,
                                  "empirical": phat,
                                  "censored": hits < min_successes and phat < 1.0})
    if hits < min_successes and phat < 1.0:
        rep.record_precondition_failure()   # too rare to resolve at this R
    else:
        rep.record(phat - bound + 3.0 * sigma)
    return rep


# -- suitability ---------------------------------------------------------------


def _suitability_geometry(cube: CubeSpec):
    _require(float(cube.L).is_integer() and int(cube.L) % 6 == 0,
             f"suitability needs a length in 6N, got {cube.L}")
    cube_sites = cube.sites()
    rows = component_indices(cube_sites, inner_boundary(cube_sites))
    cols = component_indices(cube_sites, cube.concentric(cube.L / 3.0).sites())
    return cube_sites, rows, cols


def _suitability_norm(op_matrix, energy, rows, cols, dim):
    g = np.linalg.solve(op_matrix - energy * np.eye(dim), np.eye(dim))
    return float(np.linalg.norm(g[np.ix_(rows, cols)], 2))


def suitable(cube: CubeSpec, field: FieldSample, energy: float,
             theta: float) -> bool:
    """Whether the resolvent block from the inner third to the inner boundary
    has norm below L^-theta (and the energy misses the spectrum)."""
    cube_sites, rows, cols = _suitability_geometry(cube)
    op = assemble_block(build_h(cube_sites, "simple", field), field)
    ev = eigensolve(op).eigenvalues
    delta = float(np.min(np.abs(ev - energy)))
    if delta <= 1e-12 * max(np.max(np.abs(ev)), 1.0):
        return False
    norm = _suitability_norm(op.matrix, energy, rows, cols, op.dim)
    return norm < cube.L ** (-theta)


def wilson_interval(hits: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    p = hits / trials
    denom = 1.0 + z ** 2 / trials
    center = (p + z ** 2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z ** 2 / (4 * trials ** 2)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


def ct_threshold_length(theta: float, d: int, cap: int = 10 ** 9) -> int | None:
    """Smallest length in 6N where the worst-case resolvent-decay budget
    4 sqrt(L) exp(-sqrt(L)/(48 d)) beats L^-theta across the whole block.

    The block aggregation costs a factor sqrt(|inner boundary| x |core|).
    Desk-scale lengths sit far below this threshold; it is reported so the
    gap-event implication can be asserted exactly where it is in force.
    """
    def satisfied(L):
        per_axis = L - 1 if L % 2 == 0 else L          # integer L
        inner = per_axis ** d - max(per_axis - 2, 0) ** d
        core_axis = len(CubeSpec(1, L / 3.0).axis_offsets())
        core = core_axis ** d
        lhs = (0.5 * math.log(inner * core) + math.log(4.0)
               + 0.5 * math.log(L) - math.sqrt(L) / (48.0 * d))
        return lhs < -theta * math.log(L)

    L = 6
    while L <= cap and not satisfied(L):
        L *= 2
    if L > cap:
        return None
    lo, hi = L // 2, L
    while hi - lo > 6:
        mid = (lo + hi) // 2
        mid -= mid % 6
        if mid <= lo:
            mid = lo + 6
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class SuitabilityReport:
    """Monte Carlo suitability probabilities on an energy grid."""

    L: int
    theta: float
    energies: np.ndarray
    probability: np.ndarray
    wilson_lo: np.ndarray
    wilson_hi: np.ndarray
    realizations: int
    a_L: float
    gap_event_frequency: float
    implication: CheckReport
    threshold_L: int | None


def _suitability_row(r, cube, config, energies, theta, a_L):
    """Per realization: suitability per energy, the gap event flag, and the
    sharp per-instance CT implication data."""
    cube_sites, rows, cols = _suitability_geometry(cube)
    f = sample_field(cube, config, r)
    op = assemble_block(build_h(cube_sites, "simple", f), f)
    ev = eigensolve(op).eigenvalues
    scale = max(np.max(np.abs(ev)), 1.0)
    flags = []
    norms = []
    deltas = []
    for e in energies:
        delta = float(np.min(np.abs(ev - e)))
        if delta <= 1e-12 * scale:
            flags.append(False)
            norms.append(np.inf)
            deltas.append(0.0)
            continue
        nrm = _suitability_norm(op.matrix, e, rows, cols, op.dim)
        flags.append(nrm < cube.L ** (-theta))
        norms.append(nrm)
        deltas.append(delta)
    gap_event = bool(np.min(np.abs(ev)) > a_L + cube.L ** -0.5)
    return flags, norms, deltas, gap_event


def _ct_block_budget(cube: CubeSpec, delta: float, d: int) -> float:
    """Frobenius aggregate of per-pair Combes-Thomas bounds over the
    boundary-to-core block; dominates the block operator norm."""
    cube_sites = cube.sites()
    bnd = inner_boundary(cube_sites)
    core = cube.concentric(cube.L / 3.0).sites()
    dcap = min(delta, 1.0)
    total = 0.0
    for n in bnd:
        for m in core:
            total += (4.0 / dcap * math.exp(-dcap * dist1(n, m) / (12.0 * d))) ** 2
    return math.sqrt(total)


def suitability_probability(config: DisorderConfig, d: int, L: int,
                            theta: float, energies, R: int,
                            mapper=None) -> SuitabilityReport:
    """Suitability frequency per energy, with the gap-event implication.

    Energies must lie in [-a_L, a_L] with a_L = edge + 1/sqrt(L).  Two
    implications are asserted per instance: the asymptotic one (active only
    above the reported worst-case threshold length) and a sharp one using
    the instance's own spectral distance in the decay budget.
    """
    energies = np.asarray(energies, dtype=float)
    cube = CubeSpec(d, L)
    ge = gap_edge(config, d)
    a_L = ge.edge + L ** -0.5
    _require(bool(np.all(np.abs(energies) <= a_L)),
             f"energies must lie in [-a_L, a_L] with a_L = {a_L:.6g}")
    threshold = ct_threshold_length(theta, d)
    rows = run_realizations(
        partial(_suitability_row, cube=cube, config=config, energies=energies,
                theta=theta, a_L=a_L), R, mapper)

    flags = np.array([row[0] for row in rows], dtype=bool)      # R x nE
    hits = flags.sum(axis=0)
    lo, hi = zip(*(wilson_interval(int(h), R) for h in hits))
    events = np.array([row[3] for row in rows], dtype=bool)

    implication = CheckReport(
        "gap_event_implies_suitable",
        parameters={"L": L, "theta": theta, "threshold_L": threshold})
    target = L ** (-theta)
    for row, event in zip(rows, events):
        if not event:
            continue
        _, norms, deltas, _ = row
        for k in range(len(energies)):
            # asymptotic implication: in force only above the threshold length
            if threshold is not None and L >= threshold:
                implication.record(1.0 if row[0][k] else -1.0)
            # sharp implication: the instance's own decay budget
            if deltas[k] > 0.0:
                budget = _ct_block_budget(cube, deltas[k], d)
                if budget < target:
                    implication.record(1.0 if row[0][k] else -1.0)

    return SuitabilityReport(L, theta, energies, hits / R, np.array(lo),
                             np.array(hi), R, a_L, float(events.mean()),
                             implication, threshold)


# -- Lifschitz estimate for the scalar operator --------------------------------


def _edge_event(r, cube, config, cut):
    f = sample_field(cube, config, r)
    h = build_h(cube, "simple", f)
    return 1 if float(np.linalg.eigvalsh(h.matrix)[0]) <= cut else 0


def lifschitz_for_h(config: DisorderConfig, d: int, C: float, lengths,
                    R: int, mapper=None) -> tuple[CheckReport, list]:
    """Edge-event probability of the scalar operator, decaying along lengths.

    Estimates P(inf spectrum <= lam + C L^-1/2) per length and asserts a
    nonincreasing trend within 3 sigma.  Needs a genuinely random potential.
    """
    _require(config.mu_V.kind != "point_mass",
             "needs mu_V not concentrated in a single point")
    lam = config.mu_V.support_inf
    probs = []
    for L in lengths:
        cube = CubeSpec(d, L)
        cut = lam + C * L ** -0.5
        hits = sum(run_realizations(
            partial(_edge_event, cube=cube, config=config, cut=cut), R, mapper))
        phat = hits / R
        sigma = math.sqrt(max(phat * (1.0 - phat), 0.0) / R)
        probs.append((int(L), phat, sigma))
    rep = CheckReport("lifschitz_edge_trend", parameters={"C": C, "R": R})
    for (l1, p1, s1), (l2, p2, s2) in zip(probs, probs[1:]):
        rep.record(p1 - p2 + 3.0 * math.hypot(s1, s2))
    return rep, probs


# -- eigenfunction correlator ---------------------------------------------------


@dataclass(frozen=True)
class CorrelatorProfile:
    """Ensemble mean of the spectral-projector correlator over site pairs."""

    interval: tuple[float, float]
    pairs: tuple
    mean_q: np.ndarray
    stderr_q: np.ndarray
    realizations: int
    contributing: int        # realizations with spectrum inside the interval

    @property
    def empty(self) -> bool:
        return self.contributing == 0

    def distances(self) -> np.ndarray:
        return np.array([dist1(n, m) for n, m in self.pairs], dtype=float)


def correlator_q(s: Spectrum, op_sites, interval, pairs) -> np.ndarray:
    """Projector-sum correlator Q(n, m) for one realization.

    Q sums the 2x2 Frobenius norms of the rank-one spectral projectors with
    eigenvalue in the interval; it dominates the sup over unit-bounded Borel
    functions by the triangle inequality.
    """
    if s.eigenvectors is None:
        raise ValueError("correlator needs eigenvectors")
    lo, hi = interval
    sel = (s.eigenvalues >= lo) & (s.eigenvalues <= hi)
    n = len(op_sites)
    idx = {site: i for i, site in enumerate(op_sites)}
    if not np.any(sel):
        return np.zeros(len(pairs))
    v = s.eigenvectors[:, sel]
    amp = np.sqrt(v[:n, :] ** 2 + v[n:, :] ** 2)     # site amplitude per vector
    return np.array([amp[idx[tuple(n1)]] @ amp[idx[tuple(m1)]]
                     for n1, m1 in pairs])


def _correlator_row(r, cube, config, interval, pairs):
    s = eigensolve(plain_block(cube, config, r), want_vectors=True)
    return correlator_q(s, cube.sites(), interval, pairs)


def eigenfunction_correlator(config: DisorderConfig, cube: CubeSpec,
                             interval, pairs=None, R: int = 1,
                             mapper=None) -> CorrelatorProfile:
    """Ensemble mean of the correlator over site pairs (default: centre to all)."""
    if pairs is None:
        pairs = tuple((cube.center, m) for m in cube.sites())
    else:
        pairs = tuple((tuple(n), tuple(m)) for n, m in pairs)
    rows = np.vstack(run_realizations(
        partial(_correlator_row, cube=cube, config=config,
                interval=tuple(interval), pairs=pairs), R, mapper))
    contributing = int(np.sum(rows.any(axis=1)))
    stderr = (rows.std(axis=0, ddof=1) / math.sqrt(R) if R > 1
              else np.zeros(rows.shape[1]))
    return CorrelatorProfile(tuple(interval), pairs, rows.mean(axis=0), stderr,
                             R, contributing)


@dataclass(frozen=True)
class StretchedFit:
    c_zeta: float
    zeta: float
    log_slope: float        # slope of ln Q against |n-m|^zeta (negative = decay)
    r_squared: float


def stretched_fit(profile: CorrelatorProfile, zeta_grid=None) -> StretchedFit:
    """Best stretched-exponential description of the correlator decay.

    For each exponent in the grid, ln Q is regressed on |n-m|^zeta; the
    exponent with the highest R^2 wins and its intercept gives the
    prefactor.  Zero entries (below machine reach) are excluded.
    """
    if profile.empty:
        raise ValueError("correlator profile is empty: the interval missed "
                         "the spectrum in every realization")
    if zeta_grid is None:
        zeta_grid = np.arange(0.1, 1.01, 0.05)
    dists = profile.distances()
    keep = (profile.mean_q > 0.0) & (dists > 0)
    if int(keep.sum()) < 3:
        raise ValueError("not enough positive correlator entries for a fit")
    x0 = dists[keep]
    y = np.log(profile.mean_q[keep])
    best = None
    for zeta in zeta_grid:
        x = x0 ** zeta
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 0.0
        if best is None or r2 > best[3]:
            best = (float(np.exp(intercept)), float(zeta), float(slope), r2)
    return StretchedFit(*best)
