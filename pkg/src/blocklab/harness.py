"""Experiment configuration, orchestration and flat-file persistence.

Configs are plain INI text: an [experiment] section (kind, dimension,
length, realizations, seed, workers), one section per single-site measure
([mu_V], [mu_B]) and an optional section named after the experiment kind
for its specific knobs.  Outputs are CSV tables (UTF-8, comma-separated,
17 significant digits) plus a run.json sidecar carrying the config echo,
its hash, check summaries and an outputs manifest.

Determinism contract: with a fixed config and seed, every CSV is
byte-identical regardless of the worker count, because realization kernels
are pure functions of (seed, realization index) and aggregation always
consumes results in realization order.
"""

import configparser
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import asymptotics, green, inequalities, spectral
from .disorder import DisorderConfig, SiteMeasure, case_beta, sample_field
from .inequalities import CheckReport, PreconditionError
from .lattice import CubeSpec
from .operators import MAX_BLOCK_DIM, assemble_block, build_h
from .spectral import deterministic_radius, eigensolve

KINDS = ("spectrum", "ids", "dos", "wegner", "gap", "interlace", "green",
         "ct", "sli-edi", "tails", "suitability", "correlator", "fh")


# -- configuration -----------------------------------------------------------


@dataclass
class ExperimentConfig:
    kind: str
    d: int
    L: float
    realizations: int
    seed: int
    workers: int
    mu_V: SiteMeasure
    mu_B: SiteMeasure
    extra: dict = field(default_factory=dict)

    def disorder(self) -> DisorderConfig:
        return DisorderConfig(self.mu_V, self.mu_B, self.seed)

    def cube(self) -> CubeSpec:
        return CubeSpec(self.d, self.L)

    # canonical text excludes the worker count: it must not affect results
    def canonical_text(self) -> str:
        lines = [f"kind={self.kind}", f"d={self.d}", f"L={self.L!r}",
                 f"realizations={self.realizations}", f"seed={self.seed}",
                 f"mu_V={self.mu_V.describe()}", f"mu_B={self.mu_B.describe()}"]
        for k in sorted(self.extra):
            lines.append(f"{self.kind}.{k}={self.extra[k]}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def floats(self, key: str, default: str | None = None) -> list[float]:
        raw = self.extra.get(key, default)
        if raw is None:
            raise PreconditionError(f"experiment {self.kind!r} needs key {key!r}")
        return [float(tok) for tok in str(raw).replace(",", " ").split()]

    def ints(self, key: str, default: str | None = None) -> list[int]:
        return [int(round(x)) for x in self.floats(key, default)]

    def scalar(self, key: str, default: float) -> float:
        return float(self.extra.get(key, default))

    def flag(self, key: str, default: bool = False) -> bool:
        raw = str(self.extra.get(key, default)).strip().lower()
        return raw in ("1", "true", "yes", "on")


def parse_measure(section) -> SiteMeasure:
    kind = section.get("kind", "").strip()
    if kind == "uniform":
        return SiteMeasure.uniform(section.getfloat("a"), section.getfloat("b"))
    if kind == "triangular":
        return SiteMeasure.triangular(section.getfloat("a"), section.getfloat("b"))
    if kind == "point_mass":
        return SiteMeasure.point_mass(section.getfloat("c"))
    if kind == "two_point":
        return SiteMeasure.two_point(section.getfloat("v1"), section.getfloat("p"),
                                     section.getfloat("v2"))
    raise PreconditionError(f"unknown measure kind {kind!r}")


def parse_config(text: str, kind: str | None = None, seed: int | None = None,
                 workers: int | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    cfg_kind = kind or exp.get("kind")
    if cfg_kind is None:
        raise PreconditionError("no experiment kind given (config or CLI)")
    if kind and exp.get("kind") and exp.get("kind") != kind:
        raise PreconditionError(
            f"config kind {exp.get('kind')!r} conflicts with requested {kind!r}")
    if cfg_kind not in KINDS:
        raise PreconditionError(f"unknown experiment kind {cfg_kind!r}")
    extra = dict(cp[cfg_kind]) if cp.has_section(cfg_kind) else {}
    return ExperimentConfig(
        kind=cfg_kind,
        d=int(exp.get("d", 1)),
        L=float(exp.get("l", exp.get("L", 16))),
        realizations=int(exp.get("realizations", 100)),
        seed=int(exp.get("seed", 0)) if seed is None else seed,
        workers=int(exp.get("workers", 1)) if workers is None else workers,
        mu_V=parse_measure(cp["mu_V"]),
        mu_B=parse_measure(cp["mu_B"]),
        extra=extra,
    )


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), **overrides)


def config_to_text(cfg: ExperimentConfig) -> str:
    """Serialize a config back to INI text (round-trips through parse_config)."""
    cp = configparser.ConfigParser()
    cp["experiment"] = {"kind": cfg.kind, "d": str(cfg.d), "L": repr(cfg.L),
                        "realizations": str(cfg.realizations),
                        "seed": str(cfg.seed), "workers": str(cfg.workers)}
    for name, m in (("mu_V", cfg.mu_V), ("mu_B", cfg.mu_B)):
        sec = {"kind": m.kind}
        if m.kind in ("uniform", "triangular"):
            sec.update(a=repr(m.params[0]), b=repr(m.params[1]))
        elif m.kind == "point_mass":
            sec.update(c=repr(m.params[0]))
        else:
            sec.update(v1=repr(m.params[0]), p=repr(m.params[1]),
                       v2=repr(m.params[2]))
        cp[name] = sec
    if cfg.extra:
        cp[cfg.kind] = {k: str(v) for k, v in cfg.extra.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- validation ---------------------------------------------------------------


def validate(cfg: ExperimentConfig) -> list[str]:
    """All hypothesis diagnostics for the configured experiment, no computation."""
    out = []
    if cfg.d < 1:
        out.append(f"dimension must be >= 1, got {cfg.d}")
    if cfg.L <= 1:
        out.append(f"cube length must exceed 1, got {cfg.L}")
    else:
        dim = 2 * cfg.cube().site_count
        if dim > MAX_BLOCK_DIM:
            out.append(f"matrix dimension {dim} exceeds the hard cap "
                       f"{MAX_BLOCK_DIM}; reduce L or d")
    if cfg.realizations < 1:
        out.append("realizations must be >= 1")

    k = cfg.kind
    if k in ("wegner", "dos"):
        if not (cfg.mu_V.has_density and cfg.mu_B.has_density):
            out.append(f"{k}: the two-density estimate needs densities of "
                       "bounded variation for both measures")
        if cfg.mu_V.support_inf < 0 or cfg.mu_B.support_inf < 0:
            out.append(f"{k}: the two-density estimate needs "
                       "inf supp mu_V >= 0 and inf supp mu_B >= 0")
    if k == "wegner":
        try:
            energies = cfg.floats("energies")
            epsilons = cfg.floats("epsilons")
        except PreconditionError as e:
            out.append(str(e))
        else:
            for e in energies:
                for eps in epsilons:
                    if not (e > 0 and 0 < eps and 3 * eps < e):
                        out.append(f"wegner: window (E={e}, eps={eps}) violates "
                                   "E > 0, 3*eps < E")
    if k in ("gap", "interlace", "tails", "suitability"):
        try:
            case_beta(cfg.mu_B)
        except ValueError as e:
            out.append(f"{k}: {e}")
        if cfg.mu_V.support_inf < 0:
            out.append(f"{k}: needs inf supp mu_V >= 0")
    if k == "suitability":
        for L in cfg.ints("lengths", "12 24 48"):
            if L % 6 != 0:
                out.append(f"suitability: length {L} not in 6N")
    if k == "tails" and cfg.mu_V.kind == "point_mass":
        out.append("tails: mu_V concentrated in a single point has no tail")
    if k == "fh":
        if cfg.mu_V.support_inf < 0:
            out.append("fh: needs V >= 0 so that H >= 0")
        if cfg.mu_B.support_inf < 0:
            out.append("fh: needs B >= 0")
    return out


# -- parallel mapping ---------------------------------------------------------


@contextmanager
def realization_mapper(workers: int):
    """Yield a pool map for > 1 workers, else None (inline execution).

    Either way results come back in realization order, so aggregates are
    identical across worker counts.
    """
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            yield lambda fn, it: ex.map(fn, it, chunksize=8)
    else:
        yield None


# -- CSV output ---------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, tuple):                 # lattice site
        return " ".join(str(int(c)) for c in x)
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


# -- experiments ---------------------------------------------------------------

# each _exp_* returns (tables, reports, summary); tables maps file stem to
# (header, row list)


def _exp_spectrum(cfg, mapper):
    from functools import partial
    cube = cfg.cube()
    dis = cfg.disorder()
    radius = deterministic_radius(cfg.d, cfg.mu_V, cfg.mu_B)
    sym = CheckReport("symmetry")
    nondeg = CheckReport("nondegeneracy")
    rad = CheckReport("radius", parameters={"radius": radius})
    rows = []
    eigen_rows = spectral.run_realizations(
        partial(spectral._eigenvalue_row, cube=cube, config=dis),
        cfg.realizations, mapper)
    specs = [spectral.Spectrum(ev, None, "plain", cube.site_count)
             for ev in eigen_rows]
    for r, s in enumerate(specs):
        for j, e in enumerate(s.eigenvalues):
            rows.append((r, j, e))
        c = spectral.symmetry_check(s)
        sym.record(c.threshold - c.value)
        if cfg.mu_V.has_density:
            c = spectral.nondegeneracy_check(s)
            nondeg.record(c.value - c.threshold)
        c = spectral.radius_check(s, radius)
        rad.record(c.threshold - c.value)
    tables = {"eigenvalues": (["realization", "index", "eigenvalue"], rows)}
    return tables, [sym, nondeg, rad], {"radius_bound": radius}


def _exp_ids(cfg, mapper):
    radius = deterministic_radius(cfg.d, cfg.mu_V, cfg.mu_B)
    default = f"{-radius} {radius} 41"
    lo, hi, n = cfg.floats("energy_range", default)
    grid = (np.linspace(lo, hi, int(n)) if "energies" not in cfg.extra
            else np.array(cfg.floats("energies")))
    est = spectral.ids_monte_carlo(cfg.disorder(), cfg.cube(), grid,
                                   cfg.realizations, mapper)
    mono = CheckReport("ids_monotone")
    for a, b in zip(est.mean_N, est.mean_N[1:]):
        mono.record(b - a)
    rng = CheckReport("ids_range")
    rng.record(float(np.min(est.mean_N)))
    rng.record(1.0 - float(np.max(est.mean_N)))
    rows = [(e, m, s, est.realizations)
            for e, m, s in zip(est.grid, est.mean_N, est.stderr_N)]
    return ({"ids": (["E", "mean_N", "stderr", "R"], rows)},
            [mono, rng], {})


def _dos_edges(cfg):
    radius = deterministic_radius(cfg.d, cfg.mu_V, cfg.mu_B)
    lo, hi, n = cfg.floats("bins", f"{-radius} {radius} 40")
    return np.linspace(lo, hi, int(n) + 1)


def _exp_dos(cfg, mapper):
    dis = cfg.disorder()
    edges = _dos_edges(cfg)
    hist = spectral.dos_histogram(dis, cfg.cube(), edges, cfg.realizations, mapper)
    reports = []
    bound2 = None
    try:
        bound2 = inequalities.uniform_dos_bound(dis)
        if dis.mu_V.support_inf >= 0 and dis.mu_B.support_inf >= 0:
            rep2 = CheckReport("dos_bound_uniform", parameters={"bound": bound2})
            for dens, se in zip(hist.density, hist.stderr):
                rep2.record(bound2 + 3 * se - dens)
            reports.append(rep2)
    except PreconditionError:
        pass
    lam = dis.mu_V.support_inf
    beta = dis.mu_B.support_inf
    rows = []
    for k in range(len(hist.centers)):
        c = hist.centers[k]
        b1 = math.inf
        if dis.mu_V.has_density and lam > 0:
            b1 = min(b1, 2 * (abs(c) + 1) / lam * dis.mu_V.bv_norm)
        if dis.mu_B.has_density and beta > 0:
            b1 = min(b1, 2 * (abs(c) + 1) / beta * dis.mu_B.bv_norm)
        rows.append((hist.edges[k], hist.edges[k + 1], c, hist.density[k],
                     hist.stderr[k],
                     bound2 if bound2 is not None else math.inf, b1))
    if any(np.isfinite(r[6]) for r in rows):
        rep1 = CheckReport("dos_bound_energy_dependent")
        for r in rows:
            if np.isfinite(r[6]):
                rep1.record(r[6] + 3 * r[4] - r[3])
        reports.append(rep1)
    header = ["bin_lo", "bin_hi", "center", "density", "stderr",
              "bound_uniform", "bound_energy_dependent"]
    return {"dos": (header, rows)}, reports, {"bound_uniform": bound2}


def _exp_wegner(cfg, mapper):
    dis = cfg.disorder()
    cube = cfg.cube()
    rows = []
    reports = []
    for e in cfg.floats("energies"):
        for eps in cfg.floats("epsilons"):
            rep = inequalities.wegner_finite_volume(dis, cube, e, eps,
                                                    cfg.realizations, mapper)
            p = rep.parameters
            rows.append((e, eps, p["mean"], p["stderr"], p["bound"],
                         rep.worst_margin, rep.passed))
            reports.append(rep)
    header = ["E", "eps", "mean_count", "stderr", "bound", "slack", "passed"]
    return {"wegner": (header, rows)}, reports, {}


def _gap_row(r, cube, config):
    f = sample_field(cube, config, r)
    s = eigensolve(assemble_block(build_h(cube, "simple", f), f))
    g_minus, g_plus = spectral.spectral_gap(s)
    return g_minus, g_plus, float(np.min(np.abs(s.eigenvalues)))


def _exp_gap(cfg, mapper):
    from functools import partial
    dis = cfg.disorder()
    cube = cfg.cube()
    lam = max(cfg.mu_V.support_inf, 0.0)
    beta = case_beta(cfg.mu_B).beta
    edge = math.hypot(lam, beta)
    rows = []
    rep = CheckReport("gap_edge", parameters={"lam": lam, "beta": beta,
                                              "edge": edge})
    vals = spectral.run_realizations(
        partial(_gap_row, cube=cube, config=dis), cfg.realizations, mapper)
    for r, (g_minus, g_plus, min_abs) in enumerate(vals):
        rows.append((r, g_minus, g_plus, min_abs, edge))
        rep.record(min_abs - edge + 1e-12 * max(edge, 1.0))
    header = ["realization", "gap_lo", "gap_hi", "min_abs_eigenvalue", "edge"]
    return {"gap": (header, rows)}, [rep], {"edge": edge}


def _interlace_row(r, cube, config, lam, beta, eps):
    f = sample_field(cube, config, r)
    h = build_h(cube, "simple", f)
    out = []
    for fn, args in ((inequalities.interlacing_check, (cube, f, beta)),
                     (inequalities.half_half_check, (cube, f, lam, beta)),
                     (inequalities.bracketing_gap_check, (cube, f, lam, beta)),
                     (asymptotics.finite_volume_tail_bound, (cube, f, lam, beta, eps))):
        try:
            out.append(fn(*args).to_json())
        except PreconditionError as e:
            out.append({"name": fn.__name__, "precondition": str(e)})
    out.append(inequalities.beta_map_check(h, beta).to_json())
    return out


def _exp_interlace(cfg, mapper):
    from functools import partial
    dis = cfg.disorder()
    cube = cfg.cube()
    lam = cfg.scalar("lam", max(cfg.mu_V.support_inf, 0.0))
    beta = cfg.scalar("beta", case_beta(cfg.mu_B).beta)
    eps = cfg.scalar("eps", 0.3)
    merged = {}
    rows_json = spectral.run_realizations(
        partial(_interlace_row, cube=cube, config=dis, lam=lam, beta=beta,
                eps=eps), cfg.realizations, mapper)
    for row in rows_json:
        for item in row:
            name = item["name"]
            rep = merged.setdefault(name, CheckReport(name))
            if "precondition" in item:
                rep.record_precondition_failure()
            else:
                rep.instances += item["instances"]
                rep.violations += item["violations"]
                if item["worst_margin"] is not None:
                    rep.worst_margin = min(rep.worst_margin, item["worst_margin"])
                rep.preconditions_failed += item["preconditions_failed"]
    reports = list(merged.values())
    rows = [(r.name, r.instances, r.violations,
             r.worst_margin if r.instances else math.nan,
             r.preconditions_failed) for r in reports]
    header = ["check", "instances", "violations", "worst_margin",
              "preconditions_failed"]
    return {"interlace": (header, rows)}, reports, {"lam": lam, "beta": beta}


def _nested_lengths(cfg):
    raw = cfg.extra.get("lengths")
    if raw:
        l1, l2, l3 = [float(x) for x in str(raw).split()]
    else:
        l3 = cfg.L
        l2 = max(math.ceil(l3 / 2), 5)
        l1 = 2.0
    return l1, l2, l3


def _green_row(r, d, lengths, config, energy):
    l1, l2, l3 = lengths
    c1, c2, c3 = (CubeSpec(d, l) for l in lengths)
    f = sample_field(c3, config, r)
    try:
        res, d2, d3 = green._gri(c1, c2, c3, f, energy)
    except PreconditionError as e:
        return {"precondition": str(e)}
    cap = 1e-9 * (1 + 1 / d2) * (1 + 1 / d3)
    return {"residual": res, "delta2": d2, "delta3": d3, "cap": cap}


def _exp_green(cfg, mapper):
    from functools import partial
    dis = cfg.disorder()
    energy = cfg.scalar("energy", 0.0)
    lengths = _nested_lengths(cfg)
    rep = CheckReport("gri_residual", parameters={"E": energy,
                                                  "lengths": list(lengths)})
    rows = []
    vals = spectral.run_realizations(
        partial(_green_row, d=cfg.d, lengths=lengths, config=dis,
                energy=energy), cfg.realizations, mapper)
    for r, item in enumerate(vals):
        if "precondition" in item:
            rep.record_precondition_failure()
            continue
        rep.record(item["cap"] - item["residual"])
        rows.append((r, energy, item["residual"], item["delta2"],
                     item["delta3"], item["cap"],
                     item["residual"] <= item["cap"]))
    header = ["realization", "E", "residual", "delta2", "delta3", "cap", "passed"]
    return {"green": (header, rows)}, [rep], {}


def _ct_row(r, cube, config, energy):
    f = sample_field(cube, config, r)
    op = assemble_block(build_h(cube, "simple", f), f)
    try:
        rep = green.combes_thomas_check(op, energy)
        rate, intercept = green.decay_rate_fit(op, energy)
    except (PreconditionError, ValueError) as e:
        return {"precondition": str(e)}
    profile = green.decay_profile(op, energy) if r == 0 else None
    return {"worst": rep.worst_margin, "violations": rep.violations,
            "instances": rep.instances, "delta": rep.parameters["delta"],
            "rate": rate, "intercept": intercept, "profile": profile}


def _exp_ct(cfg, mapper):
    from functools import partial
    dis = cfg.disorder()
    cube = cfg.cube()
    energy = cfg.scalar("energy", 0.0)
    d = cfg.d
    rep = CheckReport("combes_thomas", parameters={"E": energy})
    fit_rep = CheckReport("ct_rate", parameters={"E": energy})
    rows = []
    profile_rows = []
    vals = spectral.run_realizations(
        partial(_ct_row, cube=cube, config=dis, energy=energy),
        cfg.realizations, mapper)
    for r, item in enumerate(vals):
        if "precondition" in item:
            rep.record_precondition_failure()
            continue
        rep.instances += item["instances"]
        rep.violations += item["violations"]
        rep.worst_margin = min(rep.worst_margin, item["worst"])
        delta = min(item["delta"], 1.0)
        fit_rep.record(-item["rate"] - delta / (12.0 * d))
        rows.append((r, energy, item["delta"], item["worst"], item["rate"],
                     item["intercept"]))
        if item["profile"] is not None:
            profile_rows = [(n, m, dist, nrm, cap)
                            for n, m, dist, nrm, cap in item["profile"]]
    tables = {
        "ct": (["realization", "E", "delta", "worst_slack", "fit_rate",
                "fit_intercept"], rows),
        "ct_profile": (["n", "m", "dist1", "block_norm", "ct_bound"],
                       profile_rows),
    }
    return tables, [rep, fit_rep], {}


def _sli_edi_row(r, d, lengths, config, energy):
    l1, l2, l3 = lengths
    c1, c2, c3 = (CubeSpec(d, l) for l in lengths)
    f = sample_field(c3, config, r)
    out = {}
    try:
        out["sli"] = green.sli_check(c1, c2, c3, f, energy).to_json()
    except PreconditionError as e:
        out["sli"] = {"precondition": str(e)}
    try:
        s = eigensolve(assemble_block(build_h(c3, "simple", f), f))
        j = int(np.argmin(np.abs(s.eigenvalues - energy)))
        # probe the eigenpair closest to the requested energy
        out["edi"] = green.edi_check(c2, c3, f, j).to_json()
    except (PreconditionError, ValueError) as e:
        out["edi"] = {"precondition": str(e)}
    return out


def _exp_sli_edi(cfg, mapper):
    from functools import partial
    dis = cfg.disorder()
    energy = cfg.scalar("energy", 0.0)
    lengths = _nested_lengths(cfg)
    sli = CheckReport("sli", parameters={"E": energy})
    edi = CheckReport("edi")
    vals = spectral.run_realizations(
        partial(_sli_edi_row, d=cfg.d, lengths=lengths, config=dis,
                energy=energy), cfg.realizations, mapper)
    for item in vals:
        for name, rep in (("sli", sli), ("edi", edi)):
            payload = item[name]
            if "precondition" in payload:
                rep.record_precondition_failure()
            else:
                rep.instances += payload["instances"]
                rep.violations += payload["violations"]
                rep.worst_margin = min(rep.worst_margin, payload["worst_margin"])
    rows = [(r.name, r.instances, r.violations,
             r.worst_margin if r.instances else math.nan,
             r.preconditions_failed) for r in (sli, edi)]
    return ({"sli_edi": (["check", "instances", "violations", "worst_margin",
                          "preconditions_failed"], rows)},
            [sli, edi], {})


def _exp_tails(cfg, mapper):
    dis = cfg.disorder()
    eps = sorted(cfg.floats("epsilons", "0.08 0.125 0.2 0.3 0.4 0.5"))
    lengths = cfg.ints("lengths") if "lengths" in cfg.extra else None
    if lengths is not None:
        # enforce the resolution floor L >= 10/sqrt(eps) (and the dense cap)
        lengths = [max(L, asymptotics.default_tail_length(e, cfg.d))
                   for L, e in zip(lengths, eps)]
    curve = asymptotics.tail_curve(dis, cfg.d, eps, cfg.realizations,
                                   lengths=lengths, mapper=mapper)
    mono = asymptotics.tail_monotonicity_check(curve)
    reports = [mono]
    summary = {"edge": curve.edge}
    try:
        fit = asymptotics.tail_exponent_fit(curve)
        summary.update(alpha_hat=fit.alpha_hat, fit_intercept=fit.intercept,
                       fit_points=fit.points_used)
    except ValueError as e:
        summary.update(alpha_hat=None, fit_error=str(e))
    rows = [(e, int(L), dn, se, bool(c),
             math.log(e), math.log(abs(math.log(dn))) if 0 < dn < 1 else math.nan)
            for e, L, dn, se, c in zip(curve.eps_grid, curve.lengths,
                                       curve.delta_n, curve.stderr,
                                       curve.censored)]
    tables = {"tails": (["eps", "L", "delta_N", "stderr", "censored",
                         "ln_eps", "ln_abs_ln_delta_N"], rows)}
    if cfg.flag("lower_bound"):
        c0 = asymptotics.c0_estimate(cfg.ints("c0_lengths", "8 16 32 64 128"),
                                     cfg.d)
        lb_rows = []
        for e in cfg.floats("lower_epsilons", "0.5"):
            L = asymptotics.lower_bound_scale(c0.c0_hat, e)
            rep = asymptotics.lower_bound_probability(
                dis, cfg.d, e, L, int(cfg.scalar("lower_realizations", 100000)),
                mapper)
            reports.append(rep)
            p = rep.parameters
            lb_rows.append((e, L, p["empirical"], p["bound"], p["censored"]))
        tables["tails_lower"] = (["eps", "L", "empirical", "bound", "censored"],
                                 lb_rows)
        summary["c0_hat"] = c0.c0_hat
    return tables, reports, summary


def _exp_suitability(cfg, mapper):
    dis = cfg.disorder()
    # default sweep: theta just above the dimension, and well above it
    thetas = cfg.floats("theta", f"{cfg.d + 0.5} {2 * cfg.d}")
    energies = cfg.floats("energies", "0.0")
    rows = []
    reports = []
    thresholds = {}
    for theta in thetas:
        prev = None
        order = CheckReport(f"suitability_monotone_theta={theta:g}",
                            parameters={"theta": theta})
        for L in cfg.ints("lengths", "12 24 48"):
            rep = asymptotics.suitability_probability(dis, cfg.d, L, theta,
                                                      energies,
                                                      cfg.realizations, mapper)
            reports.append(rep.implication)
            for k, e in enumerate(rep.energies):
                rows.append((theta, L, e, rep.probability[k], rep.wilson_lo[k],
                             rep.wilson_hi[k], rep.gap_event_frequency,
                             rep.realizations, rep.a_L))
            if prev is not None:
                # nondecreasing within CI: the new upper bound must reach the
                # previous lower bound
                for k in range(len(energies)):
                    order.record(rep.wilson_hi[k] - prev.wilson_lo[k])
            prev = rep
        reports.append(order)
        thresholds[f"{theta:g}"] = asymptotics.ct_threshold_length(theta, cfg.d)
    header = ["theta", "L", "E", "probability", "wilson_lo", "wilson_hi",
              "gap_event_freq", "R", "a_L"]
    return ({"suitability": (header, rows)}, reports,
            {"threshold_L": thresholds})


def _exp_correlator(cfg, mapper):
    dis = cfg.disorder()
    cube = cfg.cube()
    lo, hi = cfg.floats("interval", "-0.5 0.5")
    profile = asymptotics.eigenfunction_correlator(dis, cube, (lo, hi),
                                                   pairs=None,
                                                   R=cfg.realizations,
                                                   mapper=mapper)
    rows = [(n, m, d, q, s) for (n, m), d, q, s in
            zip(profile.pairs, profile.distances(), profile.mean_q,
                profile.stderr_q)]
    summary = {"interval": [lo, hi], "contributing": profile.contributing}
    reports = []
    if not profile.empty:
        try:
            fit = asymptotics.stretched_fit(profile)
            summary.update(zeta=fit.zeta, c_zeta=fit.c_zeta,
                           log_slope=fit.log_slope, r_squared=fit.r_squared)
            rep = CheckReport("correlator_decay",
                              parameters={"zeta": fit.zeta})
            rep.record(-fit.log_slope)     # decay = negative slope
            reports.append(rep)
        except ValueError as e:
            summary["fit_error"] = str(e)
    return ({"correlator": (["n", "m", "dist1", "mean_Q", "stderr_Q"], rows)},
            reports, summary)


def _fh_row(r, cube, config, step, tol):
    f = sample_field(cube, config, r)
    try:
        return inequalities.feynman_hellmann_report(cube, f, step, tol).to_json()
    except PreconditionError as e:
        return {"precondition": str(e)}


def _exp_fh(cfg, mapper):
    from functools import partial
    dis = cfg.disorder()
    cube = cfg.cube()
    step = cfg.scalar("step", 1e-5)
    tol = cfg.scalar("tol", 1e-6)
    rep = CheckReport("feynman_hellmann", parameters={"step": step, "tol": tol})
    rows = []
    vals = spectral.run_realizations(
        partial(_fh_row, cube=cube, config=dis, step=step, tol=tol),
        cfg.realizations, mapper)
    for r, item in enumerate(vals):
        if "precondition" in item:
            rep.record_precondition_failure()
            continue
        rep.instances += item["instances"]
        rep.violations += item["violations"]
        if item["worst_margin"] is not None:
            rep.worst_margin = min(rep.worst_margin, item["worst_margin"])
        rep.preconditions_failed += item["preconditions_failed"]
        rows.append((r, item["instances"], item["violations"],
                     item["worst_margin"], item["preconditions_failed"]))
    header = ["realization", "eigenvalues_checked", "violations",
              "worst_margin", "skipped_near_degenerate"]
    return {"fh": (header, rows)}, [rep], {}


EXPERIMENTS = {
    "spectrum": _exp_spectrum,
    "ids": _exp_ids,
    "dos": _exp_dos,
    "wegner": _exp_wegner,
    "gap": _exp_gap,
    "interlace": _exp_interlace,
    "green": _exp_green,
    "ct": _exp_ct,
    "sli-edi": _exp_sli_edi,
    "tails": _exp_tails,
    "suitability": _exp_suitability,
    "correlator": _exp_correlator,
    "fh": _exp_fh,
}


# -- run records ----------------------------------------------------------------


@dataclass
class RunResult:
    config: ExperimentConfig
    tables: dict
    reports: list
    summary: dict
    diagnostics: list
    wall_time: float
    outputs: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if self.diagnostics:
            return 3
        return 0 if all(r.passed for r in self.reports) else 2

    def record(self) -> dict:
        return {
            "kind": self.config.kind,
            "config": config_to_text(self.config),
            "config_hash": self.config.config_hash(),
            "code_version": __version__,
            "wall_time_s": self.wall_time,
            "workers": self.config.workers,
            "seed": self.config.seed,
            "realizations": self.config.realizations,
            "diagnostics": self.diagnostics,
            "reports": [r.to_json() for r in self.reports],
            "summary": _jsonable(self.summary),
            "outputs": self.outputs,
            "exit_code": self.exit_code,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def emit_plotdata(result: RunResult, outdir) -> list[Path]:
    """Write one CSV per figure-type table of a completed run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for stem, (header, rows) in result.tables.items():
        written.append(write_csv(outdir / f"{stem}.csv", header, rows))
    return written


def run(cfg: ExperimentConfig, outdir) -> RunResult:
    """Execute the configured experiment and persist its artifacts."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    diagnostics = validate(cfg)
    t0 = time.perf_counter()
    tables, reports, summary = {}, [], {}
    if not diagnostics:
        with realization_mapper(cfg.workers) as mapper:
            tables, reports, summary = EXPERIMENTS[cfg.kind](cfg, mapper)
    result = RunResult(cfg, tables, reports, summary, diagnostics,
                       time.perf_counter() - t0)
    files = emit_plotdata(result, outdir)
    result.outputs = [{"name": f.name,
                       "sha256": hashlib.sha256(f.read_bytes()).hexdigest()}
                      for f in files]
    with open(outdir / "run.json", "w", encoding="utf-8") as fh:
        json.dump(result.record(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result
