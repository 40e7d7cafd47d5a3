"""Finite-volume operator assembly.

Builds the discrete Laplacian on a region under simple, Dirichlet or
Neumann conditions, its random-potential perturbation, the 2x2-block
operator with multiplication off-diagonal coupling, the constant-coupling
reference block, the Dirichlet/Neumann bracketing block, boundary
operators and indicator projections.

Block layout is fixed throughout the package: with N region sites in
canonical (lexicographic) order, indices 0..N-1 address the upper
component and N..2N-1 the lower one.
"""

from dataclasses import dataclass

import numpy as np

from . import lattice
from .disorder import FieldSample
from .lattice import Site

BOUNDARY_CONDITIONS = ("simple", "dirichlet", "neumann")

# dense-eigensolve budget: full spectra need O(dim^3) work
MAX_BLOCK_DIM = 4096


@dataclass(frozen=True)
class ScalarOperator:
    """Real symmetric matrix on a region of Z^d, in canonical site order."""

    sites: tuple[Site, ...]
    matrix: np.ndarray
    role: str
    bc: str | None = None

    @property
    def n(self) -> int:
        return len(self.sites)

    def index_of(self, site: Site) -> int:
        return self.sites.index(tuple(site))


@dataclass(frozen=True)
class BlockOperator:
    """2N x 2N real symmetric block operator (upper | lower components)."""

    sites: tuple[Site, ...]
    matrix: np.ndarray
    variant: str                 # plain | beta_reference | bracketing
    beta: float | None = None

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def dim(self) -> int:
        return 2 * len(self.sites)

    def index_of(self, site: Site) -> int:
        return self.sites.index(tuple(site))


def _site_index(region_sites):
    return {s: i for i, s in enumerate(region_sites)}


def _neighbour_pairs(region_sites):
    """Index pairs (i, j), i < j, of nearest neighbours inside the region."""
    idx = _site_index(region_sites)
    pairs = []
    for s, i in idx.items():
        for k in range(len(s)):
            m = s[:k] + (s[k] + 1,) + s[k + 1:]
            j = idx.get(m)
            if j is not None:
                pairs.append((i, j))
    return pairs


def build_h0(region, bc: str = "simple") -> ScalarOperator:
    """Discrete Laplacian on a region under the given boundary condition.

    All variants have -1 on neighbour pairs inside the region.  Diagonals:
    simple 2d everywhere (plain truncation of the full-lattice matrix),
    neumann = number of neighbours kept inside, dirichlet = 2d + number of
    neighbours lost to the outside.  This pins the quadratic-form bracketing
    H^N <= H0 <= H^D.
    """
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    region_sites = lattice.sites(region)
    n = len(region_sites)
    d = len(region_sites[0])
    m = np.zeros((n, n))
    deg = np.zeros(n)
    for i, j in _neighbour_pairs(region_sites):
        m[i, j] = m[j, i] = -1.0
        deg[i] += 1.0
        deg[j] += 1.0
    if bc == "simple":
        m[np.diag_indices(n)] = 2.0 * d
    elif bc == "neumann":
        m[np.diag_indices(n)] = deg
    else:
        m[np.diag_indices(n)] = 4.0 * d - deg
    return ScalarOperator(region_sites, m, "laplacian", bc)


def multiplication(region, values) -> ScalarOperator:
    """Diagonal multiplication operator from a site -> value map."""
    region_sites = lattice.sites(region)
    m = np.diag(np.array([values[s] for s in region_sites], dtype=float))
    return ScalarOperator(region_sites, m, "multiplication")


def build_h(region, bc: str, field: FieldSample) -> ScalarOperator:
    """Random Schroedinger operator H = H0 + V on the region."""
    h0 = build_h0(region, bc)
    m = h0.matrix.copy()
    m[np.diag_indices(h0.n)] += np.array(field.v_vector(h0.sites))
    return ScalarOperator(h0.sites, m, "schrodinger", bc)


def assemble_block(h: ScalarOperator, field: FieldSample) -> BlockOperator:
    """Block operator (H  B; B  -H) with diagonal coupling B from the field."""
    n = h.n
    b = np.array(field.b_vector(h.sites))
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = h.matrix
    m[n:, n:] = -h.matrix
    m[:n, n:] = np.diag(b)
    m[n:, :n] = np.diag(b)
    return BlockOperator(h.sites, m, "plain")


def assemble_beta_reference(h: ScalarOperator, beta: float) -> BlockOperator:
    """Constant-coupling reference block (H  beta*1; beta*1  -H)."""
    n = h.n
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = h.matrix
    m[n:, n:] = -h.matrix
    m[:n, n:] = beta * np.eye(n)
    m[n:, :n] = beta * np.eye(n)
    return BlockOperator(h.sites, m, "beta_reference", beta=float(beta))


def assemble_bracketing(region, field: FieldSample) -> BlockOperator:
    """Bracketing block (H^D  B; B  -H^N) with Dirichlet/Neumann diagonal blocks."""
    hd = build_h(region, "dirichlet", field)
    hn = build_h(region, "neumann", field)
    n = hd.n
    b = np.array(field.b_vector(hd.sites))
    m = np.zeros((2 * n, 2 * n))
    m[:n, :n] = hd.matrix
    m[n:, n:] = -hn.matrix
    m[:n, n:] = np.diag(b)
    m[n:, :n] = np.diag(b)
    return BlockOperator(hd.sites, m, "bracketing")


@dataclass(frozen=True)
class BoundaryOperator:
    """Boundary hopping operator of an inner region, on an ambient region.

    gamma is the scalar matrix with entries -1 on the boundary edge pairs of
    the inner region; lifted is its block version gamma (+) (-gamma).
    """

    ambient_sites: tuple[Site, ...]
    inner_sites: tuple[Site, ...]
    gamma: np.ndarray
    lifted: np.ndarray

    @property
    def norm(self) -> float:
        """Operator norm; equals the scalar norm by the direct-sum structure."""
        return float(np.linalg.norm(self.gamma, 2))


def build_gamma(inner, ambient) -> BoundaryOperator:
    """Boundary operator of `inner` acting on l2(ambient), lifted to blocks."""
    if not lattice.strictly_inside(inner, ambient):
        raise ValueError("inner region is not strictly inside the ambient region")
    ambient_sites = lattice.sites(ambient)
    inner_sites = lattice.sites(inner)
    idx = _site_index(ambient_sites)
    n = len(ambient_sites)
    g = np.zeros((n, n))
    for a, b in lattice.boundary(inner):
        g[idx[a], idx[b]] = -1.0
    lifted = np.zeros((2 * n, 2 * n))
    lifted[:n, :n] = g
    lifted[n:, n:] = -g
    return BoundaryOperator(ambient_sites, inner_sites, g, lifted)


def indicator(subset, ambient) -> tuple[np.ndarray, np.ndarray]:
    """Projections 1_subset and 1 (+) 1 on the ambient region (diagonal 0/1)."""
    ambient_sites = lattice.sites(ambient)
    chosen = set(lattice.sites(subset))
    if not chosen <= set(ambient_sites):
        raise ValueError("subset not contained in the ambient region")
    diag = np.array([1.0 if s in chosen else 0.0 for s in ambient_sites])
    scalar = np.diag(diag)
    block = np.diag(np.concatenate([diag, diag]))
    return scalar, block


def dump_matrix(op, path) -> None:
    """Write an operator matrix as text: one row per line, space-separated.

    A leading comment line documents the canonical site order (and the
    upper/lower component split for block operators).
    """
    sites_str = " ".join("(" + ",".join(str(c) for c in s) + ")"
                         for s in op.sites)
    layout = ""
    if op.matrix.shape[0] == 2 * len(op.sites):
        layout = (" | block layout: first half upper component,"
                  " second half lower component")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# site order: {sites_str}{layout}\n")
        for row in op.matrix:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def component_indices(ambient_sites, subset_sites) -> np.ndarray:
    """Row/column indices of subset sites in both block components."""
    idx = _site_index(ambient_sites)
    n = len(ambient_sites)
    base = np.array([idx[s] for s in subset_sites], dtype=int)
    return np.concatenate([base, base + n])


def embed_block(sub: np.ndarray, sub_sites, ambient_sites) -> np.ndarray:
    """Zero-extend a block matrix on a sub-region to the ambient block space."""
    rows = component_indices(ambient_sites, sub_sites)
    n = len(ambient_sites)
    out = np.zeros((2 * n, 2 * n))
    out[np.ix_(rows, rows)] = sub
    return out
