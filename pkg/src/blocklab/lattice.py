"""Discrete cubes in Z^d, site indexing, and boundary geometry.

A cube of "length" L about a center c is the set of lattice points in the
open box c + ]-L/2, L/2[^d.  L may be any real > 1; for even integer L the
open interval drops the endpoints, so e.g. L=4 and L=3 give the same 1d
site set {-1, 0, 1}.

All matrices in this package index sites in lexicographic order of their
coordinate tuples; every helper here returns sites in that canonical order.
"""

import math
from dataclasses import dataclass
from itertools import product

Site = tuple[int, ...]


@dataclass(frozen=True)
class CubeSpec:
    """A discrete cube ``center + ]-L/2, L/2[^d  intersect  Z^d``."""

    d: int
    L: float
    center: Site = ()

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if not self.center:
            object.__setattr__(self, "center", (0,) * self.d)
        if len(self.center) != self.d:
            raise ValueError(f"center {self.center} does not match d={self.d}")

    def axis_offsets(self) -> tuple[int, ...]:
        """Integers k with -L/2 < k < L/2 (offsets from the center)."""
        if self.L <= 1:
            raise ValueError(f"cube of length {self.L} contains no sites (need L > 1)")
        lo = -math.floor(self.L / 2) - 1
        hi = math.floor(self.L / 2) + 1
        return tuple(k for k in range(lo, hi + 1) if 2 * k > -self.L and 2 * k < self.L)

    def sites(self) -> tuple[Site, ...]:
        """All cube sites in lexicographic order."""
        offs = self.axis_offsets()
        return tuple(
            tuple(c + k for c, k in zip(self.center, combo))
            for combo in product(offs, repeat=self.d)
        )

    @property
    def site_count(self) -> int:
        return len(self.axis_offsets()) ** self.d

    def __contains__(self, site) -> bool:
        return all(2 * (s - c) > -self.L and 2 * (s - c) < self.L
                   for s, c in zip(site, self.center))

    def concentric(self, L: float) -> "CubeSpec":
        """The cube of length L with the same center."""
        return CubeSpec(self.d, L, self.center)


@dataclass(frozen=True)
class EdgeSet:
    """Ordered nearest-neighbour pairs (n, m) crossing a region boundary."""

    pairs: tuple[tuple[Site, Site], ...]

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def endpoints(self) -> frozenset:
        return frozenset(s for pair in self.pairs for s in pair)


def sites(region) -> tuple[Site, ...]:
    """Canonical (lexicographic, duplicate-free) site tuple of a region.

    Accepts a CubeSpec or any iterable of integer coordinate tuples.
    """
    if isinstance(region, CubeSpec):
        return region.sites()
    out = sorted({tuple(int(c) for c in s) for s in region})
    if not out:
        raise ValueError("empty region")
    d = len(out[0])
    if any(len(s) != d for s in out):
        raise ValueError("sites of mixed dimension")
    return tuple(out)


def dist1(n: Site, m: Site) -> int:
    """1-norm distance sum_j |n_j - m_j|."""
    return sum(abs(a - b) for a, b in zip(n, m))


def _neighbours(site: Site):
    for j in range(len(site)):
        for step in (-1, 1):
            yield site[:j] + (site[j] + step,) + site[j + 1:]


def boundary(region) -> EdgeSet:
    """All pairs (n, m), |n-m| = 1, with exactly one endpoint in the region.

    Both orientations are listed, matching the symmetric pair set used to
    define the boundary operator.
    """
    inside = set(sites(region))
    pairs = []
    for n in sorted(inside):
        for m in _neighbours(n):
            if m not in inside:
                pairs.append((n, m))
                pairs.append((m, n))
    return EdgeSet(tuple(sorted(pairs)))


def inner_boundary(region) -> tuple[Site, ...]:
    """Sites of the region with at least one neighbour outside."""
    inside = set(sites(region))
    return tuple(sorted(n for n in inside
                        if any(m not in inside for m in _neighbours(n))))


def outer_boundary(region) -> tuple[Site, ...]:
    """Sites outside the region with at least one neighbour inside."""
    inside = set(sites(region))
    out = set()
    for n in inside:
        for m in _neighbours(n):
            if m not in inside:
                out.add(m)
    return tuple(sorted(out))


def strictly_inside(region1, region2) -> bool:
    """Whether every endpoint of every boundary edge of region1 lies in region2."""
    outside = sites(region2)
    have = set(outside)
    return all(s in have for s in boundary(region1).endpoints())
