"""Spatial locations, experiment designs, orderings and past-neighbor search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError


@dataclass(frozen=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DataError(f"non-finite coordinate ({self.x}, {self.y})")


@dataclass(frozen=True)
class AxisScale:
    """Distance units per coordinate unit along each axis.

    For the Mississippi-basin setting one degree of longitude is 87.5 km and
    one degree of latitude is 111 km, i.e. ``AxisScale(87.5, 111.0)``.
    """

    sx: float = 1.0
    sy: float = 1.0

    def __post_init__(self):
        for v in (self.sx, self.sy):
            if not (math.isfinite(v) and v > 0):
                raise DataError(f"axis scale must be positive and finite, got {v}")


class LocationSet:
    """An ordered set of distinct 2-D points with an axis scaling.

    Coordinates are held as an ``(n, 2)`` float array; ``scaled`` gives the
    coordinates in distance units, on which all distances are Euclidean.
    """

    def __init__(self, coords, scale: AxisScale | None = None):
        coords = np.array(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DataError(f"coordinates must have shape (n, 2), got {coords.shape}")
        if coords.shape[0] < 1:
            raise DataError("a location set needs at least one point")
        if not np.all(np.isfinite(coords)):
            raise DataError("coordinates must be finite")
        self.scale = scale or AxisScale()
        self.coords = coords
        self.coords.setflags(write=False)
        self.scaled = coords * np.array([self.scale.sx, self.scale.sy])
        self.scaled.setflags(write=False)
        uniq = np.unique(self.scaled, axis=0)
        if uniq.shape[0] != coords.shape[0]:
            raise DataError("duplicate locations (zero distance between distinct points)")

    @classmethod
    def from_points(cls, points: Iterable[Location], scale: AxisScale | None = None):
        return cls([(p.x, p.y) for p in points], scale)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def __len__(self):
        return self.n

    @property
    def points(self) -> list[Location]:
        return [Location(float(x), float(y)) for x, y in self.coords]

    def subset(self, idx) -> "LocationSet":
        return LocationSet(self.coords[np.asarray(idx, dtype=int)], self.scale)

    def reordered(self, ordering: "Ordering") -> "LocationSet":
        return self.subset(ordering.perm)

    def distance_matrix(self, other: "LocationSet | None" = None) -> np.ndarray:
        b = self.scaled if other is None else other.scaled
        return pairwise_distances(self.scaled, b)


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between rows of ``a`` and rows of ``b`` (already scaled)."""
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def _point_distances(pts: np.ndarray, q: np.ndarray) -> np.ndarray:
    dx = pts[:, 0] - q[0]
    dy = pts[:, 1] - q[1]
    return np.sqrt(dx * dx + dy * dy)


def distance(a: Location, b: Location, scale: AxisScale | None = None) -> float:
    scale = scale or AxisScale()
    dx = scale.sx * (a.x - b.x)
    dy = scale.sy * (a.y - b.y)
    return math.sqrt(dx * dx + dy * dy)


def generate_perturbed_grid(n: int, seed: int) -> LocationSet:
    """Jittered regular grid on the unit square.

    Cell ``(r, l)`` (1-based) holds the point
    ``n**-0.5 * (r - 0.5 + X, l - 0.5 + Y)`` with ``X, Y ~ U(-0.4, 0.4)``,
    so no two points are closer than ``0.2 / sqrt(n)``.  Draws are consumed
    in row-major cell order, x before y.
    """
    side = math.isqrt(n) if n >= 0 else -1
    if n < 4 or side * side != n:
        raise DataError(f"n must be a perfect square >= 4, got {n}")
    rng = np.random.default_rng(seed)
    jitter = rng.uniform(-0.4, 0.4, size=(n, 2))
    r, l = np.meshgrid(np.arange(1, side + 1), np.arange(1, side + 1), indexing="ij")
    centers = np.column_stack([r.ravel(), l.ravel()]) - 0.5
    return LocationSet((centers + jitter) / side)


ORDER_STRATEGIES = ("coordinate", "random", "as-given")


@dataclass(frozen=True)
class Ordering:
    """A permutation ``perm``: position ``i`` in the sequence holds point ``perm[i]``."""

    perm: np.ndarray
    strategy: str = "as-given"
    seed: int | None = None
    position: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise DataError("ordering must be a permutation of 0..n-1")
        pos = np.empty_like(perm)
        pos[perm] = np.arange(perm.size)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "position", pos)

    @property
    def n(self) -> int:
        return self.perm.size

    @classmethod
    def identity(cls, n: int) -> "Ordering":
        return cls(np.arange(n), "as-given")


def order_locations(locs: LocationSet, strategy: str = "coordinate", seed: int | None = None) -> Ordering:
    """Order observations.

    ``coordinate`` sorts lexicographically by ``(x, y)`` with the original index
    as final tie-break, ``random`` is a seeded shuffle and ``as-given`` is the
    identity.
    """
    n = locs.n
    if strategy == "coordinate":
        perm = np.lexsort((np.arange(n), locs.coords[:, 1], locs.coords[:, 0]))
    elif strategy == "random":
        perm = np.random.default_rng(seed).permutation(n)
    elif strategy == "as-given":
        perm = np.arange(n)
    else:
        raise DataError(f"unknown ordering strategy {strategy!r}; expected one of {ORDER_STRATEGIES}")
    return Ordering(perm, strategy, seed)


def _brute_past(scaled: np.ndarray, query: np.ndarray, past: int, k: int) -> np.ndarray:
    """Positions of the ``k`` nearest among positions ``0..past-1``.

    ``scaled`` is in sequence order.  Ties go to the smaller position.
    """
    d = _point_distances(scaled[:past], query)
    order = np.lexsort((np.arange(past), d))
    return order[: min(k, past)]


def nearest_past_neighbors(locs: LocationSet, ordering: Ordering, j: int, k: int) -> list[int]:
    """Original indices of the ``min(k, j)`` nearest points preceding position ``j``.

    Sorted by increasing distance; equal distances go to the earlier position.
    """
    if not 1 <= j <= locs.n - 1:
        raise DataError(f"hierarchy index j={j} outside 1..{locs.n - 1}")
    if k < 1:
        raise DataError("k must be >= 1")
    scaled = locs.scaled[ordering.perm]
    pos = _brute_past(scaled, scaled[j], j, k)
    return [int(i) for i in ordering.perm[pos]]


class PastNeighborIndex:
    """KD-tree accelerated search with the same contract as brute force.

    Works in sequence positions over ``scaled`` (points already in sequence
    order).  Each query pulls a generous candidate list from the tree, keeps
    the past ones and accepts the answer only when it is provably complete;
    otherwise it falls back to the exhaustive scan.
    """

    def __init__(self, scaled: np.ndarray):
        self.scaled = np.asarray(scaled, dtype=float)
        self.tree = cKDTree(self.scaled)

    def query(self, queries: np.ndarray, past: Sequence[int], k: int) -> list[np.ndarray]:
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        past = np.asarray(past, dtype=np.int64)
        n = self.scaled.shape[0]
        out: list[np.ndarray | None] = [None] * len(past)
        if len(past) == 0:
            return []
        kq = int(min(n, 2 * k + 16))
        dist, idx = self.tree.query(queries, k=kq)
        dist = dist.reshape(len(past), kq)
        idx = idx.reshape(len(past), kq)
        for row in range(len(past)):
            p = past[row]
            need = min(k, p)
            cand = idx[row][idx[row] < p]
            if kq < n and cand.size >= need:
                d = _point_distances(self.scaled[cand], queries[row])
                order = np.lexsort((cand, d))[:need]
                # complete iff every point not returned by the tree is farther
                if need == 0 or d[order[-1]] < dist[row, -1] * (1.0 - 1e-12):
                    out[row] = cand[order]
                    continue
            if kq >= n:
                d = _point_distances(self.scaled[cand], queries[row])
                out[row] = cand[np.lexsort((cand, d))[:need]]
                continue
            out[row] = _brute_past(self.scaled, queries[row], p, k)
        return out  # type: ignore[return-value]
