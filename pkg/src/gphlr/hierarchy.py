"""Conditioning plans for the hierarchical likelihood approximations.

A plan splits the ordered observations into target blocks and, for each
block, records which past observations it conditions on and how:

* ``IND``   - blocks of ``r`` consecutive observations, no conditioning.
* ``NN``    - the ``r`` nearest past neighbors.
* ``SUM``   - ``r`` sums of ``m`` consecutive nearest neighbors.
* ``NNSUM`` - ``r1`` nearest neighbors followed by ``r - r1`` sums of ``m``.
* ``HLR``   - the ``m r`` nearest neighbors with their covariance replaced by
  a rank-``r`` eigen approximation plus a nugget.

Early blocks whose past is smaller than the scheme needs condition exactly
on the whole past.  Everything here works in sequence positions, i.e. on the
locations already permuted by the ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .geo import LocationSet, Ordering, PastNeighborIndex
from .linalg import batched_chol_solve, batched_smw_apply, chol_factor, chol_solve, smw_apply, sym_eigen

KINDS = ("IND", "NN", "SUM", "NNSUM", "HLR")

# step modes
MARGINAL = "marginal"
EXACT = "exact"
SELECTOR = "selector"
LOWRANK = "hlr"


@dataclass(frozen=True)
class ConditioningScheme:
    kind: str
    rank: int
    m: int = 2
    r1: int | None = None
    block: int = 1

    def __post_init__(self):
        kind = str(self.kind).upper()
        if kind not in KINDS:
            raise DataError(f"unknown scheme {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.rank < 1:
            raise DataError("rank must be >= 1")
        if self.m < 2:
            raise DataError("group size m must be >= 2")
        if self.block < 1:
            raise DataError("block size must be >= 1")
        r1 = self.r1
        if kind == "NNSUM":
            r1 = math.ceil(self.rank / 2) if r1 is None else r1
            if not 1 <= r1 <= self.rank:
                raise DataError(f"r1 must lie in 1..{self.rank}, got {r1}")
        object.__setattr__(self, "r1", r1)

    @property
    def required(self) -> int:
        """Number of past neighbors a full (non-truncated) step uses."""
        r = self.rank
        if self.kind == "NN":
            return r
        if self.kind == "NNSUM":
            return self.r1 + self.m * (r - self.r1)
        if self.kind in ("SUM", "HLR"):
            return self.m * r
        return 0

    @property
    def target_size(self) -> int:
        return self.rank if self.kind == "IND" else self.block

    def describe(self) -> str:
        s = f"{self.kind}(r={self.rank}"
        if self.kind in ("SUM", "NNSUM", "HLR"):
            s += f",m={self.m}"
        if self.kind == "NNSUM":
            s += f",r1={self.r1}"
        if self.kind != "IND" and self.block != 1:
            s += f",b={self.block}"
        return s + ")"


@dataclass(frozen=True)
class Selector:
    """Columns of the selector matrix as index groups with unit coefficients."""

    columns: tuple[tuple[int, ...], ...]

    @property
    def footprint(self) -> tuple[int, ...]:
        return tuple(i for col in self.columns for i in col)

    @property
    def coefficients(self) -> tuple[tuple[float, ...], ...]:
        return tuple((1.0,) * len(col) for col in self.columns)

    def matrix(self, footprint=None) -> np.ndarray:
        """Dense selector over ``footprint`` (defaults to :attr:`footprint`)."""
        footprint = list(self.footprint if footprint is None else footprint)
        row = {idx: i for i, idx in enumerate(footprint)}
        a = np.zeros((len(footprint), len(self.columns)))
        for c, col in enumerate(self.columns):
            for idx in col:
                a[row[idx], c] = 1.0
        return a


def build_selector(scheme: ConditioningScheme, neighbors) -> Selector:
    """Selector for NN / SUM / NNSUM from distance-ascending past neighbors.

    With fewer neighbors than the scheme needs, every neighbor becomes its
    own column (exact conditioning on the full past).
    """
    nb = [int(i) for i in neighbors]
    if scheme.kind == "IND":
        return Selector(())
    if scheme.kind == "HLR":
        raise DataError("HLR steps use a low-rank factor, not a selector")
    if len(nb) < scheme.required:
        return Selector(tuple((i,) for i in nb))
    r, m = scheme.rank, scheme.m
    if scheme.kind == "NN":
        return Selector(tuple((i,) for i in nb[:r]))
    singles = 0 if scheme.kind == "SUM" else scheme.r1
    cols = [(i,) for i in nb[:singles]]
    rest = nb[singles : singles + m * (r - singles)]
    cols += [tuple(rest[g * m : (g + 1) * m]) for g in range(r - singles)]
    return Selector(tuple(cols))


@dataclass(frozen=True)
class LowRankFactor:
    """``P diag(L) P^T + eps2 I`` approximating an ``mr x mr`` covariance."""

    P: np.ndarray
    L: np.ndarray
    eps2: float
    eigenvalues: np.ndarray = field(repr=False)
    footprint: tuple[int, ...] | None = None

    @property
    def premise_bound(self) -> float:
        """``(lambda_r + lambda_mr) / 2``; eps2 must stay strictly below it."""
        r = self.L.size
        return 0.5 * (self.eigenvalues[r - 1] + self.eigenvalues[-1])

    def dense(self) -> np.ndarray:
        return (self.P * self.L) @ self.P.T + self.eps2 * np.eye(self.P.shape[0])


def hlr_nugget(eigenvalues, r: int) -> np.ndarray:
    """Nugget for the low-rank factor from descending eigenvalues.

    The mean of the discarded eigenvalues, pulled just below
    ``(lambda_r + lambda_mr) / 2`` when it would reach it, and
    ``1e-8 * lambda_1`` when the discarded tail is numerically zero.
    """
    vals = np.atleast_2d(np.asarray(eigenvalues, dtype=float))
    tail = vals[:, r:].mean(axis=1)
    bound = 0.5 * (vals[:, r - 1] + vals[:, -1])
    eps2 = np.where(tail >= bound, (1.0 - 1e-3) * bound, tail)
    eps2 = np.where(tail <= 0.0, 1e-8 * vals[:, 0], eps2)
    return eps2 if np.ndim(eigenvalues) > 1 else eps2[0]


def build_hlr_factor(m, r: int, footprint=None) -> LowRankFactor:
    m = np.asarray(m, dtype=float)
    if not 1 <= r < m.shape[0]:
        raise DataError(f"rank {r} must be in 1..{m.shape[0] - 1}")
    vals, vecs = sym_eigen(m)
    eps2 = float(hlr_nugget(vals, r))
    return LowRankFactor(vecs[:, :r].copy(), vals[:r].copy(), eps2, vals, None if footprint is None else tuple(footprint))


def approx_weights(structure, sigma_sub, sigma_cross) -> np.ndarray:
    """Weights on the footprint approximating ``Sigma_sub^{-1} sigma_cross``.

    ``structure`` is a :class:`Selector` (rows of ``sigma_sub`` follow its
    footprint), a :class:`LowRankFactor`, or ``None`` for the exact solve.
    """
    s = np.asarray(sigma_sub, dtype=float)
    c = np.asarray(sigma_cross, dtype=float)
    if s.shape[0] != c.shape[0]:
        raise DataError("conditioning covariance and cross covariance disagree in size")
    if s.shape[0] == 0:
        return np.zeros(c.shape)
    if structure is None:
        return chol_solve(chol_factor(s), c)
    if isinstance(structure, LowRankFactor):
        return smw_apply(structure.P, structure.L, structure.eps2, c)
    a = structure.matrix()
    if a.shape[0] != s.shape[0]:
        raise DataError("selector footprint does not match covariance size")
    if a.shape[1] == 0:
        return np.zeros(c.shape)
    return a @ chol_solve(chol_factor(a.T @ s @ a), a.T @ c)


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    index: int
    targets: np.ndarray
    footprint: np.ndarray
    past: int
    mode: str


@dataclass
class StepGroup:
    """Steps sharing mode and shapes, evaluated together.

    ``dist`` holds, per step, the distance matrix over footprint followed by
    targets.
    """

    mode: str
    steps: np.ndarray
    targets: np.ndarray
    footprints: np.ndarray
    dist: np.ndarray
    selector: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.footprints.shape[1]

    @property
    def b(self) -> int:
        return self.targets.shape[1]


class HierarchyPlan:
    """Immutable conditioning plan over a sequence-ordered location set."""

    def __init__(self, locs: LocationSet, ordering: Ordering, scheme: ConditioningScheme, steps: list[Step]):
        self.locs = locs
        self.ordering = ordering
        self.scheme = scheme
        self.steps = steps
        self.groups = _group_steps(locs.scaled, scheme, steps)
        self.degenerate = all(
            s.mode in (MARGINAL, EXACT) or (scheme.kind == "NN" and s.footprint.size == s.past) for s in steps
        )

    @property
    def n(self) -> int:
        return self.locs.n

    def __len__(self):
        return len(self.steps)


def build_plan(locs: LocationSet, ordering: Ordering | None, scheme: ConditioningScheme) -> HierarchyPlan:
    """Split the ordered observations into steps and pick each step's conditioning set.

    ``locs`` is in original order; the returned plan stores the locations in
    sequence order and all indices as sequence positions.
    """
    if locs.n < 2:
        raise DataError("a plan needs at least two observations")
    ordering = ordering or Ordering.identity(locs.n)
    seq = locs.reordered(ordering)
    n = seq.n
    b = scheme.target_size
    starts = np.arange(0, n, b)
    steps: list[Step] = []
    need = scheme.required
    search = [i for i, s in enumerate(starts) if scheme.kind != "IND" and s >= need and s > 0]
    found = {}
    if search:
        index = PastNeighborIndex(seq.scaled)
        queries = np.array([seq.scaled[starts[i] : starts[i] + b].mean(axis=0) for i in search])
        for i, nb in zip(search, index.query(queries, starts[search], need)):
            found[i] = nb
    empty = np.zeros(0, dtype=np.int64)
    for i, s in enumerate(starts):
        targets = np.arange(s, min(n, s + b))
        if scheme.kind == "IND" or s == 0:
            steps.append(Step(i, targets, empty, int(s), MARGINAL))
        elif i not in found:
            steps.append(Step(i, targets, np.arange(s), int(s), EXACT))
        else:
            mode = LOWRANK if scheme.kind == "HLR" else SELECTOR
            steps.append(Step(i, targets, np.asarray(found[i], dtype=np.int64), int(s), mode))
    return HierarchyPlan(seq, ordering, scheme, steps)


plan = build_plan


def _group_steps(scaled: np.ndarray, scheme: ConditioningScheme, steps: list[Step]) -> list[StepGroup]:
    buckets: dict[tuple, list[Step]] = {}
    for st in steps:
        buckets.setdefault((st.mode, st.targets.size, st.footprint.size), []).append(st)
    groups = []
    for (mode, b, k), members in buckets.items():
        targets = np.array([s.targets for s in members], dtype=np.int64).reshape(len(members), b)
        foot = np.array([s.footprint for s in members], dtype=np.int64).reshape(len(members), k)
        idx = np.concatenate([foot, targets], axis=1)
        pts = scaled[idx]
        diff = pts[:, :, None, :] - pts[:, None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        sel = None
        if mode == SELECTOR:
            sel = build_selector(scheme, range(k)).matrix(range(k))
        groups.append(
            StepGroup(mode, np.array([s.index for s in members], dtype=np.int64), targets, foot, dist, sel)
        )
    return groups


def group_weights(group: StepGroup, cov: np.ndarray, rank: int) -> np.ndarray:
    """Batched conditioning weights ``(g, k, b)`` for one step group.

    ``cov`` is the covariance tensor matching ``group.dist``.
    """
    k = group.k
    s = cov[:, :k, :k]
    c = cov[:, :k, k:]
    if group.mode == MARGINAL or k == 0:
        return np.zeros(c.shape)
    if group.mode == EXACT:
        return batched_chol_solve(s, c, group.steps)
    if group.mode == SELECTOR:
        a = group.selector
        ata = a.T @ s @ a
        return a @ batched_chol_solve(ata, a.T @ c, group.steps)
    vals, vecs = sym_eigen(s)
    eps2 = hlr_nugget(vals, rank)
    return batched_smw_apply(vecs[:, :, :rank], vals[:, :rank], eps2, c)
