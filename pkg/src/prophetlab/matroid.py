"""Matroid oracles, polytope membership and greedy online contention resolution.

All matroids live on ``range(n)`` and take subsets as bitmasks.  Exhaustive
routines (rank tables, polytope checks, axiom verification) are capped at
``MAX_ENUM`` elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError, ProtocolError
from .setfn import (
    MAX_ENUM,
    TOL,
    ExplicitSetFunction,
    SetFunction,
    as_vector,
    from_mask,
    multilinear_exact,
    popcount,
    popcounts,
    submodularity_violation,
)


class Matroid:
    """Independence oracle on ``range(n)``."""

    kind: str = "abstract"
    n: int

    def is_independent(self, S: int) -> bool:
        raise NotImplementedError

    def rank(self, S: int) -> int:
        # greedy is exact for matroids
        acc = 0
        for e in from_mask(S):
            if self.is_independent(acc | 1 << e):
                acc |= 1 << e
        return popcount(acc)

    def _check(self, S: int) -> None:
        if not 0 <= S < 1 << self.n:
            raise DomainError(f"subset {S} is not a subset of the ground set of size {self.n}")

    @cached_property
    def independence_table(self) -> np.ndarray:
        if self.n > MAX_ENUM:
            raise CapacityError(f"ground set of size {self.n} exceeds {MAX_ENUM}")
        return np.array([self.is_independent(S) for S in range(1 << self.n)], dtype=bool)

    @cached_property
    def rank_table(self) -> np.ndarray:
        """rank[S] for every subset, by max over one-element deletions."""
        ind = self.independence_table
        n = self.n
        sizes = popcounts(n)
        rank = np.where(ind, sizes, 0)
        for S in range(1, 1 << n):
            if not ind[S]:
                best = 0
                for e in from_mask(S):
                    r = rank[S ^ (1 << e)]
                    if r > best:
                        best = r
                rank[S] = best
        return rank

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(eq=False)
class UniformMatroid(Matroid):
    n: int
    k: int
    kind = "uniform"

    def __post_init__(self):
        if self.k < 0:
            raise DomainError("uniform matroid needs k >= 0")

    def is_independent(self, S: int) -> bool:
        self._check(S)
        return popcount(S) <= self.k

    def rank(self, S: int) -> int:
        self._check(S)
        return min(popcount(S), self.k)

    def to_json(self) -> dict:
        return {"kind": "uniform", "n": self.n, "k": self.k}


def free_matroid(n: int) -> UniformMatroid:
    return UniformMatroid(n, n)


@dataclass(eq=False)
class PartitionMatroid(Matroid):
    """At most ``capacities[b]`` elements from each block ``blocks[b]``."""

    n: int
    blocks: tuple
    capacities: tuple
    kind = "partition"

    def __post_init__(self):
        self.blocks = tuple(tuple(int(e) for e in b) for b in self.blocks)
        self.capacities = tuple(int(c) for c in self.capacities)
        if len(self.blocks) != len(self.capacities) or min(self.capacities, default=0) < 0:
            raise DomainError("one non-negative capacity per block")
        seen = sorted(e for b in self.blocks for e in b)
        if seen != list(range(self.n)):
            raise DomainError("blocks must partition the ground set")
        self.block_masks = tuple(sum(1 << e for e in b) for b in self.blocks)
        self.block_of = {e: i for i, b in enumerate(self.blocks) for e in b}

    def is_independent(self, S: int) -> bool:
        self._check(S)
        return all(popcount(S & m) <= c for m, c in zip(self.block_masks, self.capacities))

    def rank(self, S: int) -> int:
        self._check(S)
        return sum(min(popcount(S & m), c) for m, c in zip(self.block_masks, self.capacities))

    def to_json(self) -> dict:
        return {"kind": "partition", "n": self.n, "blocks": [list(b) for b in self.blocks],
                "capacities": list(self.capacities)}


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, a):
        root = a
        while self.parent.get(root, root) != root:
            root = self.parent[root]
        while a != root:
            nxt = self.parent.get(a, a)
            self.parent[a] = root
            a = nxt
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


@dataclass(eq=False)
class GraphicMatroid(Matroid):
    """Edges of a multigraph; independent sets are forests."""

    edges: tuple
    kind = "graphic"

    def __post_init__(self):
        self.edges = tuple((e[0], e[1]) for e in self.edges)
        self.n = len(self.edges)

    def is_independent(self, S: int) -> bool:
        self._check(S)
        uf = _UnionFind()
        for e in from_mask(S):
            u, v = self.edges[e]
            if not uf.union(u, v):
                return False
        return True

    def rank(self, S: int) -> int:
        self._check(S)
        uf = _UnionFind()
        return sum(uf.union(*self.edges[e]) for e in from_mask(S))

    def to_json(self) -> dict:
        return {"kind": "graphic", "edges": [list(e) for e in self.edges]}


@dataclass(eq=False)
class ExplicitMatroid(Matroid):
    """Matroid given by its independent sets; the axioms are checked on construction."""

    n: int
    independent: frozenset
    validate: bool = True
    kind = "explicit"

    def __post_init__(self):
        self.independent = frozenset(int(S) for S in self.independent)
        if self.validate:
            if self.n > MAX_ENUM:
                raise CapacityError(f"cannot verify matroid axioms for n={self.n}")
            problem = matroid_axiom_violation(self.independence_table)
            if problem:
                raise DomainError(f"not a matroid: {problem}")

    @cached_property
    def independence_table(self) -> np.ndarray:
        if self.n > MAX_ENUM:
            raise CapacityError(f"ground set of size {self.n} exceeds {MAX_ENUM}")
        table = np.zeros(1 << self.n, dtype=bool)
        table[list(self.independent)] = True
        return table

    def is_independent(self, S: int) -> bool:
        self._check(S)
        return S in self.independent

    def rank(self, S: int) -> int:
        self._check(S)
        if self.n <= MAX_ENUM:
            return int(self.rank_table[S])
        return super().rank(S)

    def to_json(self) -> dict:
        return {"kind": "explicit", "n": self.n, "independent": sorted(self.independent)}


def matroid_axiom_violation(table: np.ndarray) -> str | None:
    """Describe why an independence table is not a matroid, or return None.

    Uses the characterisation: a downward-closed family containing the empty
    set is a matroid iff its rank function (largest independent subset) is
    submodular.
    """
    size = table.shape[0]
    n = size.bit_length() - 1
    if not table[0]:
        return "empty set is not independent"
    for S in np.flatnonzero(table):
        for e in from_mask(int(S)):
            if not table[int(S) ^ (1 << e)]:
                return f"not downward closed: {int(S)} independent but {int(S) ^ (1 << e)} is not"
    rank = popcounts(n) * table
    rank = rank.astype(float)
    for i in range(n):
        view = rank.reshape(-1, 2, 1 << i)
        np.maximum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    bad = submodularity_violation(ExplicitSetFunction(n, rank), tol=1e-12) if n >= 1 else None
    if bad is not None:
        return f"exchange axiom fails (rank not submodular at S={bad.S}, T={bad.T}, e={bad.e})"
    return None


def matroid_from_json(doc: dict) -> Matroid:
    kind = doc["kind"]
    if kind == "uniform":
        return UniformMatroid(int(doc["n"]), int(doc["k"]))
    if kind == "partition":
        return PartitionMatroid(int(doc["n"]), tuple(map(tuple, doc["blocks"])),
                                tuple(doc["capacities"]))
    if kind == "graphic":
        return GraphicMatroid(tuple(tuple(e) for e in doc["edges"]))
    if kind == "explicit":
        return ExplicitMatroid(int(doc["n"]), frozenset(doc["independent"]))
    raise DomainError(f"unknown matroid kind {kind!r}")


def is_independent(M: Matroid, S: int) -> bool:
    return M.is_independent(S)


def rank(M: Matroid, S: int) -> int:
    return M.rank(S)


def subset_sums(x: np.ndarray) -> np.ndarray:
    """x(S) for every subset S in bitmask order."""
    out = np.zeros(1)
    for xi in x:
        out = np.concatenate((out, out + xi))
    return out


def polytope_slack(M: Matroid, x: Sequence[float]) -> float:
    """max over S of x(S) - rank(S); non-positive iff x is in the polytope."""
    if M.n > MAX_ENUM:
        raise CapacityError(f"polytope check needs n <= {MAX_ENUM}")
    x = as_vector(x, M.n)
    return float(np.max(subset_sums(x) - M.rank_table))


def in_polytope(M: Matroid, x: Sequence[float], tol: float = TOL) -> bool:
    return polytope_slack(M, x) <= tol


def max_polytope_scale(M: Matroid, x: Sequence[float]) -> float:
    """Largest c in [0, 1] with c * x in the polytope of M."""
    if M.n > MAX_ENUM:
        raise CapacityError(f"polytope check needs n <= {MAX_ENUM}")
    x = as_vector(x, M.n)
    sums = subset_sums(x)
    pos = sums > 0
    if not np.any(pos):
        return 1.0
    return float(min(1.0, np.min(M.rank_table[pos] / sums[pos])))


# ---------------------------------------------------------------------------
# greedy OCRS


class OcrsState:
    """One run of a greedy online contention resolution scheme.

    The feasible family is fixed when the state is created; each element is
    offered once and is accepted iff it is active and the accepted set plus
    the element stays in the family.  For every matroid kind the family used
    here is the family of independent sets, which makes the rule greedy and
    keeps the accepted set independent; for uniform and partition matroids
    it reduces to counting.
    """

    def __init__(self, matroid: Matroid, x: Sequence[float], check: bool = True):
        x = as_vector(x, matroid.n)
        if check and matroid.n <= MAX_ENUM and not in_polytope(matroid, x):
            raise DomainError("OCRS input must lie in the matroid polytope")
        self.matroid = matroid
        self.vector = x
        self.accepted = 0
        self.offered = 0
        if isinstance(matroid, UniformMatroid):
            self.rule = "uniform"
        elif isinstance(matroid, PartitionMatroid):
            self.rule = "partition"
            self._counts = [0] * len(matroid.blocks)
        else:
            self.rule = "independent"
            self._table = matroid.independence_table if matroid.n <= MAX_ENUM else None

    def feasible(self, S: int) -> bool:
        """Membership in the scheme's downward-closed family."""
        if self._table_rule():
            return bool(self._table[S])
        return self.matroid.is_independent(S)

    def _table_rule(self) -> bool:
        return self.rule == "independent" and self._table is not None

    def _can_add(self, e: int) -> bool:
        if self.rule == "uniform":
            return popcount(self.accepted) < self.matroid.k
        if self.rule == "partition":
            b = self.matroid.block_of[e]
            return self._counts[b] < self.matroid.capacities[b]
        return self.feasible(self.accepted | 1 << e)

    def offer(self, e: int, active: bool) -> bool:
        if not 0 <= e < self.matroid.n:
            raise DomainError(f"element {e} outside the ground set")
        if self.offered >> e & 1:
            raise ProtocolError(f"element {e} was already offered")
        self.offered |= 1 << e
        if not active or not self._can_add(e):
            return False
        self.accepted |= 1 << e
        if self.rule == "partition":
            self._counts[self.matroid.block_of[e]] += 1
        return True


def ocrs_new(M: Matroid, x: Sequence[float]) -> OcrsState:
    return OcrsState(M, x)


def ocrs_offer(state: OcrsState, e: int, active: bool) -> bool:
    return state.offer(e, active)


def run_ocrs(M: Matroid, x: Sequence[float], active: int, order: Sequence[int]) -> int:
    """Offer every element in ``order``; return the accepted bitmask."""
    state = OcrsState(M, x, check=False)
    for e in order:
        state.offer(int(e), bool(active >> int(e) & 1))
    return state.accepted


@dataclass(frozen=True)
class Selectability:
    """Per-element empirical Pr[accepted | active] with 95% half-widths."""

    rate: np.ndarray
    ci95: np.ndarray
    active_counts: np.ndarray
    trials: int

    def lower(self, k: float = 1.0) -> np.ndarray:
        return self.rate - k * self.ci95


def _sample_active(rng, x: np.ndarray, trials: int) -> np.ndarray:
    weights = 1 << np.arange(len(x), dtype=np.int64)
    return (rng.random((trials, len(x))) < x) @ weights


def selectability_estimate(M: Matroid, x: Sequence[float], trials: int, seed=None) -> Selectability:
    """Empirical selectability under independent activation and random arrival order."""
    if trials < 10_000:
        raise DomainError("selectability estimates need at least 10^4 trials")
    x = as_vector(x, M.n)
    if M.n <= MAX_ENUM and not in_polytope(M, x):
        raise DomainError("x must lie in the matroid polytope")
    rng = np.random.default_rng(seed)
    n = M.n
    actives = _sample_active(rng, x, trials)
    active_counts = np.zeros(n)
    accept_counts = np.zeros(n)
    for S in actives:
        S = int(S)
        if not S:
            continue
        order = rng.permutation(n)
        acc = run_ocrs(M, x, S, order)
        for e in from_mask(S):
            active_counts[e] += 1
            accept_counts[e] += acc >> e & 1
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = accept_counts / active_counts
        ci = 1.96 * np.sqrt(rate * (1 - rate) / active_counts)
    rate[active_counts == 0] = np.nan
    ci[active_counts == 0] = np.nan
    return Selectability(rate, ci, active_counts, trials)


def ocrs_half_value(M: Matroid, f: SetFunction, x: Sequence[float], trials: int, seed=None):
    """Estimate E[F(1_T / 2)] over OCRS outputs T, with a 95% half-width.

    F(1_T/2) is evaluated exactly for each sampled T.
    """
    x = as_vector(x, M.n)
    f = f.to_explicit()
    rng = np.random.default_rng(seed)
    n = M.n
    halves = np.empty(1 << n)
    halves[:] = np.nan
    samples = np.empty(trials)
    for t, S in enumerate(_sample_active(rng, x, trials)):
        T = run_ocrs(M, x, int(S), rng.permutation(n))
        if math.isnan(halves[T]):
            halves[T] = multilinear_exact(f, [0.5 if T >> i & 1 else 0.0 for i in range(n)])
        samples[t] = halves[T]
    mean = float(samples.mean())
    ci = 1.96 * float(samples.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    return mean, ci
