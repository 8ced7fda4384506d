"""Submodular prophet inequality over a matroid of days.

Each day ``i`` reveals one element ``X_i`` of its universe ``U_i`` drawn from
a known prior.  The online algorithm keeps a set of days ``W`` that must stay
independent in the day matroid and earns ``f({X_i : i in W})``.

The algorithm runs a greedy OCRS on the element-level matroid with input
vector ``y <= x/2``.  On day ``i`` it feeds the OCRS a random set ``T_i`` of
that day's elements, coupled with the realised element so that ``T_i`` has
exactly the product law of ``y`` restricted to the day, and it keeps ``X_i``
only when ``T_i = {X_i}`` and the OCRS accepts it.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CapacityError, DomainError, PreconditionError
from .matroid import (
    ExplicitMatroid,
    Matroid,
    OcrsState,
    matroid_from_json,
    max_polytope_scale,
)
from .setfn import (
    MAX_ENUM,
    ExplicitSetFunction,
    SetFunction,
    from_mask,
    is_submodular,
    multilinear_exact,
    product_weights,
    setfn_from_json,
)

PRIOR_TOL = 1e-9
MAX_DAY_SIZE = 12


@dataclass(frozen=True, eq=False)
class ProphetInstance:
    """Days with disjoint element universes, priors, objective and day matroid.

    ``universes[i]`` lists the global element ids of day ``i`` (in the fixed
    per-day offer order); the union must be ``range(n_elements)``.
    ``priors[i][k]`` is the probability that element ``universes[i][k]``
    arrives on day ``i``.
    """

    universes: tuple
    priors: tuple
    objective: SetFunction
    day_matroid: Matroid
    verify: bool = True

    def __post_init__(self):
        universes = tuple(tuple(int(e) for e in u) for u in self.universes)
        priors = tuple(tuple(float(p) for p in d) for d in self.priors)
        object.__setattr__(self, "universes", universes)
        object.__setattr__(self, "priors", priors)
        if len(universes) != len(priors) or not universes:
            raise DomainError("need one prior per day and at least one day")
        if self.day_matroid.n != len(universes):
            raise DomainError("day matroid must be over the days")
        flat = sorted(e for u in universes for e in u)
        if flat != list(range(len(flat))):
            raise DomainError("universes must be disjoint and cover range(|U|)")
        if self.objective.n != len(flat):
            raise DomainError("objective must be defined over the union of universes")
        for u, d in zip(universes, priors):
            if len(u) != len(d) or not u:
                raise DomainError("each day needs a non-empty universe and a matching prior")
            if len(u) > MAX_DAY_SIZE:
                raise CapacityError(f"day universes are capped at {MAX_DAY_SIZE} elements")
            if min(d) < 0 or abs(sum(d) - 1.0) > PRIOR_TOL:
                raise DomainError(f"prior {d} is not a probability vector")
        if self.verify and self.n_elements <= MAX_ENUM and not is_submodular(self.objective):
            raise DomainError("objective is not submodular")

    @property
    def days(self) -> int:
        return len(self.universes)

    @property
    def n_elements(self) -> int:
        return sum(len(u) for u in self.universes)

    @cached_property
    def day_of(self) -> tuple:
        out = [0] * self.n_elements
        for i, u in enumerate(self.universes):
            for e in u:
                out[e] = i
        return tuple(out)

    @cached_property
    def x(self) -> np.ndarray:
        """Arrival probability of every element."""
        out = np.zeros(self.n_elements)
        for u, d in zip(self.universes, self.priors):
            out[list(u)] = d
        return out

    @cached_property
    def table(self) -> ExplicitSetFunction | None:
        if self.n_elements <= 20:
            return self.objective.to_explicit() if self.n_elements <= MAX_ENUM else None
        return None

    def value(self, mask: int) -> float:
        if self.table is not None:
            return float(self.table.values[mask])
        return self.objective.value(mask)

    def to_json(self) -> dict:
        return {
            "days": self.days,
            "universes": [list(u) for u in self.universes],
            "priors": [list(d) for d in self.priors],
            "objective": self.objective.to_json(),
            "matroid": self.day_matroid.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict, verify: bool = True) -> "ProphetInstance":
        if len(doc["universes"]) != int(doc["days"]):
            raise DomainError("'days' disagrees with the number of universes")
        return cls(tuple(map(tuple, doc["universes"])), tuple(map(tuple, doc["priors"])),
                   setfn_from_json(doc["objective"]), matroid_from_json(doc["matroid"]), verify)


@dataclass(eq=False)
class InducedMatroid(Matroid):
    """Element-level matroid: at most one element per day, touched days independent.

    Elements of the same day are parallel copies of that day, so
    ``rank(S) = day_rank(days touched by S)``.
    """

    day_matroid: Matroid
    day_of: tuple
    kind = "induced"

    def __post_init__(self):
        self.n = len(self.day_of)

    def _days(self, S: int) -> tuple[int, bool]:
        days = 0
        for e in from_mask(S):
            bit = 1 << self.day_of[e]
            if days & bit:
                return days, False
            days |= bit
        return days, True

    def is_independent(self, S: int) -> bool:
        self._check(S)
        days, single = self._days(S)
        return single and self.day_matroid.is_independent(days)

    def rank(self, S: int) -> int:
        self._check(S)
        days = 0
        for e in from_mask(S):
            days |= 1 << self.day_of[e]
        return self.day_matroid.rank(days)

    def to_explicit(self) -> ExplicitMatroid:
        if self.n > MAX_ENUM:
            raise CapacityError(f"explicit induced matroid needs |U| <= {MAX_ENUM}")
        table = self.independence_table
        return ExplicitMatroid(self.n, frozenset(int(S) for S in np.flatnonzero(table)))

    def to_json(self) -> dict:
        return {"kind": "induced", "day_of": list(self.day_of), "day_matroid": self.day_matroid.to_json()}


def induced_matroid(instance: ProphetInstance) -> InducedMatroid:
    return InducedMatroid(instance.day_matroid, instance.day_of)


def feasible_scale(instance: ProphetInstance) -> float:
    """Largest c in [0, 1] such that c * x / 2 lies in the induced matroid polytope.

    Parallel classes make the element polytope the preimage of the day
    polytope under per-day summation, and each day's prior sums to 1, so the
    test reduces to the all-halves vector on the day matroid.
    """
    return max_polytope_scale(instance.day_matroid, np.full(instance.days, 0.5))


def feasible_vector(instance: ProphetInstance) -> np.ndarray:
    return feasible_scale(instance) * instance.x / 2


@dataclass(frozen=True)
class CouplingDay:
    day: int
    realized: int
    fed: int
    singleton: bool

    def __post_init__(self):
        if self.singleton and self.fed != 1 << self.realized:
            raise DomainError("a singleton feed must be exactly the realized element")


class DayCoupler:
    """Coupling between one day's realised element and the set fed to the OCRS.

    Works on local positions ``0..k-1`` of the day's universe.  Given the
    realised position ``j`` it returns ``{j}`` with probability
    ``P_y({j}) / x_j``, and otherwise a draw from the product law of ``y``
    conditioned on not being a singleton.
    """

    def __init__(self, x: Sequence[float], y: Sequence[float]):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape:
            raise DomainError("x and y must have the same length")
        if np.any(y < 0) or np.any(y > x + 1e-12):
            raise PreconditionError("coupling needs 0 <= y <= x coordinatewise")
        k = len(x)
        self.k = k
        self.x = x
        self.y = y
        law = product_weights(y)
        self.law = law
        single = np.array([law[1 << j] for j in range(k)])
        with np.errstate(invalid="ignore", divide="ignore"):
            feed = np.where(x > 0, single / np.where(x > 0, x, 1.0), 0.0)
        if np.any(feed > 1 + 1e-12):
            raise PreconditionError("P_y({j}) exceeds x_j; shrink y")
        self.single = single
        self.feed = np.minimum(feed, 1.0)
        rest = law.copy()
        rest[[1 << j for j in range(k)]] = 0.0
        self.rest_masks = np.flatnonzero(rest > 0)
        weights = rest[self.rest_masks]
        self.rest_cdf = np.cumsum(weights) / weights.sum()
        self.rest_cdf[-1] = 1.0
        self._rest_cdf_list = self.rest_cdf.tolist()
        self._rest_list = self.rest_masks.tolist()

    def sample(self, j: int, rng) -> tuple[int, bool]:
        if rng.random() < self.feed[j]:
            return 1 << j, True
        u = rng.random()
        return self._rest_list[bisect.bisect_right(self._rest_cdf_list, u)], False

    def sample_batch(self, realized: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
        realized = np.asarray(realized, dtype=np.int64)
        singleton = rng.random(realized.shape) < self.feed[realized]
        draws = self.rest_masks[np.searchsorted(self.rest_cdf, rng.random(realized.shape), side="right")]
        return np.where(singleton, np.left_shift(1, realized), draws), singleton

    def target_law(self) -> np.ndarray:
        return self.law

    def conditional_singleton(self) -> np.ndarray:
        """Pr[T = {j} | j in T] under the product law of y."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.y > 0, self.single / self.y, np.nan)


def couple_day(day: int, realized: int, x: Sequence[float], y: Sequence[float], rng,
               elements: Sequence[int] | None = None) -> CouplingDay:
    """Draw the set fed to the OCRS on one day (local positions unless ``elements``)."""
    rng = np.random.default_rng(rng)
    coupler = DayCoupler(x, y)
    fed, single = coupler.sample(realized, rng)
    if elements is not None:
        fed = sum(1 << elements[j] for j in from_mask(fed))
        realized = elements[realized]
    return CouplingDay(day, realized, fed, single)


@dataclass(frozen=True)
class ProphetRun:
    W: int
    X_W: int
    value: float
    S_ocrs: int
    T_alg: int
    realized: tuple

    def __post_init__(self):
        if self.T_alg & ~self.S_ocrs or self.X_W != self.T_alg:
            raise DomainError("inconsistent prophet run record")


class ProphetSimulator:
    """Precomputed couplers and matroid data for repeated runs of one instance."""

    def __init__(self, instance: ProphetInstance, y: Sequence[float] | None = None):
        self.instance = instance
        self.matroid = induced_matroid(instance)
        self.y = feasible_vector(instance) if y is None else np.asarray(y, dtype=float)
        if np.any(self.y > instance.x / 2 + 1e-12):
            raise PreconditionError("y must satisfy y <= x/2")
        self.couplers = []
        self.prior_cdfs = []
        for u, d in zip(instance.universes, instance.priors):
            idx = list(u)
            self.couplers.append(DayCoupler(instance.x[idx], self.y[idx]))
            cdf = np.cumsum(d)
            cdf[-1] = 1.0
            self.prior_cdfs.append(cdf.tolist())

    def run(self, order: Sequence[int] | None = None, rng=None) -> ProphetRun:
        inst = self.instance
        rng = np.random.default_rng(rng)
        order = range(inst.days) if order is None else order
        if sorted(order) != list(range(inst.days)):
            raise DomainError("arrival order must be a permutation of the days")
        state = OcrsState(self.matroid, self.y, check=False)
        W = kept = 0
        realized = [None] * inst.days
        for i in order:
            u = inst.universes[i]
            j = bisect.bisect_right(self.prior_cdfs[i], rng.random())
            j = min(j, len(u) - 1)
            realized[i] = u[j]
            fed, single = self.couplers[i].sample(j, rng)
            taken = False
            for pos, e in enumerate(u):
                acc = state.offer(e, bool(fed >> pos & 1))
                if acc and single and pos == j:
                    taken = True
            if taken:
                W |= 1 << i
                kept |= 1 << u[j]
        if not inst.day_matroid.is_independent(W):
            raise AssertionError(f"selected days {W} are dependent in the day matroid")
        return ProphetRun(W, kept, inst.value(kept), state.accepted, kept, tuple(realized))


def run_prophet(instance: ProphetInstance, arrival_order: Sequence[int] | None = None,
                seed=None) -> ProphetRun:
    return ProphetSimulator(instance).run(arrival_order, seed)


def offline_opt(instance: ProphetInstance, max_work: int = 20_000_000) -> float:
    """Expected offline optimum: E_X[max over independent W of f({X_i : i in W})]."""
    n = instance.days
    if n > MAX_ENUM:
        raise CapacityError(f"offline optimum needs at most {MAX_ENUM} days")
    supports = [[(e, p) for e, p in zip(u, d) if p > 0] for u, d in zip(instance.universes, instance.priors)]
    realizations = math.prod(len(s) for s in supports)
    indep = np.flatnonzero(instance.day_matroid.independence_table)
    if realizations * len(indep) > max_work:
        raise CapacityError("offline optimum enumeration exceeds the work cap")
    member = ((indep[:, None] >> np.arange(n)) & 1).astype(np.int64)
    table = instance.table
    cache: dict[int, float] = {}
    total = 0.0
    for combo in itertools.product(*supports):
        prob = math.prod(p for _, p in combo)
        bits = np.array([1 << e for e, _ in combo], dtype=np.int64)
        masks = member @ bits
        if table is not None:
            best = float(table.values[masks].max())
        else:
            best = 0.0
            for m in masks.tolist():
                v = cache.get(m)
                if v is None:
                    v = cache[m] = instance.objective.value(m)
                best = max(best, v)
        total += prob * best
    return total


def chain_bound(instance: ProphetInstance, y: Sequence[float] | None = None) -> float:
    """F(y) / 32: the value the subset bound and the OCRS bound jointly promise."""
    y = feasible_vector(instance) if y is None else y
    return multilinear_exact(instance.objective, y) / 32
