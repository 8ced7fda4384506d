"""Monotone subadditive secretary over a downward-closed family.

Pipeline for one random arrival order:

1. run the classic secretary rule on the first half using singleton values
   and record the largest singleton value ``M`` seen there;
2. draw a price ``alpha`` from the grid ``M / 2**t``;
3. on the second half run a {0,1}-valued downward-closed secretary routine
   against the priced family: sets feasible in the base family whose every
   non-empty subset is worth at least ``alpha`` per item.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError, DomainError, ProtocolError
from .setfn import (
    MAX_ENUM,
    MAX_ORACLE,
    SetFunction,
    is_monotone,
    is_subadditive,
    popcount,
    setfn_from_json,
    submasks,
)

PRICE_TOL = 1e-9
MAX_PRICED = 20


@dataclass(frozen=True, eq=False)
class DownwardClosedFamily:
    """Downward closure of a list of maximal feasible sets (bitmasks)."""

    n: int
    maximal: tuple

    def __post_init__(self):
        if not 1 <= self.n <= MAX_ORACLE:
            raise CapacityError(f"families support 1 <= n <= {MAX_ORACLE}")
        sets = sorted({int(m) for m in self.maximal}, key=lambda m: (-popcount(m), m))
        if any(m < 0 or m >> self.n for m in sets):
            raise DomainError("maximal sets must be subsets of the ground set")
        kept = []
        for m in sets:
            if not any(m & ~k == 0 for k in kept):
                kept.append(m)
        object.__setattr__(self, "maximal", tuple(kept) if kept else (0,))

    def __contains__(self, T: int) -> bool:
        return any(T & ~m == 0 for m in self.maximal)

    @property
    def r(self) -> int:
        return max(popcount(m) for m in self.maximal)

    def members(self) -> set[int]:
        work = sum(1 << popcount(m) for m in self.maximal)
        if work > 1_000_000:
            raise CapacityError("family too large to enumerate")
        out = set()
        for m in self.maximal:
            out.update(submasks(m))
        return out


@dataclass(frozen=True, eq=False)
class SecretaryInstance:
    valuation: SetFunction
    family: DownwardClosedFamily
    verify: bool = True

    def __post_init__(self):
        if self.valuation.n != self.family.n:
            raise DomainError("valuation and family must share the ground set")
        if self.verify and self.n <= MAX_ENUM:
            if not is_monotone(self.valuation):
                raise DomainError("valuation is not monotone")
            if self.n <= 10 and not is_subadditive(self.valuation):
                raise DomainError("valuation is not subadditive")

    @property
    def n(self) -> int:
        return self.family.n

    @property
    def r(self) -> int:
        return self.family.r

    def to_json(self) -> dict:
        return {"n": self.n, "valuation": self.valuation.to_json(),
                "maximal_sets": list(self.family.maximal)}

    @classmethod
    def from_json(cls, doc: dict, verify: bool = True) -> "SecretaryInstance":
        n = int(doc["n"])
        return cls(setfn_from_json(doc["valuation"]), DownwardClosedFamily(n, tuple(doc["maximal_sets"])),
                   verify)


def best_uniform_price(f: SetFunction, T: int) -> float:
    """min over non-empty S subset of T of f(S)/|S|, by enumeration."""
    if T == 0:
        raise DomainError("the uniform price of the empty set is undefined")
    if popcount(T) > MAX_PRICED:
        raise CapacityError(f"price computation is capped at |T| <= {MAX_PRICED}")
    return min(f.value(S) / popcount(S) for S in submasks(T) if S)


class PricedFamily:
    """Members of ``family`` whose every non-empty subset is worth alpha per item.

    Minimum per-item prices are memoised through the recursion
    ``price(T) = min(f(T)/|T|, min_e price(T - e))``, so repeated
    queries along a growing chain stay cheap.
    """

    def __init__(self, family: DownwardClosedFamily, f: SetFunction, alpha: float):
        if alpha < 0:
            raise DomainError("price must be non-negative")
        self.family = family
        self.f = f
        self.alpha = float(alpha)
        self._price: dict[int, float] = {}
        self._value: dict[int, float] = {}

    def value(self, S: int) -> float:
        v = self._value.get(S)
        if v is None:
            v = self._value[S] = self.f.value(S)
        return v

    def min_price(self, T: int) -> float:
        if T == 0:
            return math.inf
        p = self._price.get(T)
        if p is not None:
            return p
        if popcount(T) > MAX_PRICED:
            raise CapacityError(f"price computation is capped at |T| <= {MAX_PRICED}")
        p = self.value(T) / popcount(T)
        rest = T
        while rest:
            low = rest & -rest
            rest ^= low
            sub = T ^ low
            if sub:
                p = min(p, self.min_price(sub))
        self._price[T] = p
        return p

    def __contains__(self, T: int) -> bool:
        if T not in self.family:
            return False
        if self.alpha == 0:
            return True
        return self.min_price(T) >= self.alpha - PRICE_TOL


def priced_member(pf: PricedFamily, T: int) -> bool:
    return T in pf


def priced_member_bruteforce(family: DownwardClosedFamily, f: SetFunction, alpha: float, T: int) -> bool:
    if T not in family:
        return False
    return T == 0 or best_uniform_price(f, T) >= alpha - PRICE_TOL


@dataclass(frozen=True)
class PricePhase:
    selected: int | None
    M: float
    observe: int
    end: int


def phase_bounds(n: int) -> tuple[int, int]:
    """(observed prefix length, end of the price phase) for n items."""
    return math.ceil(n / 4), n // 2


def classic_secretary_price(values: Sequence[float], n: int | None = None) -> PricePhase:
    """Classic secretary rule over the first half of an n-item stream.

    ``values`` are the singleton values of the first ``n // 2`` arrivals.
    The first ``ceil(n/4)`` are only observed; afterwards the first item
    beating everything seen so far is selected.  ``M`` is the largest value
    in ``values`` whether or not it was selected.
    """
    values = list(values)
    if n is None:
        n = 2 * len(values)
    observe, end = phase_bounds(n)
    values = values[:end]
    if not values:
        return PricePhase(None, 0.0, observe, end)
    best = max(values[:observe], default=-math.inf)
    selected = None
    for pos in range(observe, len(values)):
        if values[pos] > best:
            selected = pos
            break
    return PricePhase(selected, float(max(values)), observe, end)


def alpha_grid(M: float, r: int) -> np.ndarray:
    """Grid M / 2**t for t = 0 .. floor(log2 r)."""
    if r < 1:
        raise DomainError("r must be at least 1")
    steps = int(math.floor(math.log2(r))) if r > 1 else 0
    return M / np.exp2(np.arange(steps + 1))


def guess_alpha(M: float, r: int, rng=None) -> float | None:
    """Uniform draw from the price grid; None when M <= 0 (nothing worth pricing)."""
    if M <= 0:
        return None
    grid = alpha_grid(M, r)
    rng = np.random.default_rng(rng)
    return float(grid[rng.integers(len(grid))])


class _CheckedOracle:
    """Membership oracle wrapper that detects downward-closure violations on queried sets."""

    def __init__(self, member: Callable[[int], bool]):
        self.member = member
        self.rejected: list[int] = []
        self.accepted: list[int] = []

    def __call__(self, T: int) -> bool:
        ok = bool(self.member(T))
        if ok:
            for R in self.rejected:
                if R & ~T == 0:
                    raise ProtocolError(f"oracle accepts {T} but rejected its subset {R}")
            self.accepted.append(T)
        else:
            for A in self.accepted:
                if T & ~A == 0:
                    raise ProtocolError(f"oracle rejects {T} but accepted its superset {A}")
            self.rejected.append(T)
        return ok


def largest_member(items: Sequence[int], member: Callable[[int], bool]) -> int:
    """Largest member made of ``items``, by depth-first extension of members."""
    items = list(items)
    best = 0
    seen = set()

    def grow(S: int, start: int) -> None:
        nonlocal best
        if popcount(S) > popcount(best):
            best = S
        if popcount(S) + len(items) - start <= popcount(best):
            return
        for k in range(start, len(items)):
            T = S | 1 << items[k]
            if T in seen:
                continue
            seen.add(T)
            if member(T):
                grow(T, k + 1)

    grow(0, 0)
    return best


def sample_greedy(stream: Sequence[int], member: Callable[[int], bool], rng=None) -> int:
    """Baseline {0,1} downward-closed secretary routine.

    Observe the first half of ``stream``, take the size of the largest member
    among observed items as a target, then greedily accept second-half items
    while the accepted set stays a member and is below the target.
    No competitive guarantee is claimed for this rule.
    """
    stream = list(stream)
    oracle = _CheckedOracle(member)
    half = len(stream) // 2
    target = max(1, popcount(largest_member(stream[:half], oracle)))
    accepted = 0
    for e in stream[half:]:
        if popcount(accepted) >= target:
            break
        if oracle(accepted | 1 << e):
            accepted |= 1 << e
    return accepted


BASELINES = {"sample-greedy": sample_greedy}


def additive_01_dc_secretary(stream: Sequence[int], member: Callable[[int], bool], rng=None,
                             baseline: str = "sample-greedy") -> int:
    return BASELINES[baseline](stream, member, rng)


@dataclass(frozen=True)
class SecretaryRun:
    W: int
    value: float
    alpha: float | None
    M: float
    price_pick: int | None
    first_half_argmax: int | None
    order: tuple
    # the price phase picked an item worth M (ties with the argmax count)
    price_found_max: bool = False


def run_subadditive_secretary(instance: SecretaryInstance, seed=None, alpha_override: float | None = None,
                              baseline: str = "sample-greedy", order: Sequence[int] | None = None) -> SecretaryRun:
    rng = np.random.default_rng(seed)
    n = instance.n
    f = instance.valuation
    order = tuple(int(i) for i in (rng.permutation(n) if order is None else order))
    observe, end = phase_bounds(n)
    singles = [f.value(1 << i) for i in order[:end]]
    phase = classic_secretary_price(singles, n)
    argmax = int(np.argmax(singles)) if singles else None
    found = phase.selected is not None and singles[phase.selected] >= phase.M
    alpha = alpha_override if alpha_override is not None else guess_alpha(phase.M, max(instance.r, 1), rng)
    if alpha is None:
        return SecretaryRun(0, f.value(0), None, phase.M, phase.selected, argmax, order, found)
    priced = PricedFamily(instance.family, f, alpha)
    W = additive_01_dc_secretary(order[end:], priced.__contains__, rng, baseline)
    val = f.value(W)
    if W not in instance.family or val < alpha * popcount(W) - PRICE_TOL * max(1.0, val):
        raise AssertionError("returned set violates the priced-family certificate")
    return SecretaryRun(W, val, alpha, phase.M, phase.selected, argmax, order, found)


def offline_opt(instance: SecretaryInstance) -> tuple[int, float]:
    """Exact maximiser of f over the family (enumerates every member)."""
    best_T, best_v = 0, instance.valuation.value(0)
    for T in sorted(instance.family.members()):
        v = instance.valuation.value(T)
        if v > best_v:
            best_T, best_v = T, v
    return best_T, best_v


# ---------------------------------------------------------------------------
# XOS diagnostic


@dataclass(frozen=True)
class XosDiagnostic:
    max_ratio: float
    worst_set: int
    lower_violation: float
    log_rate: float


def price_table(f: SetFunction, n: int) -> np.ndarray:
    """best_uniform_price(f, T) for every non-empty T (entry 0 is +inf)."""
    if n > MAX_ENUM:
        raise CapacityError(f"price table needs n <= {MAX_ENUM}")
    vals = np.array([f.value(T) for T in range(1 << n)], dtype=float)
    sizes = np.array([popcount(T) for T in range(1 << n)])
    prices = np.full(1 << n, np.inf)
    prices[1:] = vals[1:] / sizes[1:]
    for i in range(n):
        view = prices.reshape(-1, 2, 1 << i)
        np.minimum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    prices[0] = np.inf
    return prices


def xos_lower_envelope(f: SetFunction, n: int) -> np.ndarray:
    """v_hat(S) = max over T of price(T) * |T & S| for every S."""
    prices = price_table(f, n)
    prices[0] = 0.0
    masks = np.arange(1 << n)
    sizes = np.array([popcount(int(m)) for m in masks])
    out = np.zeros(1 << n)
    for T in range(1, 1 << n):
        if prices[T] > 0:
            np.maximum(out, prices[T] * sizes[masks & T], out=out)
    return out


def xos_diagnostic(f: SetFunction, n: int) -> XosDiagnostic:
    vals = np.array([f.value(T) for T in range(1 << n)], dtype=float)
    vhat = xos_lower_envelope(f, n)
    lower = float(np.max(vhat - vals))
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(vhat > 0, vals / np.where(vhat > 0, vhat, 1.0),
                         np.where(vals > PRICE_TOL, np.inf, 1.0))
    k = int(np.argmax(ratio))
    return XosDiagnostic(float(ratio[k]), k, lower, math.log(max(popcount(k), 1)) / (2 * math.e))
