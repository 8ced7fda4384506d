"""Set functions on small ground sets and their continuous relaxations.

Subsets are encoded as integer bitmasks: element ``i`` is in ``S`` iff bit
``i`` of ``S`` is set.  An :class:`ExplicitSetFunction` stores a dense table
of ``2**n`` values indexed by that bitmask, which is what every exhaustive
routine here works on.  Structured functions (coverage, cut, XOS, ...) share
the :class:`SetFunction` interface and can be tabulated with
:meth:`SetFunction.to_explicit` when the ground set is small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import CapacityError, DomainError, NumericError

MAX_ORACLE = 64
MAX_ENUM = 14
MAX_LP = 12
TOL = 1e-9


# ---------------------------------------------------------------------------
# bitmask helpers


def to_mask(elements: Iterable[int]) -> int:
    mask = 0
    for e in elements:
        mask |= 1 << int(e)
    return mask


def from_mask(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def submasks(mask: int):
    """Yield every submask of ``mask``, including ``mask`` and 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def bit_matrix(n: int) -> np.ndarray:
    """Boolean array of shape (2**n, n); row S is the indicator of S."""
    masks = np.arange(1 << n, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)


def popcounts(n: int) -> np.ndarray:
    counts = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        counts[1 << i : 1 << (i + 1)] = counts[: 1 << i] + 1
    return counts


def product_weights(x: Sequence[float]) -> np.ndarray:
    """Probability of each subset under independent rounding of ``x``."""
    w = np.ones(1)
    for xi in x:
        w = np.concatenate((w * (1.0 - xi), w * xi))
    return w


def subset_sum(a: np.ndarray, n: int) -> np.ndarray:
    """Zeta transform: out[S] = sum of a[T] over T subset of S."""
    out = np.array(a, dtype=float, copy=True)
    for i in range(n):
        view = out.reshape(-1, 2, 1 << i)
        view[:, 1, :] += view[:, 0, :]
    return out


def _check_enum(n: int, cap: int = MAX_ENUM) -> None:
    if n > cap:
        raise CapacityError(f"ground set of size {n} exceeds the exhaustive cap {cap}")


def as_vector(x: Sequence[float], n: int) -> np.ndarray:
    """Validate a marginal vector: length ``n``, every coordinate in [0, 1]."""
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise DomainError(f"vector has length {v.shape[0]}, expected {n}")
    if np.any(~np.isfinite(v)) or np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
        raise DomainError("vector coordinates must lie in [0, 1]")
    return np.clip(v, 0.0, 1.0)


# ---------------------------------------------------------------------------
# set functions


class SetFunction:
    """Value oracle over subsets of ``range(n)``.

    Subclasses implement :meth:`value`.  Calling the object is the same as
    calling :meth:`value`.
    """

    n: int
    labels: tuple

    def value(self, mask: int) -> float:
        raise NotImplementedError

    def __call__(self, mask: int) -> float:
        return self.value(mask)

    def mask(self, elements: Iterable) -> int:
        """Bitmask of a collection of labels (or integer positions)."""
        index = {lab: i for i, lab in enumerate(self.labels)}
        out = 0
        for e in elements:
            i = index[e] if e in index else int(e)
            if not 0 <= i < self.n:
                raise DomainError(f"element {e!r} is not in the ground set")
            out |= 1 << i
        return out

    def to_explicit(self) -> "ExplicitSetFunction":
        _check_enum(self.n)
        table = np.array([self.value(m) for m in range(1 << self.n)], dtype=float)
        return ExplicitSetFunction(self.n, table, self.labels)

    def to_json(self) -> dict:
        raise NotImplementedError


def _default_labels(n: int, labels) -> tuple:
    if labels is None:
        return tuple(range(n))
    labels = tuple(labels)
    if len(labels) != n or len(set(labels)) != n:
        raise DomainError("labels must be n distinct identifiers")
    return labels


@dataclass(frozen=True, eq=False)
class ExplicitSetFunction(SetFunction):
    """Dense table of ``2**n`` non-negative values in bitmask order."""

    n: int
    values: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        if not 1 <= self.n <= 20:
            raise CapacityError(f"explicit tables support 1 <= n <= 20, got {self.n}")
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape[0] != 1 << self.n:
            raise DomainError(f"table has {values.shape[0]} entries, expected {1 << self.n}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise DomainError("set function values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", _default_labels(self.n, self.labels))

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def value(self, mask: int) -> float:
        if not 0 <= mask < 1 << self.n:
            raise DomainError(f"subset encoding {mask} out of range for n={self.n}")
        return float(self.values[mask])

    def to_explicit(self) -> "ExplicitSetFunction":
        return self

    def scaled(self, factor: float) -> "ExplicitSetFunction":
        return ExplicitSetFunction(self.n, self.values * factor, self.labels)

    def normalized(self) -> "ExplicitSetFunction":
        """Rescale so that the largest value is 1 (identity for the zero function)."""
        top = float(self.values.max())
        return self if top <= 0 else self.scaled(1.0 / top)

    def restrict_union(self, base: int) -> "ExplicitSetFunction":
        """The function ``U -> f(base | U)`` on the same ground set."""
        masks = np.arange(1 << self.n) | base
        return ExplicitSetFunction(self.n, self.values[masks], self.labels)

    def __add__(self, other: "ExplicitSetFunction") -> "ExplicitSetFunction":
        if other.n != self.n:
            raise DomainError("cannot add set functions on different ground sets")
        return ExplicitSetFunction(self.n, self.values + other.values, self.labels)

    def to_json(self) -> dict:
        return {"n": self.n, "kind": "explicit", "values": [float(v) for v in self.values]}


@dataclass(frozen=True, eq=False)
class DirectedCut(SetFunction):
    """Total weight of arcs leaving ``S``: arcs (u, v, w) with u in S, v not in S."""

    n: int
    arcs: tuple
    labels: tuple = None

    def __post_init__(self):
        arcs = tuple((int(u), int(v), float(w)) for u, v, w in self.arcs)
        for u, v, w in arcs:
            if not (0 <= u < self.n and 0 <= v < self.n) or u == v or w < 0:
                raise DomainError(f"bad arc {(u, v, w)}")
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "labels", _default_labels(self.n, self.labels))

    def value(self, mask: int) -> float:
        total = 0.0
        for u, v, w in self.arcs:
            if mask >> u & 1 and not mask >> v & 1:
                total += w
        return total

    def to_explicit(self) -> ExplicitSetFunction:
        _check_enum(self.n)
        bits = bit_matrix(self.n)
        table = np.zeros(1 << self.n)
        for u, v, w in self.arcs:
            table += w * (bits[:, u] & ~bits[:, v])
        return ExplicitSetFunction(self.n, table, self.labels)

    def to_json(self) -> dict:
        return {"n": self.n, "kind": "directed_cut", "arcs": [list(a) for a in self.arcs]}


@dataclass(frozen=True, eq=False)
class Coverage(SetFunction):
    """Weighted coverage: item i covers the universe points in ``covers[i]``."""

    n: int
    covers: tuple
    weights: tuple
    labels: tuple = None

    def __post_init__(self):
        covers = tuple(int(c) for c in self.covers)
        weights = tuple(float(w) for w in self.weights)
        if len(covers) != self.n:
            raise DomainError("need one cover mask per item")
        if any(w < 0 for w in weights) or any(c >> len(weights) for c in covers):
            raise DomainError("cover masks must index non-negative weights")
        object.__setattr__(self, "covers", covers)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", _default_labels(self.n, self.labels))

    def value(self, mask: int) -> float:
        covered = 0
        for i in from_mask(mask):
            covered |= self.covers[i]
        return sum(self.weights[j] for j in from_mask(covered))

    def to_json(self) -> dict:
        return {"n": self.n, "kind": "coverage", "covers": list(self.covers),
                "weights": list(self.weights)}


@dataclass(frozen=True, eq=False)
class BudgetAdditive(SetFunction):
    """``min(sum of weights in S, budget)``; plain additive when budget is None."""

    n: int
    weights: tuple
    budget: float | None = None
    labels: tuple = None

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != self.n or any(w < 0 for w in weights):
            raise DomainError("need n non-negative weights")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", _default_labels(self.n, self.labels))

    def value(self, mask: int) -> float:
        total = sum(self.weights[i] for i in from_mask(mask))
        return total if self.budget is None else min(total, self.budget)

    def to_json(self) -> dict:
        return {"n": self.n, "kind": "budget_additive", "weights": list(self.weights),
                "budget": self.budget}


def additive(weights: Sequence[float]) -> BudgetAdditive:
    return BudgetAdditive(len(weights), tuple(weights))


def unit_subadditive(n: int) -> BudgetAdditive:
    """f(S) = 1 for every non-empty S."""
    return BudgetAdditive(n, (1.0,) * n, 1.0)


@dataclass(frozen=True, eq=False)
class XOS(SetFunction):
    """Pointwise maximum of non-negative additive clauses."""

    n: int
    clauses: tuple
    labels: tuple = None

    def __post_init__(self):
        clauses = tuple(tuple(float(w) for w in c) for c in self.clauses)
        if not clauses or any(len(c) != self.n or min(c) < 0 for c in clauses):
            raise DomainError("XOS clauses must be non-negative weight vectors of length n")
        object.__setattr__(self, "clauses", clauses)
        object.__setattr__(self, "labels", _default_labels(self.n, self.labels))

    def value(self, mask: int) -> float:
        items = from_mask(mask)
        return max(sum(c[i] for i in items) for c in self.clauses)

    def to_json(self) -> dict:
        return {"n": self.n, "kind": "xos", "clauses": [list(c) for c in self.clauses]}


def setfn_from_json(doc: dict) -> SetFunction:
    kind = doc.get("kind", "explicit")
    if kind == "explicit":
        return ExplicitSetFunction(int(doc["n"]), np.asarray(doc["values"], dtype=float))
    if kind == "directed_cut":
        arcs = doc["arcs"]
        n = int(doc.get("n") or 1 + max(max(a[0], a[1]) for a in arcs))
        return DirectedCut(n, tuple(tuple(a) for a in arcs))
    if kind == "coverage":
        return Coverage(int(doc["n"]), tuple(doc["covers"]), tuple(doc["weights"]))
    if kind == "budget_additive":
        return BudgetAdditive(int(doc["n"]), tuple(doc["weights"]), doc.get("budget"))
    if kind == "xos":
        return XOS(int(doc["n"]), tuple(tuple(c) for c in doc["clauses"]))
    raise DomainError(f"unknown set function kind {kind!r}")


def explicit(f: SetFunction) -> ExplicitSetFunction:
    return f.to_explicit()


# ---------------------------------------------------------------------------
# pointwise operations and predicates


def value(f: SetFunction, S: int) -> float:
    return f.value(S)


def marginal(f: SetFunction, S: int, e: int) -> float:
    """f(S + e) - f(S); negative values are allowed."""
    if not 0 <= e < f.n:
        raise DomainError(f"element {e} outside the ground set")
    if S >> e & 1:
        raise DomainError(f"element {e} already belongs to S")
    return f.value(S | 1 << e) - f.value(S)


@dataclass(frozen=True)
class Violation:
    """Witness that a defining inequality fails.

    For submodularity: ``S`` is a subset of ``T``, ``e`` is outside ``T``
    and the marginal of ``e`` at ``S`` (``lhs``) is smaller than at ``T``
    (``rhs``).  For monotonicity: ``f(S) = lhs > rhs = f(T)`` with ``S`` a
    subset of ``T``.  For subadditivity: ``f(S | T) = lhs > rhs = f(S) + f(T)``.
    """

    kind: str
    S: int
    T: int
    e: int | None
    lhs: float
    rhs: float


def _scale_tol(f: ExplicitSetFunction, tol: float) -> float:
    return tol * max(1.0, float(f.values.max()))


def submodularity_violation(f: SetFunction, tol: float = TOL) -> Violation | None:
    """Worst failure of f(S+i) + f(S+j) >= f(S+i+j) + f(S), or None.

    Checking every pair of distinct elements outside every S is equivalent
    to decreasing marginals over all nested pairs.
    """
    f = f.to_explicit()
    n, vals = f.n, f.values
    tol = _scale_tol(f, tol)
    masks = np.arange(1 << n)
    worst = None
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            base = masks[((masks >> i) & 1 == 0) & ((masks >> j) & 1 == 0)]
            lo = vals[base | 1 << i] - vals[base]
            hi = vals[base | 1 << i | 1 << j] - vals[base | 1 << j]
            gap = hi - lo
            k = int(np.argmax(gap))
            if gap[k] > tol and (worst is None or gap[k] > worst.rhs - worst.lhs):
                S = int(base[k])
                worst = Violation("submodular", S, S | 1 << j, i, float(lo[k]), float(hi[k]))
    return worst


def monotonicity_violation(f: SetFunction, tol: float = TOL) -> Violation | None:
    f = f.to_explicit()
    n, vals = f.n, f.values
    tol = _scale_tol(f, tol)
    masks = np.arange(1 << n)
    for i in range(n):
        base = masks[(masks >> i) & 1 == 0]
        drop = vals[base] - vals[base | 1 << i]
        k = int(np.argmax(drop))
        if drop[k] > tol:
            S = int(base[k])
            return Violation("monotone", S, S | 1 << i, i, float(vals[S]), float(vals[S | 1 << i]))
    return None


def subadditivity_violation(f: SetFunction, tol: float = TOL) -> Violation | None:
    f = f.to_explicit()
    n, vals = f.n, f.values
    tol = _scale_tol(f, tol)
    masks = np.arange(1 << n)
    for S in range(1 << n):
        T = masks[S:]
        gap = vals[S | T] - vals[S] - vals[T]
        k = int(np.argmax(gap))
        if gap[k] > tol:
            t = int(T[k])
            return Violation("subadditive", S, t, None, float(vals[S | t]), float(vals[S] + vals[t]))
    return None


def is_submodular(f: SetFunction, tol: float = TOL) -> bool:
    return submodularity_violation(f, tol) is None


def is_monotone(f: SetFunction, tol: float = TOL) -> bool:
    return monotonicity_violation(f, tol) is None


def is_subadditive(f: SetFunction, tol: float = TOL) -> bool:
    return subadditivity_violation(f, tol) is None


# ---------------------------------------------------------------------------
# relaxations


def multilinear_exact(f: SetFunction, x: Sequence[float]) -> float:
    """Multilinear extension: expected value of f under independent rounding of x."""
    f = f.to_explicit()
    _check_enum(f.n)
    x = as_vector(x, f.n)
    return float(product_weights(x) @ f.values)


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int

    @property
    def ci95(self) -> float:
        return 1.96 * self.stderr


def multilinear_mc(f: SetFunction, x: Sequence[float], trials: int, seed=None,
                   chunk: int = 1 << 15) -> Estimate:
    """Monte-Carlo estimate of the multilinear extension with its standard error."""
    if trials < 1:
        raise DomainError("trials must be at least 1")
    x = as_vector(x, f.n)
    rng = np.random.default_rng(seed)
    table = f.values if isinstance(f, ExplicitSetFunction) else None
    weights = (1 << np.arange(f.n, dtype=np.int64))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        masks = (rng.random((m, f.n)) < x) @ weights
        if table is not None:
            vals = table[masks]
        else:
            vals = np.array([f.value(int(s)) for s in masks])
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += m
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0)
    if trials > 1:
        var *= trials / (trials - 1)
    return Estimate(mean, math.sqrt(var / trials), trials)


def f_max_table(f: SetFunction) -> ExplicitSetFunction:
    """The monotone hull S -> max over T subset of S of f(T)."""
    f = f.to_explicit()
    _check_enum(f.n)
    out = np.array(f.values, copy=True)
    for i in range(f.n):
        view = out.reshape(-1, 2, 1 << i)
        np.maximum(view[:, 1, :], view[:, 0, :], out=view[:, 1, :])
    return ExplicitSetFunction(f.n, out, f.labels)


@dataclass(frozen=True)
class SubsetDistribution:
    """Finite distribution over subsets given as (bitmask, weight) atoms."""

    atoms: tuple

    def __post_init__(self):
        ws = [w for _, w in self.atoms]
        if any(w < -1e-12 for w in ws) or abs(sum(ws) - 1.0) > 1e-9:
            raise DomainError("subset distribution weights must be non-negative and sum to 1")

    def marginals(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for S, w in self.atoms:
            for i in from_mask(S):
                out[i] += w
        return out

    def expectation(self, f: SetFunction) -> float:
        return float(sum(w * f.value(S) for S, w in self.atoms))


def concave_closure(f: SetFunction, x: Sequence[float], return_witness: bool = False):
    """Largest expected value of f over subset distributions with marginals x.

    Solved as a dense linear program with one column per subset (HiGHS).
    With ``return_witness`` the optimal distribution is returned as well.
    """
    f = f.to_explicit()
    _check_enum(f.n, MAX_LP)
    n = f.n
    x = as_vector(x, n)
    a_eq = np.vstack([np.ones(1 << n), bit_matrix(n).T.astype(float)])
    b_eq = np.concatenate([[1.0], x])
    res = linprog(-f.values, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise NumericError(f"concave closure LP failed: {res.message}")
    alpha = np.clip(res.x, 0.0, None)
    alpha /= alpha.sum()
    best = float(alpha @ f.values)
    if not return_witness:
        return best
    keep = np.flatnonzero(alpha > 1e-12)
    atoms = tuple((int(S), float(alpha[S])) for S in keep)
    scale = sum(w for _, w in atoms)
    dist = SubsetDistribution(tuple((S, w / scale) for S, w in atoms))
    return best, dist


def _marginal_matrix(f: ExplicitSetFunction) -> np.ndarray:
    """m[S, i] = f(S + i) - f(S) for i outside S, and 0 for i in S."""
    n = f.n
    masks = np.arange(1 << n)
    m = np.zeros((1 << n, n))
    for i in range(n):
        out = (masks >> i) & 1 == 0
        m[out, i] = f.values[masks[out] | 1 << i] - f.values[masks[out]]
    return m


def continuous_relaxation(f: SetFunction, x: Sequence[float], return_argmin: bool = False):
    """min over S of f(S) + sum over i outside S of x_i * (f(S + i) - f(S))."""
    f = f.to_explicit()
    _check_enum(f.n)
    x = as_vector(x, f.n)
    totals = f.values + _marginal_matrix(f) @ x
    k = int(np.argmin(totals))
    return (float(totals[k]), k) if return_argmin else float(totals[k])


def g_star_half(f: SetFunction, x: Sequence[float], return_argmin: bool = False):
    """min over S of E_{T ~ 1_S/2}[ f(T) + sum_{i not in S} x_i * f_T(i) ].

    For every S the expectation is an average over the 2^|S| subsets of S,
    computed for all S at once with subset-sum transforms (O(n^2 2^n)).
    """
    f = f.to_explicit()
    _check_enum(f.n)
    n = f.n
    x = as_vector(x, n)
    marg = _marginal_matrix(f)
    masks = np.arange(1 << n)
    totals = subset_sum(f.values, n)
    for i in range(n):
        if x[i] == 0:
            continue
        zi = subset_sum(marg[:, i], n)
        outside = (masks >> i) & 1 == 0
        totals[outside] += x[i] * zi[outside]
    totals /= np.exp2(popcounts(n))
    k = int(np.argmin(totals))
    return (float(totals[k]), k) if return_argmin else float(totals[k])


@dataclass(frozen=True)
class GapReport:
    F_at_x: float
    F_at_half_x: float
    f_plus: float
    f_star: float
    f_star_half: float
    F_max_at_x: float

    def __post_init__(self):
        for name, v in self.values().items():
            if not math.isfinite(v) or v < -1e-9:
                raise NumericError(f"{name} = {v} is not a finite non-negative value")

    def values(self) -> dict:
        return {
            "F_at_x": self.F_at_x,
            "F_at_half_x": self.F_at_half_x,
            "f_plus": self.f_plus,
            "f_star": self.f_star,
            "f_star_half": self.f_star_half,
            "F_max_at_x": self.F_max_at_x,
        }

    @staticmethod
    def _ratio(a: float, b: float) -> float:
        if b > 0:
            return a / b
        return 1.0 if a <= TOL else math.inf

    def ratios(self) -> dict:
        r = self._ratio
        return {
            "f_plus/F": r(self.f_plus, self.F_at_x),
            "f_plus/f_star_half": r(self.f_plus, self.f_star_half),
            "f_star_half/F_half": r(self.f_star_half, self.F_at_half_x),
            "F_half/F_max": r(self.F_at_half_x, self.F_max_at_x),
            "f_plus/F_max": r(self.f_plus, self.F_max_at_x),
            "f_star/F": r(self.f_star, self.F_at_x),
        }

    def to_json(self) -> dict:
        return {**self.values(), "ratios": self.ratios()}


def gap_report(f: SetFunction, x: Sequence[float]) -> GapReport:
    f = f.to_explicit()
    _check_enum(f.n, MAX_LP)
    x = as_vector(x, f.n)
    return GapReport(
        F_at_x=multilinear_exact(f, x),
        F_at_half_x=multilinear_exact(f, x / 2),
        f_plus=concave_closure(f, x),
        f_star=continuous_relaxation(f, x),
        f_star_half=g_star_half(f, x),
        F_max_at_x=multilinear_exact(f_max_table(f), x),
    )
