"""Random instance families used by the verification suites and the CLI."""

from __future__ import annotations

import math

import numpy as np

from .errors import CapacityError, DomainError
from .matroid import GraphicMatroid, Matroid, PartitionMatroid, UniformMatroid, free_matroid
from .setfn import (
    XOS,
    BudgetAdditive,
    Coverage,
    DirectedCut,
    ExplicitSetFunction,
    SetFunction,
    popcounts,
    to_mask,
    unit_subadditive,
)


def _weight(rng) -> float:
    return float(rng.uniform(0.1, 1.0))


def random_cut(n: int, rng, density: float = 0.4) -> DirectedCut:
    """Directed cut of a random weighted digraph (at least one arc)."""
    if n < 2:
        raise DomainError("a cut function needs at least two vertices")
    arcs = [(u, v, _weight(rng)) for u in range(n) for v in range(n)
            if u != v and rng.random() < density]
    if not arcs:
        u, v = rng.choice(n, 2, replace=False)
        arcs = [(int(u), int(v), _weight(rng))]
    return DirectedCut(n, tuple(arcs))


def random_coverage(n: int, rng, universe: int | None = None, p: float = 0.35) -> Coverage:
    universe = universe or max(2, n)
    covers = []
    for _ in range(n):
        pts = [j for j in range(universe) if rng.random() < p]
        covers.append(to_mask(pts))
    weights = tuple(_weight(rng) for _ in range(universe))
    return Coverage(n, tuple(covers), weights)


def random_budget_additive(n: int, rng) -> BudgetAdditive:
    weights = tuple(_weight(rng) for _ in range(n))
    budget = float(rng.uniform(0.3, 1.0) * sum(weights))
    return BudgetAdditive(n, weights, budget)


def random_xos(n: int, rng, clauses: int = 3) -> XOS:
    return XOS(n, tuple(tuple(float(w) if rng.random() < 0.6 else 0.0 for w in rng.uniform(0, 1, n))
                        for _ in range(clauses)))


def cardinality_steps(n: int, k: int, scale: float = 1.0) -> ExplicitSetFunction:
    """f(S) = scale * ceil(|S| / k): monotone subadditive, not XOS for k >= 2."""
    return ExplicitSetFunction(n, scale * np.ceil(popcounts(n) / k))


def random_mixture(n: int, rng, density: float = 0.4) -> ExplicitSetFunction:
    """Non-negative combination of a random cut and a random coverage function."""
    cut = random_cut(n, rng, density).to_explicit()
    cov = random_coverage(n, rng).to_explicit()
    return cut + cov.scaled(float(rng.uniform(0.05, 1.0)))


def random_nonneg_submodular(n: int, rng) -> ExplicitSetFunction:
    if rng.random() < 0.5:
        return random_cut(n, rng, float(rng.uniform(0.2, 0.7))).to_explicit()
    return random_mixture(n, rng, float(rng.uniform(0.2, 0.7)))


def random_monotone_submodular(n: int, rng) -> ExplicitSetFunction:
    if rng.random() < 0.7:
        return random_coverage(n, rng).to_explicit()
    return random_budget_additive(n, rng).to_explicit()


def random_monotone_subadditive(n: int, rng) -> SetFunction:
    kind = rng.integers(5)
    if kind == 0:
        return random_coverage(n, rng)
    if kind == 1:
        return random_budget_additive(n, rng)
    if kind == 2:
        return random_xos(n, rng, int(rng.integers(1, 5)))
    if kind == 3:
        return cardinality_steps(n, int(rng.integers(2, 4)), _weight(rng))
    return unit_subadditive(n)


def random_vector(n: int, rng) -> np.ndarray:
    """Uniform coordinates, with occasional exact 0 or 1 entries."""
    x = rng.uniform(0, 1, n)
    edge = rng.random(n)
    x[edge < 0.05] = 0.0
    x[edge > 0.95] = 1.0
    return x


def random_matroid(n: int, rng, kind: str | None = None) -> Matroid:
    kind = kind or ["uniform", "partition", "graphic", "free"][int(rng.integers(4))]
    if kind == "free":
        return free_matroid(n)
    if kind == "uniform":
        return UniformMatroid(n, int(rng.integers(1, n + 1)))
    if kind == "partition":
        labels = rng.integers(0, max(1, (n + 1) // 2), n)
        blocks = [tuple(int(e) for e in np.flatnonzero(labels == b)) for b in np.unique(labels)]
        caps = tuple(int(rng.integers(1, len(b) + 1)) for b in blocks)
        return PartitionMatroid(n, tuple(blocks), caps)
    if kind == "graphic":
        vertices = max(2, int(math.ceil(math.sqrt(2 * n))) + 1)
        edges = []
        while len(edges) < n:
            u, v = rng.choice(vertices, 2, replace=False)
            edges.append((int(u), int(v)))
        return GraphicMatroid(tuple(edges))
    raise DomainError(f"unknown matroid family {kind!r}")


def random_prophet_instance(days: int, per_day: int, rng, matroid: str | None = None,
                            objective: str = "mixture", point_mass: bool = False):
    from .prophet import ProphetInstance

    sizes = [1 if point_mass else int(rng.integers(1, per_day + 1)) for _ in range(days)]
    total = sum(sizes)
    if total > 20:
        raise CapacityError("prophet generator keeps |U| <= 20")
    universes, priors, start = [], [], 0
    for k in sizes:
        universes.append(tuple(range(start, start + k)))
        start += k
        d = rng.dirichlet(np.ones(k))
        priors.append(tuple(float(p) for p in d / d.sum()))
    if objective == "mixture":
        f = random_mixture(total, rng) if total >= 2 else random_coverage(total, rng).to_explicit()
    elif objective == "cut":
        f = random_cut(total, rng).to_explicit()
    elif objective == "coverage":
        f = random_coverage(total, rng).to_explicit()
    else:
        raise DomainError(f"unknown objective family {objective!r}")
    return ProphetInstance(tuple(universes), tuple(priors), f, random_matroid(days, rng, matroid))


def random_family(n: int, rng, sets: int, max_size: int):
    from .secretary import DownwardClosedFamily

    maximal = []
    for _ in range(sets):
        k = int(rng.integers(1, min(max_size, n) + 1))
        maximal.append(to_mask(rng.choice(n, k, replace=False)))
    return DownwardClosedFamily(n, tuple(maximal))


def random_secretary_instance(n: int, rng, sets: int = 8, max_size: int = 6, valuation: str | None = None):
    from .secretary import SecretaryInstance

    family = random_family(n, rng, sets, max_size)
    valuation = valuation or ["coverage", "budget", "xos", "additive"][int(rng.integers(4))]
    if valuation == "coverage":
        f = random_coverage(n, rng, universe=min(2 * n, 60), p=min(0.3, 4.0 / n + 0.05))
    elif valuation == "budget":
        f = random_budget_additive(n, rng)
    elif valuation == "xos":
        f = random_xos(n, rng)
    elif valuation == "additive":
        f = BudgetAdditive(n, tuple(_weight(rng) for _ in range(n)))
    elif valuation == "unit":
        f = unit_subadditive(n)
    else:
        raise DomainError(f"unknown valuation family {valuation!r}")
    return SecretaryInstance(f, family)
