"""Verifiers for the correlation-gap chain and its supporting lemmata.

Each verifier checks one inequality on one instance and returns a
:class:`LemmaVerdict` whose ``worst_slack`` is ``LHS - bound * RHS`` written
so that a non-positive slack passes.  Exact verifiers normalise ``f`` to
``max f = 1`` and compare against ``TOL``; Monte-Carlo verifiers subtract
three 95% half-widths before comparing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import generators as gen
from .errors import DomainError, PreconditionError
from .setfn import (
    MAX_LP,
    TOL,
    DirectedCut,
    ExplicitSetFunction,
    SetFunction,
    _check_enum,
    as_vector,
    concave_closure,
    continuous_relaxation,
    f_max_table,
    from_mask,
    g_star_half,
    monotonicity_violation,
    multilinear_exact,
    popcount,
    product_weights,
    submasks,
    submodularity_violation,
)

E_RATIO = 1.0 / (1.0 - 1.0 / math.e)
LEMMAS = ("bfns", "lowhigh", "fmv", "aux", "mono", "chain", "fmax")


@dataclass
class LemmaVerdict:
    lemma: str
    instances: int
    worst_slack: float
    tolerance: float = TOL
    witness: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.worst_slack <= self.tolerance

    def to_json(self) -> dict:
        return {
            "lemma": self.lemma,
            "instances": self.instances,
            "worst_slack": self.worst_slack,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "witness": self.witness,
            "details": self.details,
        }


def merge(verdicts: Sequence[LemmaVerdict], lemma: str | None = None) -> LemmaVerdict:
    """Fold many verdicts into one, keeping the witness of the worst instance."""
    if not verdicts:
        raise DomainError("nothing to merge")
    worst = max(verdicts, key=lambda v: v.worst_slack - v.tolerance)
    failing = [v for v in verdicts if not v.passed]
    return LemmaVerdict(
        lemma or worst.lemma,
        sum(v.instances for v in verdicts),
        worst.worst_slack,
        worst.tolerance,
        worst.witness if failing else None,
        {"failures": len(failing), "worst": worst.details},
    )


def _explicit(f: SetFunction) -> ExplicitSetFunction:
    return f.to_explicit().normalized()


def _witness(f: ExplicitSetFunction, **params) -> dict:
    out = {"f": f.to_json()}
    for k, v in params.items():
        out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


def _verdict(lemma: str, slack: float, f: ExplicitSetFunction, details: dict, tol: float = TOL,
             **params) -> LemmaVerdict:
    witness = _witness(f, **params) if slack > tol else None
    return LemmaVerdict(lemma, 1, float(slack), tol, witness, details)


# ---------------------------------------------------------------------------
# samplers for the marginal-capped lemma


@dataclass(frozen=True)
class LatentCoinSampler:
    """Random subset of ``A`` with every marginal equal to ``q``.

    With probability ``rho`` one shared coin decides all of ``A`` at once
    (all-or-nothing); otherwise elements are included independently.
    Inclusions are pairwise positively correlated for ``rho > 0``.
    """

    n: int
    A: int
    q: float
    rho: float = 0.5

    def sample(self, rng, size: int) -> np.ndarray:
        elems = from_mask(self.A)
        shared = rng.random(size) < self.rho
        coin = rng.random(size) < self.q
        indep = rng.random((size, len(elems))) < self.q
        weights = np.array([1 << e for e in elems], dtype=np.int64)
        masks = indep @ weights if elems else np.zeros(size, dtype=np.int64)
        return np.where(shared, np.where(coin, self.A, 0), masks)

    def distribution(self) -> dict[int, float]:
        elems = from_mask(self.A)
        probs = product_weights([self.q] * len(elems))
        out: dict[int, float] = {}
        for local, p in enumerate(probs):
            S = sum(1 << elems[j] for j in range(len(elems)) if local >> j & 1)
            out[S] = out.get(S, 0.0) + (1 - self.rho) * p
        out[0] = out.get(0, 0.0) + self.rho * (1 - self.q)
        out[self.A] = out.get(self.A, 0.0) + self.rho * self.q
        return out


def verify_bfns(f: SetFunction, sampler, p: float, trials: int | None = None, seed=None) -> LemmaVerdict:
    """E[f(S)] >= (1 - p) f(empty) for random S with every marginal at most p.

    With ``trials=None`` the sampler's exact distribution is used; otherwise
    marginals and the expectation are estimated and 3 half-widths of slack
    are granted on each.
    """
    f = _explicit(f)
    if not 0 <= p <= 1:
        raise DomainError("p must lie in [0, 1]")
    bound = (1 - p) * f.values[0]
    if trials is None:
        dist = sampler.distribution()
        marg = np.zeros(f.n)
        for S, w in dist.items():
            for e in from_mask(S):
                marg[e] += w
        if np.any(marg > p + 1e-12):
            raise PreconditionError("sampler marginals exceed p", {"marginals": marg.tolist(), "p": p})
        mean = sum(w * f.values[S] for S, w in dist.items())
        slack, ci = bound - mean, 0.0
    else:
        rng = np.random.default_rng(seed)
        masks = sampler.sample(rng, trials)
        bits = ((masks[:, None] >> np.arange(f.n)) & 1).astype(float)
        marg = bits.mean(axis=0)
        mci = 1.96 * np.sqrt(np.maximum(marg * (1 - marg), 1e-300) / trials)
        if np.any(marg > p + 3 * mci + 1e-12):
            raise PreconditionError("sampler marginals exceed p", {"marginals": marg.tolist(), "p": p})
        vals = f.values[masks]
        mean = float(vals.mean())
        ci = 1.96 * float(vals.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
        slack = bound - mean - 3 * ci
    return _verdict("bfns", slack, f, {"mean": float(mean), "bound": float(bound), "ci95": ci}, p=p,
                    sampler={"A": sampler.A, "q": sampler.q, "rho": sampler.rho}, trials=trials, seed=seed)


def verify_low_high(f: SetFunction, x: Sequence[float], L: float, H: float) -> LemmaVerdict:
    """F(x) >= L (1 - H) max f for every x with coordinates in [L, H]."""
    f = _explicit(f)
    _check_enum(f.n, MAX_LP)
    x = as_vector(x, f.n)
    if not 0 <= L <= H <= 1 or np.any(x < L - 1e-12) or np.any(x > H + 1e-12):
        raise PreconditionError("need 0 <= L <= x_i <= H <= 1", {"x": x.tolist(), "L": L, "H": H})
    lhs = multilinear_exact(f, x)
    bound = L * (1 - H) * float(f.values.max())
    return _verdict("lowhigh", bound - lhs, f, {"F": lhs, "bound": bound}, x=x, L=L, H=H)


def verify_fmv_double(f: SetFunction, A: int, p: float) -> LemmaVerdict:
    """F(p 1_A) >= p (1 - p) max over T subset of A of f(T)."""
    f = _explicit(f)
    _check_enum(f.n, MAX_LP)
    x = np.array([p if A >> i & 1 else 0.0 for i in range(f.n)])
    lhs = multilinear_exact(f, x)
    best = max(f.values[T] for T in submasks(A))
    bound = p * (1 - p) * float(best)
    return _verdict("fmv", bound - lhs, f, {"F": lhs, "bound": bound}, A=A, p=p)


def verify_aux_claim(f: SetFunction, S: int, T: int) -> LemmaVerdict:
    """E over random halves H of T of f((S - T) | H) >= f(S) / 4."""
    f = _explicit(f)
    _check_enum(f.n, MAX_LP)
    base = S & ~T
    k = popcount(T)
    lhs = sum(f.values[base | H] for H in submasks(T)) / (1 << k)
    bound = f.values[S] / 4
    return _verdict("aux", float(bound - lhs), f, {"lhs": float(lhs), "bound": float(bound)}, S=S, T=T)


def verify_monotone_gap(f: SetFunction, x: Sequence[float]) -> LemmaVerdict:
    """F(x) <= f+(x) <= f*(x) <= (1 - 1/e)^-1 F(x) for monotone submodular f."""
    f = _explicit(f)
    _check_enum(f.n, 10)
    x = as_vector(x, f.n)
    for bad in (monotonicity_violation(f), submodularity_violation(f)):
        if bad is not None:
            raise PreconditionError(f"f is not monotone submodular ({bad.kind})", _witness(f, violation=bad.__dict__))
    F = multilinear_exact(f, x)
    fplus = concave_closure(f, x)
    fstar = continuous_relaxation(f, x)
    slack = max(F - fplus, fplus - fstar, fstar - E_RATIO * F)
    return _verdict("mono", slack, f, {"F": F, "f_plus": fplus, "f_star": fstar}, x=x)


def verify_nonmonotone_chain(f: SetFunction, x: Sequence[float]) -> LemmaVerdict:
    """f+(x) <= 4 g(x) <= 200 F(x/2) <= 200 F_max(x), for g the half-sampled relaxation."""
    f = _explicit(f)
    _check_enum(f.n, 10)
    x = as_vector(x, f.n)
    bad = submodularity_violation(f)
    if bad is not None:
        raise PreconditionError("f is not submodular", _witness(f, violation=bad.__dict__))
    fplus = concave_closure(f, x)
    half = g_star_half(f, x)
    F_half = multilinear_exact(f, x / 2)
    F_max = multilinear_exact(f_max_table(f), x)
    parts = {
        "f_plus<=4g": fplus - 4 * half,
        "g<=50F_half": half - 50 * F_half,
        "F_half<=F_max": F_half - F_max,
        "f_plus<=200F_max": fplus - 200 * F_max,
    }
    details = {"f_plus": fplus, "f_star_half": half, "F_half": F_half, "F_max": F_max, "slacks": parts}
    return _verdict("chain", max(parts.values()), f, details, x=x)


FOUR_PATH = ("u", "v", "w", "x")


def four_path_cut() -> ExplicitSetFunction:
    """Directed cut of the path u -> v -> w -> x."""
    return DirectedCut(4, ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)), labels=FOUR_PATH).to_explicit()


def nonsubmodularity_witness_fmax() -> LemmaVerdict:
    """f_max of the 4-path cut violates decreasing marginals at u: {v} versus {v, w}."""
    fm = f_max_table(four_path_cut())
    m = fm.mask
    vals = {
        "v": fm(m("v")),
        "uv": fm(m("uv")),
        "vw": fm(m("vw")),
        "uvw": fm(m("uvw")),
    }
    small = vals["uv"] - vals["v"]
    large = vals["uvw"] - vals["vw"]
    # passes (slack <= 0) exactly when the strict violation holds
    slack = 0.0 if small < large else 1.0 + small - large
    details = {"values": vals, "marginal_at_v": small, "marginal_at_vw": large}
    return LemmaVerdict("fmax", 1, slack, 0.0, None if slack <= 0 else _witness(fm), details)


# ---------------------------------------------------------------------------
# suites


def tight_cases() -> dict[str, LemmaVerdict]:
    """Instances where each lemma holds with equality."""
    cut = DirectedCut(2, ((0, 1, 1.0),), labels=("u", "v")).to_explicit()
    return {
        "bfns": verify_bfns(cut.restrict_union(1), LatentCoinSampler(2, 1, 0.0), 0.0),
        "lowhigh": verify_low_high(cut, [0.5, 0.5], 0.5, 0.5),
        "fmv": verify_fmv_double(cut, 0b11, 0.5),
        "aux": verify_aux_claim(cut, 0b01, 0b11),
    }


def _suite_instance(lemma: str, n_max: int, rng, index: int, mc_trials: int) -> LemmaVerdict:
    n = int(rng.integers(2, n_max + 1))
    if lemma == "mono":
        return verify_monotone_gap(gen.random_monotone_submodular(n, rng), gen.random_vector(n, rng))
    f = gen.random_nonneg_submodular(n, rng)
    if lemma == "chain":
        return verify_nonmonotone_chain(f, gen.random_vector(n, rng))
    if lemma == "lowhigh":
        L, H = sorted(rng.uniform(0, 1, 2))
        return verify_low_high(f, rng.uniform(L, H, n), float(L), float(H))
    if lemma == "fmv":
        A = int(rng.integers(0, 1 << n))
        return verify_fmv_double(f, A, float(rng.choice(np.round(np.arange(0.1, 1.0, 0.1), 1))))
    if lemma == "aux":
        return verify_aux_claim(f, int(rng.integers(0, 1 << n)), int(rng.integers(0, 1 << n)))
    if lemma == "bfns":
        A = int(rng.integers(0, 1 << n))
        p = float(rng.uniform(0, 1))
        q = p * float(rng.uniform(0.5, 1.0))
        sampler = LatentCoinSampler(n, A, q, float(rng.uniform(0, 1)))
        if index % 2:
            return verify_bfns(f, sampler, p)
        return verify_bfns(f, sampler, p, trials=mc_trials, seed=int(rng.integers(2**31)))
    raise DomainError(f"unknown lemma {lemma!r}")


def run_suite(lemma: str, n_max: int = 8, instances: int = 1000, seed: int = 0,
              mc_trials: int = 4000) -> LemmaVerdict:
    """Check one lemma on generated instances (plus its tight case) and merge."""
    if lemma not in LEMMAS:
        raise DomainError(f"unknown lemma {lemma!r}; choose from {LEMMAS}")
    if lemma == "fmax":
        return nonsubmodularity_witness_fmax()
    verdicts = []
    tight = tight_cases().get(lemma)
    if tight is not None:
        verdicts.append(tight)
    for k in range(instances):
        rng = np.random.default_rng([seed, k])
        v = _suite_instance(lemma, n_max, rng, k, mc_trials)
        if v.witness is not None:
            v.witness["seed"] = [seed, k]
        verdicts.append(v)
    out = merge(verdicts, lemma)
    if tight is not None:
        out.details["tight_slack"] = tight.worst_slack
    return out
