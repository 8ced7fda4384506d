import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    concave_closure_dual,
    f_max_bruteforce,
    fstar_bruteforce,
    g_star_half_bruteforce,
    is_submodular_pairs,
    multilinear_bruteforce,
)
from prophetlab import generators as gen
from prophetlab.errors import CapacityError, DomainError
from prophetlab.setfn import (
    DirectedCut,
    ExplicitSetFunction,
    additive,
    concave_closure,
    continuous_relaxation,
    f_max_table,
    g_star_half,
    gap_report,
    is_monotone,
    is_subadditive,
    is_submodular,
    marginal,
    multilinear_exact,
    multilinear_mc,
    setfn_from_json,
    submodularity_violation,
    subset_sum,
    unit_subadditive,
)


def four_path():
    return DirectedCut(4, ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)), labels=tuple("uvwx")).to_explicit()


def table_fn(n, seed):
    rng = np.random.default_rng(seed)
    return ExplicitSetFunction(n, rng.uniform(0, 1, 1 << n))


class TestValue:
    def test_cut_values(self, cut2):
        assert cut2(cut2.mask("u")) == 1
        assert cut2(0) == 0
        assert cut2(cut2.mask("uv")) == 0

    def test_out_of_range(self, cut2):
        with pytest.raises(DomainError):
            cut2.value(4)
        with pytest.raises(DomainError):
            cut2.value(-1)

    def test_table_must_be_total_and_nonnegative(self):
        with pytest.raises(DomainError):
            ExplicitSetFunction(2, [0, 1, 2])
        with pytest.raises(DomainError):
            ExplicitSetFunction(1, [0, -1])
        with pytest.raises(CapacityError):
            ExplicitSetFunction(21, np.zeros(2))


class TestMarginal:
    def test_cut(self, cut2):
        assert marginal(cut2, 0, 0) == 1
        assert marginal(cut2, cut2.mask("u"), 1) == -1

    def test_additive(self):
        f = additive([0.5, 2.0, 3.0])
        assert marginal(f, 0b101, 1) == 2.0
        assert marginal(f, 0, 1) == 2.0

    def test_element_in_set(self, cut2):
        with pytest.raises(DomainError):
            marginal(cut2, 0b01, 0)


class TestPredicates:
    def test_cut(self, cut2):
        assert is_submodular(cut2)
        assert not is_monotone(cut2)

    def test_fmax_of_path_not_submodular(self):
        fm = f_max_table(four_path())
        bad = submodularity_violation(fm)
        assert bad is not None
        m = fm.mask
        # worst violation: u added to {v} versus {v, w}
        assert (bad.S, bad.T, bad.e) == (m("v"), m("vw"), 0)
        assert bad.S & ~bad.T == 0 and not bad.T >> bad.e & 1
        assert bad.lhs == 0 and bad.rhs == 1

    def test_zero_function(self):
        f = ExplicitSetFunction(3, np.zeros(8))
        assert is_submodular(f) and is_monotone(f) and is_subadditive(f)

    def test_subadditive_examples(self):
        assert is_subadditive(unit_subadditive(5))
        assert not is_subadditive(ExplicitSetFunction(2, [0, 1, 1, 3]))

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_pairwise_definition(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        f = gen.random_nonneg_submodular(n, rng) if seed % 2 else table_fn(n, seed)
        assert is_submodular(f) == is_submodular_pairs(f.values, n)

    def test_generators_have_their_properties(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 8))
            assert is_submodular(gen.random_cut(n, rng))
            assert is_submodular(gen.random_mixture(n, rng))
            cov = gen.random_coverage(n, rng)
            assert is_submodular(cov) and is_monotone(cov)
            sub = gen.random_monotone_subadditive(n, rng)
            assert is_monotone(sub) and is_subadditive(sub)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            is_submodular(unit_subadditive(15))


class TestMultilinear:
    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.25, 0.5])
    def test_eps_cut(self, cut2, eps):
        assert multilinear_exact(cut2, [eps, 1 - eps]) == pytest.approx(eps**2, abs=1e-12)

    def test_quarter(self, cut2):
        assert multilinear_exact(cut2, [0.25, 0.25]) == pytest.approx(0.1875, abs=1e-12)

    def test_indicator_vector(self):
        f = table_fn(5, 3)
        for A in range(32):
            x = [(A >> i) & 1 for i in range(5)]
            assert multilinear_exact(f, x) == pytest.approx(f(A), abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_against_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        f = table_fn(n, seed)
        x = rng.uniform(0, 1, n)
        assert multilinear_exact(f, x) == pytest.approx(multilinear_bruteforce(f.values, x), abs=1e-12)

    def test_bad_vector(self, cut2):
        with pytest.raises(DomainError):
            multilinear_exact(cut2, [0.5, 1.5])
        with pytest.raises(DomainError):
            multilinear_exact(cut2, [0.5])


class TestMonteCarlo:
    def test_cut_half(self, cut2):
        est = multilinear_mc(cut2, [0.5, 0.5], 100_000, seed=7)
        assert abs(est.mean - 0.25) <= 3 * est.stderr

    def test_zero_vector(self, cut2):
        est = multilinear_mc(cut2, [0, 0], 1000, seed=1)
        assert est.mean == cut2(0) and est.stderr == 0

    def test_coverage(self, rng):
        f = gen.random_coverage(6, rng)
        x = rng.uniform(0, 1, 6)
        est = multilinear_mc(f, x, 50_000, seed=3)
        assert abs(est.mean - multilinear_exact(f, x)) <= 3 * est.stderr

    def test_deterministic(self, cut2):
        a = multilinear_mc(cut2, [0.3, 0.6], 5000, seed=11)
        b = multilinear_mc(cut2, [0.3, 0.6], 5000, seed=11)
        assert a == b

    def test_coverage_rate(self):
        """Within 4 standard errors on at least 99% of seeded runs."""
        f = gen.random_mixture(5, np.random.default_rng(0))
        x = [0.2, 0.7, 0.5, 0.9, 0.1]
        exact = multilinear_exact(f, x)
        hits = sum(abs(e.mean - exact) <= 4 * e.stderr
                   for e in (multilinear_mc(f, x, 2000, seed=s) for s in range(300)))
        assert hits >= 297

    def test_trials(self, cut2):
        with pytest.raises(DomainError):
            multilinear_mc(cut2, [0.5, 0.5], 0)


class TestFMax:
    def test_path_values(self):
        fm = f_max_table(four_path())
        m = fm.mask
        assert fm(m("uvw")) == 2
        assert fm(m("uv")) == 1 and fm(m("vw")) == 1 and fm(m("v")) == 1

    def test_monotone_fixed_point(self, rng):
        f = gen.random_coverage(6, rng).to_explicit()
        assert np.array_equal(f_max_table(f).values, f.values)

    @pytest.mark.parametrize("seed", range(5))
    def test_against_bruteforce(self, seed):
        f = table_fn(5, seed)
        fm = f_max_table(f)
        assert np.allclose(fm.values, f_max_bruteforce(f.values, 5))
        assert is_monotone(fm)


class TestConcaveClosure:
    def test_cut_half(self, cut2):
        assert concave_closure(cut2, [0.5, 0.5]) == pytest.approx(0.5, abs=1e-9)

    def test_cut_eps(self, cut2):
        val, dist = concave_closure(cut2, [0.1, 0.9], return_witness=True)
        assert val == pytest.approx(0.1, abs=1e-9)
        atoms = dict(dist.atoms)
        assert atoms[0b01] == pytest.approx(0.1, abs=1e-9)
        assert atoms[0b10] == pytest.approx(0.9, abs=1e-9)

    def test_indicator(self):
        f = table_fn(4, 2)
        for A in range(16):
            x = [(A >> i) & 1 for i in range(4)]
            assert concave_closure(f, x) == pytest.approx(f(A), abs=1e-9)

    @pytest.mark.parametrize("seed", range(15))
    def test_against_dual_and_witness(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        f = table_fn(n, seed)
        x = rng.uniform(0, 1, n)
        val, dist = concave_closure(f, x, return_witness=True)
        assert val == pytest.approx(concave_closure_dual(f.values, x), abs=1e-7)
        assert np.allclose(dist.marginals(n), x, atol=1e-7)
        assert dist.expectation(f) == pytest.approx(val, abs=1e-7)
        assert multilinear_exact(f, x) <= val + 1e-9

    def test_capacity(self):
        with pytest.raises(CapacityError):
            concave_closure(unit_subadditive(13), [0.5] * 13)


class TestContinuousRelaxation:
    def test_additive(self, rng):
        w = rng.uniform(0, 1, 5)
        x = rng.uniform(0, 1, 5)
        assert continuous_relaxation(additive(w), x) == pytest.approx(float(w @ x), abs=1e-12)

    def test_zero_vector(self, rng):
        f = table_fn(4, 9)
        assert continuous_relaxation(f, np.zeros(4)) <= f(0)

    def test_sandwich_on_coverage(self, rng):
        f = gen.random_coverage(4, rng)
        x = [0.5] * 4
        assert multilinear_exact(f, x) <= concave_closure(f, x) + 1e-9
        assert concave_closure(f, x) <= continuous_relaxation(f, x) + 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_against_bruteforce(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        f = table_fn(n, seed)
        x = rng.uniform(0, 1, n)
        assert continuous_relaxation(f, x) == pytest.approx(fstar_bruteforce(f.values, x), abs=1e-12)


class TestGStarHalf:
    def test_cut(self, cut2):
        val, arg = g_star_half(cut2, [0.5, 0.5], return_argmin=True)
        assert val == pytest.approx(0.25, abs=1e-12)
        assert arg == cut2.mask("u")

    def test_zero(self):
        assert g_star_half(ExplicitSetFunction(3, np.zeros(8)), [0.3, 0.4, 0.9]) == 0

    @pytest.mark.parametrize("seed", range(15))
    def test_against_3n_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 6))
        f = table_fn(n, seed)
        x = rng.uniform(0, 1, n)
        val, arg = g_star_half(f, x, return_argmin=True)
        ref, ref_arg = g_star_half_bruteforce(f.values, x)
        assert val == pytest.approx(ref, abs=1e-12)

    def test_four_times_dominates_closure(self, rng):
        for _ in range(100):
            n = int(rng.integers(2, 9))
            f = gen.random_cut(n, rng, float(rng.uniform(0.2, 0.8))).to_explicit()
            x = rng.uniform(0, 1, n)
            assert concave_closure(f, x) <= 4 * g_star_half(f, x) + 1e-9


class TestGapReport:
    def test_cut(self, cut2):
        r = gap_report(cut2, [0.5, 0.5])
        assert r.F_at_x == pytest.approx(0.25)
        assert r.f_plus == pytest.approx(0.5)
        assert r.f_star_half == pytest.approx(0.25)
        assert r.F_at_half_x == pytest.approx(0.1875)
        assert r.F_max_at_x == pytest.approx(0.5)
        assert r.ratios()["f_plus/F"] == pytest.approx(2.0)

    def test_monotone_ratio(self, rng):
        for _ in range(20):
            f = gen.random_monotone_submodular(5, rng)
            r = gap_report(f, rng.uniform(0, 1, 5))
            assert r.ratios()["f_plus/F"] <= 1 / (1 - 1 / math.e) + 1e-9

    def test_zero_vector(self):
        f = table_fn(3, 4)
        r = gap_report(f, [0, 0, 0])
        for v in (r.F_at_x, r.F_at_half_x, r.f_plus, r.F_max_at_x):
            assert v == pytest.approx(f(0))
        # the min-based relaxations read min over S at the zero vector
        assert r.f_star == pytest.approx(f.values.min())
        assert r.f_star <= r.f_star_half <= r.f_plus + 1e-12

    def test_fmax_heading_gives_same_gap(self, rng):
        """Pushing the f+_max witness down to argmax subsets gives y <= x with
        f+(y) = f+_max(x) and a ratio over F_max at y no smaller than at x."""
        for _ in range(30):
            n = int(rng.integers(2, 6))
            f = gen.random_nonneg_submodular(n, rng)
            fm = f_max_table(f)
            x = rng.uniform(0, 1, n)
            top, dist = concave_closure(fm, x, return_witness=True)
            assert top >= concave_closure(f, x) - 1e-9
            y = np.zeros(n)
            for S, p in dist.atoms:
                T = max((T for T in range(1 << n) if T & ~S == 0), key=lambda T: f(T))
                y += p * np.array([(T >> i) & 1 for i in range(n)])
            y = np.clip(y, 0, 1)
            assert np.all(y <= x + 1e-7)
            assert concave_closure(f, y) == pytest.approx(top, abs=1e-7)
            Fy, Fx = multilinear_exact(fm, y), multilinear_exact(fm, x)
            assert Fy <= Fx + 1e-9
            if Fy > 1e-9:
                assert top / Fy >= top / Fx - 1e-9


class TestJson:
    def test_round_trip(self, rng):
        for f in (gen.random_cut(4, rng), gen.random_coverage(4, rng), gen.random_xos(4, rng),
                  gen.random_budget_additive(4, rng), gen.random_mixture(4, rng)):
            g = setfn_from_json(f.to_json())
            assert np.allclose(g.to_explicit().values, f.to_explicit().values)

    def test_explicit_layout(self, cut2):
        assert cut2.to_json() == {"n": 2, "kind": "explicit", "values": [0.0, 1.0, 0.0, 0.0]}

    def test_cut_shorthand(self):
        f = setfn_from_json({"kind": "directed_cut", "arcs": [[0, 1, 1.0]]})
        assert f.n == 2 and f.to_explicit().values.tolist() == [0, 1, 0, 0]

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            setfn_from_json({"kind": "nope"})


def test_subset_sum():
    a = np.arange(8, dtype=float)
    out = subset_sum(a, 3)
    for S in range(8):
        assert out[S] == sum(a[T] for T in range(8) if T & ~S == 0)


@st.composite
def submodular_and_vector(draw):
    n = draw(st.integers(2, 7))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    f = gen.random_nonneg_submodular(n, rng).normalized()
    x = np.array(draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    return f, x


@settings(max_examples=60, deadline=None)
@given(submodular_and_vector())
def test_relaxation_invariants(case):
    f, x = case
    r = gap_report(f, x)
    assert r.F_at_x <= r.f_plus + 1e-9
    assert r.f_plus <= 4 * r.f_star_half + 1e-9
    assert r.f_star_half <= 50 * r.F_at_half_x + 1e-9
    assert r.F_at_half_x <= r.F_max_at_x + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
def test_fmax_monotone_property(n, seed):
    f = table_fn(n, seed)
    fm = f_max_table(f)
    assert is_monotone(fm)
    assert np.all(fm.values >= f.values)
