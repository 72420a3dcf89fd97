import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from combodose.stats import (
    BetaParams,
    RngStream,
    beta_cdf,
    draw,
    geometric_mean,
    is_monotone_matrix,
    isotonic_2d,
    posterior_update,
)


def quadrature_beta_cdf(x: float, a: float, b: float) -> float:
    val, _ = integrate.quad(lambda t: stats.beta.pdf(t, a, b), 0.0, x, limit=200)
    return val


class TestBetaCdf:
    def test_uniform(self):
        assert beta_cdf(0.5, BetaParams(1, 1)) == pytest.approx(0.5, abs=1e-12)
        assert beta_cdf(0.3, BetaParams(1, 1)) == pytest.approx(0.3, abs=1e-12)

    def test_quadrature_oracle(self):
        assert beta_cdf(0.3, BetaParams(2, 3)) == pytest.approx(
            quadrature_beta_cdf(0.3, 2, 3), abs=1e-8
        )

    def test_rejects_bad_x(self):
        with pytest.raises(ValueError):
            beta_cdf(1.5, BetaParams(1, 1))
        with pytest.raises(ValueError):
            beta_cdf(float("nan"), BetaParams(1, 1))

    @given(
        a=st.floats(0.1, 50), b=st.floats(0.1, 50),
        x1=st.floats(0, 1), x2=st.floats(0, 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_monotone_and_bounds(self, a, b, x1, x2):
        p = BetaParams(a, b)
        assert beta_cdf(0.0, p) == 0.0
        assert beta_cdf(1.0, p) == pytest.approx(1.0, abs=1e-12)
        lo, hi = sorted((x1, x2))
        assert beta_cdf(lo, p) <= beta_cdf(hi, p) + 1e-12


class TestPosteriorUpdate:
    def test_examples(self):
        assert posterior_update(BetaParams(1, 1), 3, 1) == BetaParams(2, 3)
        assert posterior_update(BetaParams(1, 1), 0, 0) == BetaParams(1, 1)
        assert posterior_update(BetaParams(0.5, 9.5), 6, 2) == BetaParams(2.5, 13.5)

    def test_rejects(self):
        with pytest.raises(ValueError):
            posterior_update(BetaParams(1, 1), 3, 4)

    @given(
        n1=st.integers(0, 20), n2=st.integers(0, 20),
        frac1=st.floats(0, 1), frac2=st.floats(0, 1),
    )
    @settings(max_examples=80, deadline=None)
    def test_commutes_with_splitting(self, n1, n2, frac1, frac2):
        y1, y2 = int(n1 * frac1), int(n2 * frac2)
        prior = BetaParams(1.5, 2.5)
        split = posterior_update(posterior_update(prior, n1, y1), n2, y2)
        joint = posterior_update(prior, n1 + n2, y1 + y2)
        assert split == joint


def brute_force_isotonic_2x2(values, weights):
    """Exhaustive minimiser over monotone 2x2 matrices with entries drawn
    from all weighted subset averages (the optimum's level values)."""
    cells = [(i, j) for i in range(2) for j in range(2)]
    candidates = set()
    for mask in range(1, 16):
        sel = [cells[k] for k in range(4) if mask >> k & 1]
        w = sum(weights[c] for c in sel)
        candidates.add(sum(values[c] * weights[c] for c in sel) / w)
    best, best_obj = None, np.inf
    cand = sorted(candidates)
    for a in cand:
        for b in cand:
            if b < a:
                continue
            for c in cand:
                if c < a:
                    continue
                for d in cand:
                    if d < b or d < c:
                        continue
                    m = np.array([[a, b], [c, d]])
                    obj = float((weights * (m - values) ** 2).sum())
                    if obj < best_obj:
                        best, best_obj = m, obj
    return best, best_obj


class TestIsotonic2d:
    def test_fixed_point(self):
        m = np.array([[0.1, 0.2], [0.2, 0.4]])
        out = isotonic_2d(m, np.ones_like(m))
        assert np.allclose(out, m, atol=1e-9)

    def test_constant(self):
        m = np.full((3, 3), 0.3)
        assert np.allclose(isotonic_2d(m, np.ones_like(m)), m, atol=1e-12)

    def test_against_exhaustive_2x2(self):
        values = np.array([[0.4, 0.2], [0.1, 0.5]])
        weights = np.ones_like(values)
        got = isotonic_2d(values, weights)
        _, best_obj = brute_force_isotonic_2x2(values, weights)
        obj = float((weights * (got - values) ** 2).sum())
        assert obj <= best_obj + 1e-6
        assert is_monotone_matrix(got)

    def test_idempotent(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            v = rng.random((3, 3))
            w = rng.random((3, 3)) + 0.1
            once = isotonic_2d(v, w)
            twice = isotonic_2d(once, w)
            assert np.allclose(once, twice, atol=1e-7)
            assert is_monotone_matrix(once)

    def test_oracle_random_instances(self):
        cvxpy = pytest.importorskip("cvxpy")
        rng = np.random.default_rng(7)
        for _ in range(25):
            shape = rng.choice([2, 3]), rng.choice([2, 3])
            v = rng.random(shape)
            w = rng.random(shape) + 0.05
            got = isotonic_2d(v, w)
            obj = float((w * (got - v) ** 2).sum())
            x = cvxpy.Variable(shape)
            cons = []
            if shape[0] > 1:
                cons.append(cvxpy.diff(x, axis=0) >= 0)
            if shape[1] > 1:
                cons.append(cvxpy.diff(x, axis=1) >= 0)
            prob = cvxpy.Problem(
                cvxpy.Minimize(cvxpy.sum(cvxpy.multiply(w, cvxpy.square(x - v)))), cons
            )
            ref = prob.solve()
            assert obj <= ref + 1e-6

    def test_rejects_zero_weights(self):
        with pytest.raises(ValueError):
            isotonic_2d(np.ones((2, 2)), np.zeros((2, 2)))


class TestGeometricMean:
    def test_examples(self):
        assert geometric_mean([0.4, 0.4, 0.4, 0.4]) == pytest.approx(0.4)
        assert geometric_mean([0.5, 0.0, 0.9, 0.9]) == 0.0
        assert geometric_mean([0.2, 0.8]) == pytest.approx(0.4)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            geometric_mean([])

    @given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=10))
    @settings(max_examples=60, deadline=None)
    def test_le_arithmetic(self, xs):
        assert geometric_mean(xs) <= np.mean(xs) + 1e-12


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(42, (1, 2)).generator().random(10)
        b = RngStream(42, (1, 2)).generator().random(10)
        assert np.array_equal(a, b)

    def test_distinct_streams(self):
        a = RngStream(42, (1,)).generator().random(10)
        b = RngStream(42, (2,)).generator().random(10)
        assert not np.array_equal(a, b)

    def test_draw_bernoulli_degenerate(self):
        s = RngStream(0)
        assert draw(s, "bernoulli", p=0.0) == 0
        assert draw(s, "bernoulli", p=1.0) == 1

    def test_draw_validates(self):
        with pytest.raises(ValueError):
            draw(RngStream(0), "bernoulli", p=1.5)
        with pytest.raises(ValueError):
            draw(RngStream(0), "nope")

    def test_beta_mean(self):
        g = RngStream(7, (0,)).generator()
        xs = g.beta(2, 3, size=100_000)
        assert xs.mean() == pytest.approx(0.4, abs=0.005)
