from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from capspectral import semiclassical as sc
from capspectral.semiclassical import WeightParams


def exact_moment(alpha, a, b, k):
    """int_alpha^1 x^k (x - alpha)^a (1 - x^2)^(b/2) dx in rational arithmetic (alpha taken exactly)."""
    al = Fraction(alpha)
    coeffs = [Fraction(0)] * k + [Fraction(1)]
    for factor in [[-al, Fraction(1)]] * a + [[Fraction(1), Fraction(0), Fraction(-1)]] * (b // 2):
        out = [Fraction(0)] * (len(coeffs) + len(factor) - 1)
        for i, c in enumerate(coeffs):
            for j, d in enumerate(factor):
                out[i + j] += c * d
        coeffs = out
    return float(sum(c / (j + 1) * (1 - al ** (j + 1)) for j, c in enumerate(coeffs)))


def stieltjes_mp(alpha, a, b, n_max, m=80, dps=40):
    """Reference recurrence: Stieltjes in extended precision on a Gauss-Legendre rule exact for the weight."""
    with mp.workdps(dps):
        T, Wt = mp.gauss_quadrature(m, "legendre")
        al0 = mp.mpf(alpha)
        x = [al0 + (1 - al0) * (t + 1) / 2 for t in T]
        w = [wi * (xi - al0) ** a * (1 - xi**2) ** (b // 2) for wi, xi in zip(Wt, x)]
        tot = sum(w)
        w = [wi / tot for wi in w]
        al, be = [], []
        p_prev, p = [mp.mpf(0)] * m, [mp.mpf(1)] * m
        for n in range(n_max + 1):
            an = sum(wi * xi * pi * pi for wi, xi, pi in zip(w, x, p))
            q = [(xi - an) * pi - (be[-1] * qi if n else 0) for xi, pi, qi in zip(x, p, p_prev)]
            bn = mp.sqrt(sum(wi * qi * qi for wi, qi in zip(w, q)))
            al.append(an)
            be.append(bn)
            p_prev, p = p, [qi / bn for qi in q]
        return np.array(al, dtype=float), np.array(be, dtype=float)


def test_normalization_closed_forms():
    assert sc.normalization(WeightParams(0.2, 0, 0)) == pytest.approx(0.8, rel=1e-13)
    assert sc.normalization(WeightParams(0.2, 1, 0)) == pytest.approx(0.32, rel=1e-13)


def test_normalization_matches_adaptive_integral():
    # the closed form (1 - a) - (1 - a^3) / 3 gives 0.469333..., checked numerically
    ref = quad(lambda x: 1 - x * x, 0.2, 1, epsabs=1e-15)[0]
    assert sc.normalization(WeightParams(0.2, 0, 2)) == pytest.approx(ref, rel=1e-13)
    assert ref == pytest.approx(0.8 - (1 - 0.008) / 3, rel=1e-14)


@given(st.floats(-0.95, 0.95), st.integers(0, 4), st.integers(0, 6))
def test_normalization_property(alpha, a, half_b):
    exact = exact_moment(alpha, a, 2 * half_b, 0)
    assert sc.normalization(WeightParams(alpha, a, 2 * half_b)) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("args", [(1.0, 0, 0), (-1.0, 0, 0), (0.2, -1, 0), (0.2, 0, 3), (0.2, 0, -2)])
def test_invalid_params(args):
    with pytest.raises(sc.ParameterError):
        WeightParams(*args)


def test_legendre_midpoints():
    tab = sc.recurrence_table(WeightParams(0.2, 0, 0), 3)
    np.testing.assert_allclose(tab.alphas[:4], 0.6, rtol=0, atol=1e-14)


@pytest.mark.parametrize("alpha,a,b", [(0.2, 1, 2), (-0.5, 0, 4), (0.8, 2, 10), (0.2, 3, 0)])
def test_recurrence_matches_stieltjes_oracle(alpha, a, b):
    tab = sc.recurrence_table(WeightParams(alpha, a, b), 40)
    al, be = stieltjes_mp(alpha, a, b, 40)
    np.testing.assert_allclose(tab.alphas[:41], al, rtol=1e-11)
    np.testing.assert_allclose(tab.betas[:41], be, rtol=1e-11)


@given(st.floats(-0.9, 0.9), st.integers(0, 3), st.integers(0, 20), st.integers(1, 60))
def test_betas_positive_and_midpoints_inside(alpha, a, half_b, n_max):
    tab = sc.recurrence_table(WeightParams(alpha, a, 2 * half_b), n_max)
    assert np.all(tab.betas > 0)
    assert np.all((tab.alphas > alpha) & (tab.alphas < 1))
    assert tab.omega > 0


def test_gram_against_adaptive_quadrature():
    params = WeightParams(0.2, 1, 2)
    tab = sc.recurrence_table(params, 21)
    om = sc.normalization(params)
    G = np.empty((21, 21))
    for n in range(21):
        for m in range(n + 1):
            f = lambda x: sc.eval_R(tab, n, x) * sc.eval_R(tab, m, x) * params.weight(x) / om
            G[n, m] = G[m, n] = quad(f, 0.2, 1, limit=200, epsabs=1e-13)[0]
    np.testing.assert_allclose(G, np.eye(21), atol=1e-10)


def test_orthonormality_with_gauss_rule():
    tab = sc.family(-0.3, 2, 6, 70)
    rule = sc.gauss_rule(tab, 64)
    R = sc.eval_R_all(tab, 20, rule.nodes)[0]
    G = (R * rule.weights / tab.omega) @ R.T
    np.testing.assert_allclose(G, np.eye(21), atol=1e-10)


def test_large_parameter_gram():
    # b = 2000: naive weights underflow; the log-weight path keeps the Gram exact
    tab = sc.family(0.95, 1, 2000, 60)
    rule = sc.gauss_rule(tab, 61)
    W = sc.eval_weighted_R_all(tab, 60, rule)[0]
    np.testing.assert_allclose(W @ W.T, np.eye(61), atol=1e-12)


def test_single_point_rule():
    rule = sc.gauss_rule(WeightParams(0.2, 0, 0), 1)
    assert rule.nodes[0] == pytest.approx(0.6, abs=1e-15)
    assert rule.weights[0] == pytest.approx(0.8, rel=1e-14)


def test_eight_point_rule_exactness():
    rule = sc.gauss_rule(WeightParams(0.2, 1, 0), 8)
    for k in range(16):
        assert np.dot(rule.weights, rule.nodes**k) == pytest.approx(exact_moment(0.2, 1, 0, k), rel=1e-12)


@given(st.floats(-0.9, 0.9), st.integers(0, 3), st.integers(0, 8), st.integers(1, 32))
def test_gauss_exactness_property(alpha, a, half_b, m):
    params = WeightParams(alpha, a, 2 * half_b)
    rule = sc.gauss_rule(params, m)
    assert np.all(np.diff(rule.nodes) > 0)
    assert rule.nodes[0] > alpha and rule.nodes[-1] < 1
    assert rule.weights.sum() == pytest.approx(sc.normalization(params), rel=1e-12)
    for k in range(2 * m):
        # relative to the integral of |x^k| w, which differs from the moment only for odd k and alpha < 0
        scale = exact_moment(alpha, a, 2 * half_b, k) if alpha >= 0 or k % 2 == 0 else \
            quad(lambda x: abs(x) ** k * params.weight(x), alpha, 1, epsabs=0)[0]
        exact = exact_moment(alpha, a, 2 * half_b, k)
        assert abs(np.dot(rule.weights, rule.nodes**k) - exact) <= 1e-11 * scale


def test_eval_R_low_degrees():
    params = WeightParams(0.2, 0, 0)
    tab = sc.recurrence_table(params, 2)
    x = np.linspace(0.2, 1, 7)
    np.testing.assert_array_equal(sc.eval_R(params, 0, x), 1.0)
    np.testing.assert_allclose(sc.eval_R(params, 1, x), (x - 0.6) / tab.betas[0], atol=1e-14)


def test_eval_R_derivative_finite_difference():
    params = WeightParams(0.2, 1, 2)
    h = 1e-5
    fd = (sc.eval_R(params, 5, 0.5 + h) - sc.eval_R(params, 5, 0.5 - h)) / (2 * h)
    assert sc.eval_R(params, 5, 0.5, 1) == pytest.approx(fd, abs=1e-7)


@pytest.mark.parametrize("n", [3, 9, 17])
def test_derivative_consistency(n):
    params = WeightParams(0.2, 1, 4)
    x = np.linspace(0.25, 0.95, 41)
    h = 1e-5
    for d in (1, 2):
        fd = (sc.eval_R(params, n, x + h, d - 1) - sc.eval_R(params, n, x - h, d - 1)) / (2 * h)
        exact = sc.eval_R(params, n, x, d)
        assert np.max(np.abs(exact - fd)) <= 1e-6 * max(1.0, np.max(np.abs(exact)))


def test_recurrence_consistency(rng):
    tab = sc.family(0.2, 2, 6, 32)
    x = rng.uniform(0.2, 1, 100)
    R = sc.eval_R_all(tab, 31, x)[0]
    al, be = tab.alphas, tab.betas
    for n in range(31):
        rhs = be[n] * R[n + 1] + al[n] * R[n] + (be[n - 1] * R[n - 1] if n else 0)
        assert np.all(np.abs(x * R[n] - rhs) <= 1e-12 * np.maximum(1, np.abs(R[n])))


def test_table_extent_error():
    tab = sc.recurrence_table(WeightParams(0.2, 0, 0), 5)
    with pytest.raises(sc.TableExtentError):
        sc.eval_R_all(tab, 9, 0.5)
    with pytest.raises(sc.TableExtentError):
        sc.gauss_rule(tab, 12)


def test_bad_derivative_order():
    with pytest.raises(ValueError):
        sc.eval_R(WeightParams(0.2, 0, 0), 2, 0.5, 3)
