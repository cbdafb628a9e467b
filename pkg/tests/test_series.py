import math

import numpy as np
import pytest

from cmcfol.errors import SeriesError
from cmcfol.series import Axis, BoundaryChart, Series, cauchy, matrix_inverse


def _random(rng, order, shape=(), a0=None):
    c = rng.normal(size=(order + 1,) + shape)
    if a0 is not None:
        c[0] = a0
    return Series(c)


def test_exp_example():
    s = Series.from_list([0, 1, 0, 0, 0, 0]).exp()
    assert np.allclose(s.coeffs, [1 / math.factorial(k) for k in range(6)], atol=1e-15)


def test_recip_of_product_with_recip(rng):
    for _ in range(20):
        a = _random(rng, 7, a0=2.0)
        one = (a * a.recip()).recip()
        assert np.allclose(one.coeffs, [1] + [0] * 7, atol=1e-12)


def test_sqrt_binomial():
    s = Series.from_list([1, 0, -1, 0, 0, 0, 0]).sqrt()
    assert np.allclose(s.coeffs, [1, 0, -0.5, 0, -0.125, 0, -1 / 16], atol=1e-15)


def test_sqrt_squares_back(rng):
    a = _random(rng, 8, a0=3.0)
    assert np.allclose((a.sqrt() * a.sqrt()).coeffs, a.coeffs, atol=1e-12)


def test_log_and_power(rng):
    a = _random(rng, 6, shape=(4,), a0=np.array([0.5, 1, 2, 3]))
    assert np.allclose(a.log().exp().coeffs, a.coeffs, atol=1e-11)
    assert np.allclose(a.power(0.5).coeffs, a.sqrt().coeffs, atol=1e-12)
    assert np.allclose(a.power(-1.5).coeffs, (a * a * a).sqrt().recip().coeffs, atol=1e-10)
    assert np.allclose((a ** 3).coeffs, (a * a * a).coeffs, atol=1e-12)
    assert np.allclose((a ** -2).coeffs, (a * a).recip().coeffs, atol=1e-11)


def test_ring_axioms(rng):
    for _ in range(50):
        a, b, c = (_random(rng, 6, shape=(3,)) for _ in range(3))
        assert np.allclose(((a * b) * c).coeffs, (a * (b * c)).coeffs, atol=1e-12)
        assert np.allclose((a * (b + c)).coeffs, (a * b + a * c).coeffs, atol=1e-12)
        assert np.allclose((a * b).coeffs, (b * a).coeffs, atol=1e-12)
        assert np.allclose((a - a).coeffs, 0)


def test_cauchy_against_polynomial_product(rng):
    a, b = rng.normal(size=6), rng.normal(size=6)
    assert np.allclose(cauchy(a, b), np.convolve(a, b)[:6])


def test_matrix_inverse(rng):
    G = rng.normal(size=(6, 3, 3)) * 0.3
    G[0] = np.eye(3) * 2 + G[0] @ G[0].T
    X = matrix_inverse(G)
    prod = cauchy(G, X, lambda x, y: x @ y)
    assert np.allclose(prod[0], np.eye(3)) and np.allclose(prod[1:], 0, atol=1e-12)


def test_truncation_is_causal(rng):
    a = _random(rng, 9, a0=1.5)
    low = a.truncate(4)
    for op in ("exp", "log", "sqrt", "recip"):
        assert np.array_equal(getattr(a, op)().coeffs[:5], getattr(low, op)().coeffs)


def test_errors():
    with pytest.raises(SeriesError, match="order mismatch"):
        Series.from_list([1, 2]) + Series.from_list([1, 2, 3])
    with pytest.raises(SeriesError):
        Series.from_list([0, 1]).recip()
    with pytest.raises(SeriesError):
        Series.from_list([-1, 1]).sqrt()
    with pytest.raises(SeriesError):
        Series.from_list([0, 1]).log()
    with pytest.raises(SeriesError):
        Series.from_list([1, 1]).compose(Series.from_list([1, 1]))
    with pytest.raises(SeriesError):
        Series.from_list([1.0]).d_r()
    with pytest.raises(SeriesError):
        Series.from_list([1, 2]).truncate(4)


def test_compose_and_evaluate():
    # exp(r) o (r + r^2) = exp(r + r^2)
    e = Series.from_list([0, 1, 0, 0, 0, 0]).exp()
    inner = Series.from_list([0, 1, 1, 0, 0, 0])
    assert np.allclose(e.compose(inner).coeffs, inner.exp().coeffs, atol=1e-15)
    assert e.evaluate(0.01) == pytest.approx(sum(0.01**k / math.factorial(k) for k in range(6)))
    assert np.allclose(e.compose_scale(2.0).coeffs, Series.from_list([0, 2, 0, 0, 0, 0]).exp().coeffs)


def test_structural_ops():
    s = Series.from_list([1, 2, 3, 4])
    assert s.d_r().coeffs.tolist() == [2, 6, 12]
    assert s.mul_r(2).coeffs.tolist() == [0, 0, 1, 2]
    assert s.pad(5).coeffs.tolist() == [1, 2, 3, 4, 0, 0]
    assert (2 - s).coeffs.tolist() == [1, -2, -3, -4]
    assert (s / 2).coeffs.tolist() == [0.5, 1, 1.5, 2]


def test_boundary_chart_derivatives():
    periodic = BoundaryChart(2, [Axis(0, 2 * np.pi, 32, periodic=True), None])
    x = periodic.nodes()[..., 0]
    assert np.max(np.abs(periodic.derivative(np.sin(x), 0) - np.cos(x))) < 1e-6
    assert np.all(periodic.derivative(np.sin(x), 1) == 0)
    clamped = BoundaryChart(1, [Axis(0, 1, 41)])
    y = clamped.nodes()[..., 0]
    assert np.allclose(clamped.derivative(y**2, 0), 2 * y, atol=1e-12)
    with pytest.raises(SeriesError):
        Axis(0, 1, 4, periodic=True)
    with pytest.raises(SeriesError):
        BoundaryChart(0)
