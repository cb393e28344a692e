import math

import numpy as np
import pytest
from scipy.integrate import quad

from skrs.gaussian import HermiteRule, LinearModelAnalytics, gaussian_quad_exp_moment
from skrs.spins import SpinDistribution

RADEMACHER = SpinDistribution.rademacher()
UNIFORM = SpinDistribution.uniform()


def _gauss_expect(f, center=0.0):
    return quad(lambda g: f(g) * math.exp(-0.5 * g * g) / math.sqrt(2 * math.pi),
                center - 30, center + 30, points=[center], epsabs=0, epsrel=1e-13, limit=400)[0]


@pytest.mark.parametrize("order", [1, 2, 61, 121])
def test_hermite_rule_moments(order):
    rule = HermiteRule.of_order(order)
    assert abs(rule.weights.sum() - 1.0) < 1e-12
    assert abs(rule.expect(rule.nodes)) < 1e-12
    if order > 1:
        assert abs(rule.expect(rule.nodes**2) - 1.0) < 1e-10


def test_q_lin_rademacher_is_mean_tanh_squared():
    la = LinearModelAnalytics.build(RADEMACHER, 0.3)
    for x in (0.0, 0.2, 0.7):
        ref = _gauss_expect(lambda g: math.tanh(0.3 + math.sqrt(x) * g) ** 2)
        assert la.q_lin(x) == pytest.approx(ref, abs=1e-10)


def test_q_lin_trivial_points():
    assert LinearModelAnalytics.build(UNIFORM, 0.0).q_lin(0.0) == pytest.approx(0.0, abs=1e-15)
    assert LinearModelAnalytics.build(RADEMACHER, 0.3).q_lin(0.0) == pytest.approx(math.tanh(0.3) ** 2, abs=1e-15)


@pytest.mark.parametrize("dist", [RADEMACHER, UNIFORM], ids=["rademacher", "uniform"])
def test_q_lin_in_unit_interval_and_positive_with_field(dist):
    x = np.linspace(0.0, 4.0, 41)
    q = LinearModelAnalytics.build(dist, 0.4).q_lin(x)
    assert np.all(q >= 0.0) and np.all(q <= 1.0)
    assert q[0] > 0.0


def test_negative_x_rejected():
    la = LinearModelAnalytics.build(RADEMACHER, 0.3)
    for fn in (la.q_lin, la.alpha_lin, la.dq_lin_dx):
        with pytest.raises(ValueError):
            fn(-0.1)


def test_alpha_lin_at_zero():
    la = LinearModelAnalytics.build(RADEMACHER, 0.3)
    assert la.alpha_lin(0.0) == pytest.approx(math.log(math.cosh(0.3)), abs=1e-15)


def test_alpha_lin_monte_carlo_oracle():
    la = LinearModelAnalytics.build(RADEMACHER, 0.0)
    g = np.random.default_rng(123).standard_normal(1_000_000)
    vals = -0.5 + np.log(np.cosh(g))
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(la.alpha_lin(1.0) - vals.mean()) <= 3 * se


@pytest.mark.parametrize("dist", [RADEMACHER, UNIFORM], ids=["rademacher", "uniform"])
@pytest.mark.parametrize("h", [0.0, 0.3, 1.0])
def test_alpha_lin_slope_is_minus_half_q_lin(dist, h):
    la = LinearModelAnalytics.build(dist, h)
    e = 1e-4
    for x in (0.1, 0.5, 0.8):
        fd = (la.alpha_lin(x + e) - la.alpha_lin(x - e)) / (2 * e)
        assert fd == pytest.approx(-0.5 * la.q_lin(x), abs=1e-6)


@pytest.mark.parametrize("dist", [RADEMACHER, UNIFORM], ids=["rademacher", "uniform"])
@pytest.mark.parametrize("h", [0.0, 0.3, 1.0])
def test_dq_lin_dx_matches_finite_difference(dist, h):
    la = LinearModelAnalytics.build(dist, h)
    e = 1e-4
    for x in (0.05, 0.4, 0.8):
        fd = (la.q_lin(x + e) - la.q_lin(x - e)) / (2 * e)
        assert la.dq_lin_dx(x) == pytest.approx(fd, abs=1e-6)
    fd0 = (-3 * la.q_lin(0.0) + 4 * la.q_lin(e) - la.q_lin(2 * e)) / (2 * e)
    assert la.dq_lin_dx(0.0) == pytest.approx(fd0, abs=1e-6)


def test_fourth_cumulant_form_only_for_two_point_spins():
    rad = LinearModelAnalytics.build(RADEMACHER, 0.3)
    uni = LinearModelAnalytics.build(UNIFORM, 0.3)
    assert rad.dq_lin_dx_fourth_cumulant_form(0.4) == pytest.approx(rad.dq_lin_dx(0.4), abs=1e-12)
    assert abs(uni.dq_lin_dx_fourth_cumulant_form(0.4) - uni.dq_lin_dx(0.4)) > 1e-2


def test_lipschitz_bound():
    la = LinearModelAnalytics.build(RADEMACHER, 0.3)
    c = la.lipschitz_bound(4.0)
    assert 0.0 < c < math.inf
    assert c >= abs(la.dq_lin_dx(0.0))
    assert np.all(np.abs(la.dq_lin_dx(np.linspace(0, 4, 401))) <= c)
    assert abs(la.lipschitz_bound(4.0, n_grid=4001) - c) / c < 0.01
    # regression lock
    assert c == pytest.approx(0.7162607057030901, rel=1e-9)


# tanh has complex poles at distance pi/2 from the real axis, so for two-point
# spins a 61-node rule loses digits once sqrt(x) grows past about 0.95.
_TANH_POLES = pytest.mark.xfail(strict=True, reason="order 61 is only ~1e-4 accurate for tanh at large x")


@pytest.mark.parametrize("dist", [pytest.param(RADEMACHER, id="rademacher", marks=_TANH_POLES),
                                  pytest.param(UNIFORM, id="uniform")])
@pytest.mark.parametrize("h", [0.0, 0.5, 1.0])
def test_order_61_matches_order_121(dist, h):
    x = np.linspace(0.0, 4.0, 41)
    a = LinearModelAnalytics.build(dist, h, 61)
    b = LinearModelAnalytics.build(dist, h, 121)
    np.testing.assert_allclose(a.q_lin(x), b.q_lin(x), atol=1e-9, rtol=0)
    np.testing.assert_allclose(a.alpha_lin(x), b.alpha_lin(x), atol=1e-9, rtol=0)


@pytest.mark.parametrize("h", [0.0, 0.5, 1.0])
def test_order_61_matches_order_121_two_point_small_x(h):
    x = np.linspace(0.0, 0.8, 17)
    a = LinearModelAnalytics.build(RADEMACHER, h, 61)
    b = LinearModelAnalytics.build(RADEMACHER, h, 121)
    np.testing.assert_allclose(a.q_lin(x), b.q_lin(x), atol=1e-9, rtol=0)
    np.testing.assert_allclose(a.alpha_lin(x), b.alpha_lin(x), atol=1e-9, rtol=0)


def test_quad_exp_moment_closed_form():
    assert gaussian_quad_exp_moment(0.0, 0.0) == 1.0
    assert gaussian_quad_exp_moment(1.0, 0.0) == pytest.approx(math.exp(0.5), rel=1e-15)
    for u, v in [(0.7, 0.2), (-1.3, -0.5), (2.0, 0.35)]:
        ref = _gauss_expect(lambda g: math.exp(u * g + v * g * g), center=u / (1 - 2 * v))
        assert gaussian_quad_exp_moment(u, v) == pytest.approx(ref, rel=1e-10)
    with pytest.raises(ValueError):
        gaussian_quad_exp_moment(0.0, 0.5)


def test_quad_exp_moment_bound():
    for v in np.linspace(0.0, 0.2, 9):
        for u in np.linspace(-5, 5, 41):
            m = gaussian_quad_exp_moment(u, v)
            assert m <= math.exp(u * u) / math.sqrt(1 - 2 * v) * (1 + 1e-12)
            if v == 0.2:
                assert m / math.exp(u * u) <= 1 / math.sqrt(0.6) * (1 + 1e-12)
