import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from skrs.spins import PhiEvaluator, SpinDistribution, make_distribution

SIX_ATOMS = [[-1.0, 0.1], [-0.6, 0.25], [-0.2, 0.15], [0.2, 0.15], [0.6, 0.25], [1.0, 0.1]]
LAWS = {
    "rademacher": SpinDistribution.rademacher(),
    "uniform": SpinDistribution.uniform(),
    "six-atom": SpinDistribution.discrete(SIX_ATOMS),
}


@pytest.fixture(params=sorted(LAWS))
def ev(request):
    return PhiEvaluator(LAWS[request.param])


def test_laws_are_normalized_and_symmetric():
    for dist in LAWS.values():
        w = np.asarray(dist.weights)
        s = dist.atom_values
        assert abs(w.sum() - 1.0) < 1e-12
        assert abs(w @ s) < 1e-12
        assert np.all(np.abs(s) <= 1.0)


def test_uniform_default_is_32_nodes():
    assert SpinDistribution.uniform().n_atoms == 32
    with pytest.raises(ValueError):
        SpinDistribution.uniform(7)


@pytest.mark.parametrize("atoms", [
    [[0.5, 1.0]],
    [[-1.0, 0.3], [1.0, 0.7]],
    [[-1.5, 0.5], [1.5, 0.5]],
])
def test_rejects_invalid_laws(atoms):
    with pytest.raises(ValueError):
        SpinDistribution.discrete(atoms)


def test_make_distribution_from_config():
    assert make_distribution("rademacher") == SpinDistribution.rademacher()
    assert make_distribution("uniform", nodes=8).n_atoms == 8
    assert make_distribution("discrete", atoms=SIX_ATOMS).n_atoms == 6
    with pytest.raises(ValueError):
        make_distribution("gaussian")


def test_phi_at_origin_vanishes(ev):
    assert abs(ev.phi(0.0, 0.0)) < 1e-15
    p = ev.partials(0.0, 0.0)
    assert abs(p.du) < 1e-15
    assert abs(p.duv) < 1e-15


def test_phi_rademacher_closed_form():
    ev = PhiEvaluator(LAWS["rademacher"])
    assert ev.phi(1.0, 0.5) == pytest.approx(0.5 + math.log(math.cosh(1.0)), abs=1e-14)


def test_phi_uniform_against_integral():
    ev = PhiEvaluator(LAWS["uniform"])
    ref = math.log(0.5 * quad(lambda s: math.exp(s * s), -1.0, 1.0, epsabs=1e-15)[0])
    assert ev.phi(0.0, 1.0) == pytest.approx(ref, abs=1e-12)


def test_phi_survives_large_arguments(ev):
    val = ev.phi(500.0, 300.0)
    assert math.isfinite(val)
    with pytest.raises(ValueError):
        ev.phi(float("nan"), 0.0)


def test_rademacher_partials():
    ev = PhiEvaluator(LAWS["rademacher"])
    u = np.linspace(-3, 3, 13)
    p = ev.partials(u, 0.4)
    np.testing.assert_allclose(p.du, np.tanh(u), atol=1e-14)
    np.testing.assert_allclose(p.duu, 1 - np.tanh(u) ** 2, atol=1e-14)
    np.testing.assert_allclose(p.dv, 1.0, atol=1e-14)
    np.testing.assert_allclose(p.duv, 0.0, atol=1e-14)


def _fd_partials(ev, u, v, h=1e-4):
    f = ev.phi
    du = (f(u + h, v) - f(u - h, v)) / (2 * h)
    duu = (f(u + h, v) - 2 * f(u, v) + f(u - h, v)) / h**2
    dv = (f(u, v + h) - f(u, v - h)) / (2 * h)
    duv = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4 * h * h)
    # fourth derivative: second difference of the analytic second derivative
    g = lambda a: ev.partials(a, v).duu
    duuuu = (g(u + h) - 2 * g(u) + g(u - h)) / h**2
    return du, duu, dv, duuuu, duv


@pytest.mark.parametrize("u,v", [(0.7, -0.2), (-1.3, 0.5), (0.0, 0.0), (2.0, -1.0)])
def test_partials_match_finite_differences(ev, u, v):
    p = ev.partials(u, v)
    du, duu, dv, duuuu, duv = _fd_partials(ev, u, v)
    assert p.du == pytest.approx(du, abs=1e-6)
    assert p.duu == pytest.approx(duu, abs=1e-6)
    assert p.dv == pytest.approx(dv, abs=1e-6)
    assert p.duuuu == pytest.approx(duuuu, abs=1e-6)
    assert p.duv == pytest.approx(duv, abs=1e-6)


def test_key_identity_on_grid(ev):
    u, v = np.meshgrid(np.linspace(-3, 3, 25), np.linspace(-2, 1, 13))
    p = ev.partials(u, v)
    np.testing.assert_allclose(p.dv - p.duu, p.du**2, atol=1e-10, rtol=0)


@settings(max_examples=60, deadline=None)
@given(u=st.floats(-6, 6), v=st.floats(-4, 2), law=st.sampled_from(sorted(LAWS)))
def test_key_identity_property(u, v, law):
    p = PhiEvaluator(LAWS[law]).partials(u, v)
    assert abs(p.dv - p.duu - p.du**2) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(u=st.floats(-5, 5), v=st.floats(-3, 2), law=st.sampled_from(sorted(LAWS)))
def test_phi_convex_in_u(u, v, law):
    ev = PhiEvaluator(LAWS[law])
    h = 1e-2
    assert ev.phi(u + h, v) - 2 * ev.phi(u, v) + ev.phi(u - h, v) >= -1e-10


def test_psi_factorizes_at_zero_coupling(ev):
    for u, v in [(0.3, -0.1), (1.5, 0.4), (-2.0, -1.0)]:
        assert ev.psi(u, v, 0.0) == pytest.approx(2 * ev.phi(u, v), abs=1e-13)


def test_psi_rademacher_enumeration():
    ev = PhiEvaluator(LAWS["rademacher"])
    u, v, lam = 0.5, 0.0, 0.3
    total = sum(0.25 * math.exp(u * (s + r) + v * (s * s + r * r) + lam * s * r)
                for s in (-1, 1) for r in (-1, 1))
    assert ev.psi(u, v, lam) == pytest.approx(math.log(total), abs=1e-14)


@pytest.mark.parametrize("u,v", [(0.3, -0.1), (1.2, -0.5), (-0.8, 0.2)])
def test_psi_slope_at_zero(ev, u, v):
    eps = 1e-5
    slope = (ev.psi(u, v, eps) - ev.psi(u, v, 0.0)) / eps
    assert slope == pytest.approx(ev.partials(u, v).du ** 2, abs=1e-4)


def test_psi_curvature_between_zero_and_four(ev):
    lam = np.linspace(0.0, 1.0, 21)
    h = 1e-3
    for u in (-2.0, 0.0, 0.7, 3.0):
        for v in (-1.0, 0.0, 0.5):
            diff2 = ev.psi(u, v, lam + h) - 2 * ev.psi(u, v, lam) + ev.psi(u, v, lam - h)
            assert np.all(diff2 >= -1e-10)
            assert np.all(diff2 / h**2 <= 4 + 1e-8)
