"""Gaussian expectations and the linear (one-body) model analytics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from skrs.spins import PhiEvaluator, SpinDistribution

DEFAULT_HERMITE_ORDER = 61
DEFAULT_LIPSCHITZ_XMAX = 4.0
LIPSCHITZ_GRID = 2001
LIPSCHITZ_SAFETY = 1.05


@dataclass(frozen=True)
class HermiteRule:
    """Gauss-Hermite rule normalized for expectations under N(0, 1)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    @classmethod
    def of_order(cls, order: int = DEFAULT_HERMITE_ORDER) -> HermiteRule:
        return _hermite_rule(int(order))

    def expect(self, values) -> np.ndarray:
        """Contract the last axis of ``values`` (indexed by node) with the weights."""
        return np.asarray(values) @ self.weights


@lru_cache(maxsize=None)
def _hermite_rule(order: int) -> HermiteRule:
    if order < 1:
        raise ValueError("Hermite order must be positive")
    x, w = np.polynomial.hermite_e.hermegauss(order)
    # symmetrize so odd moments vanish to roundoff
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    w = w / math.fsum(w)
    x.setflags(write=False)
    w.setflags(write=False)
    return HermiteRule(x, w, order)


def _check_x(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("x must be finite and >= 0")
    return x


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


@dataclass(frozen=True)
class LinearModelAnalytics:
    """Expectations over g ~ N(0,1) of phi and its partials at (h + sqrt(x) g, -x/2).

    Every method accepts scalar or array ``x``.
    """

    ev: PhiEvaluator
    rule: HermiteRule = field(default_factory=HermiteRule.of_order)
    h: float = 0.0

    def __post_init__(self) -> None:
        if not (self.h >= 0.0 and math.isfinite(self.h)):
            raise ValueError("field h must be finite and >= 0")

    @classmethod
    def build(cls, dist: SpinDistribution, h: float, hermite_order: int = DEFAULT_HERMITE_ORDER):
        return cls(PhiEvaluator(dist), HermiteRule.of_order(hermite_order), float(h))

    def _args(self, x):
        x = _check_x(x)
        u = self.h + np.sqrt(x)[..., None] * self.rule.nodes
        v = np.broadcast_to((-0.5 * x)[..., None], u.shape)
        return u, v

    def q_lin(self, x):
        u, v = self._args(x)
        du = self.ev.partials(u, v).du
        return _scalar(self.rule.expect(du * du))

    def alpha_lin(self, x):
        u, v = self._args(x)
        return _scalar(self.rule.expect(self.ev.phi(u, v)))

    def dq_lin_dx(self, x):
        """d/dx of q_lin, via Gaussian integration by parts.

        With F = (d_u phi)^2, d/dx E F(h + sqrt(x) g, -x/2) = E[F_uu - F_v] / 2,
        which expands to E[phi_uu^2 + phi_u phi_uuu - phi_u phi_uv].
        """
        u, v = self._args(x)
        p = self.ev.partials(u, v)
        integrand = p.duu**2 + p.du * p.duuu - p.du * p.duv
        return _scalar(self.rule.expect(integrand))

    def dq_lin_dx_fourth_cumulant_form(self, x):
        """-1/2 E[(phi_uuuu + phi_uv)(h + sqrt(x) g, -x/2)].

        Coincides with :meth:`dq_lin_dx` when the spins take values +-1 only.
        """
        u, v = self._args(x)
        p = self.ev.partials(u, v)
        return _scalar(-0.5 * self.rule.expect(p.duuuu + p.duv))

    def overlap_variance(self, x, q=None):
        """Var-like moment E[((d_u phi)^2 - q)^2]; q defaults to q_lin(x)."""
        u, v = self._args(x)
        du2 = self.ev.partials(u, v).du ** 2
        if q is None:
            q = self.rule.expect(du2)
        return _scalar(self.rule.expect((du2 - np.asarray(q)[..., None]) ** 2))

    def lipschitz_bound(self, x_max: float = DEFAULT_LIPSCHITZ_XMAX, n_grid: int = LIPSCHITZ_GRID) -> float:
        """Grid maximum of |dq_lin/dx| on [0, x_max], inflated by 5%."""
        if not x_max > 0.0:
            raise ValueError("x_max must be positive")
        grid = np.linspace(0.0, x_max, n_grid)
        return LIPSCHITZ_SAFETY * float(np.max(np.abs(self.dq_lin_dx(grid))))


def gaussian_quad_exp_moment(u: float, v: float) -> float:
    """E exp(u g + v g^2) for g ~ N(0,1), defined for v < 1/2."""
    if not v < 0.5:
        raise ValueError("E exp(u g + v g^2) diverges for v >= 1/2")
    a = 1.0 - 2.0 * v
    return math.exp(u * u / (2.0 * a)) / math.sqrt(a)
