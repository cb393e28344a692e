"""Fixed point q = q_lin(2 q t), the replica-symmetric free energy and its threshold."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from skrs.gaussian import DEFAULT_LIPSCHITZ_XMAX, LinearModelAnalytics

log = logging.getLogger(__name__)

RESIDUAL_STOP = 1e-12
RESIDUAL_ACCEPT = 1e-10
MAX_ITERATIONS = 10_000


class ConvergenceError(RuntimeError):
    """Fixed-point iteration ran out of iterations."""

    def __init__(self, message: str, last_iterate: float, residual: float, iterations: int):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class RSSolution:
    t: float
    h: float
    q_c: float
    alpha_inf: float
    t_c: float
    iterations: int
    residual: float
    certified: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["regime"] = "unique-regime" if self.certified else "above-sufficient-threshold"
        return out


def t_c_estimate(la: LinearModelAnalytics, x_max: float = DEFAULT_LIPSCHITZ_XMAX) -> float:
    """Sufficient high-temperature threshold 1/(4C), C bounding |dq_lin/dx| on [0, x_max].

    Below it, q -> q_lin(2 q t) is a 1/2-contraction. This is not claimed to
    be the critical temperature.
    """
    return 1.0 / (4.0 * la.lipschitz_bound(x_max))


def fixed_point_map(la: LinearModelAnalytics, t: float, q):
    q = np.asarray(q, dtype=float)
    return la.q_lin(2.0 * np.clip(q, 0.0, None) * t)


def iterate_fixed_point(la: LinearModelAnalytics, t: float, q0: float | None = None,
                        tol: float = RESIDUAL_STOP, max_iter: int = MAX_ITERATIONS):
    """Run q <- q_lin(2 q t); returns (q, residual, iterations, trajectory)."""
    q = la.q_lin(0.0) if q0 is None else float(q0)
    trajectory = [q]
    for k in range(1, max_iter + 1):
        q_next = float(fixed_point_map(la, t, q))
        trajectory.append(q_next)
        q = q_next
        residual = abs(q - float(fixed_point_map(la, t, q)))
        if residual <= tol:
            return q, residual, k, trajectory
    raise ConvergenceError(
        f"fixed-point iteration did not reach residual {tol:g} in {max_iter} steps",
        last_iterate=q, residual=residual, iterations=max_iter,
    )


def alpha_infinity(la: LinearModelAnalytics, t: float, q: float) -> float:
    """(t/2) q^2 + alpha_lin(2 q t)."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    return 0.5 * t * q * q + la.alpha_lin(2.0 * q * t)


def solve_fixed_point(la: LinearModelAnalytics, t: float, t_c: float | None = None,
                      q0: float | None = None, max_iter: int = MAX_ITERATIONS) -> RSSolution:
    if not (t >= 0.0 and math.isfinite(t)):
        raise ValueError("t must be finite and >= 0")
    if t_c is None:
        t_c = t_c_estimate(la)
    certified = t <= t_c
    if not certified:
        log.warning("t=%g exceeds the sufficient threshold t_c=%g; uniqueness not guaranteed", t, t_c)
    q, residual, iterations, _ = iterate_fixed_point(la, t, q0=q0, max_iter=max_iter)
    return RSSolution(
        t=float(t), h=la.h, q_c=q, alpha_inf=alpha_infinity(la, t, q), t_c=float(t_c),
        iterations=iterations, residual=residual, certified=certified,
    )


def f_scan(la: LinearModelAnalytics, t: float, q_grid) -> list[tuple[float, float, float]]:
    """Rows (q, f(q), f'(q)) with f(q) = alpha_lin(2qt) + t q^2/2 and f'(q) = t (q - q_lin(2qt))."""
    q = np.asarray(q_grid, dtype=float)
    if np.any(q < 0.0) or np.any(q > 1.5):
        raise ValueError("q grid must lie in [0, 1.5]")
    x = 2.0 * q * t
    f = np.atleast_1d(la.alpha_lin(x) + 0.5 * t * q * q)
    fp = np.atleast_1d(t * (q - la.q_lin(x)))
    return [(float(a), float(b), float(c)) for a, b, c in zip(np.atleast_1d(q), f, fp)]
