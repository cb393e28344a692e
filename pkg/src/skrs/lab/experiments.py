"""Disorder-averaged experiments at finite n.

Every experiment draws disorder through :func:`disorder_samples`, so the same
seed reproduces the same numbers regardless of worker count. Derivatives are
centered finite differences evaluated on the same disorder (common random
numbers) and compared with the Gibbs-bracket formula sample by sample.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from skrs.gaussian import HermiteRule, LinearModelAnalytics
from skrs.lab.disorder import DisorderSample, Estimate, disorder_samples, estimate, quadrature_average
from skrs.lab.gibbs import check_budget, coupled_from_features, features, gibbs_from_features
from skrs.solver import solve_fixed_point
from skrs.spins import PhiEvaluator, SpinDistribution

log = logging.getLogger(__name__)

FD_STEP = 1e-3
ABS_TOL = 1e-4
LAMBDA_MAX_PROVED = 1.0 / 20.0


def _derivative(fn, p: float, step: float) -> float:
    """Centered difference, or a second-order forward stencil when p < step."""
    if p >= step:
        return (fn(p + step) - fn(p - step)) / (2.0 * step)
    return (-3.0 * fn(p) + 4.0 * fn(p + step) - fn(p + 2.0 * step)) / (2.0 * step)


def _tolerance(se: float) -> float:
    return max(ABS_TOL, 3.0 * se)


@dataclass(frozen=True)
class IdentityCheck:
    """Finite-difference derivative against its bracket formula."""

    name: str
    finite_difference: float
    formula: float
    discrepancy: float
    std_err: float
    tolerance: float
    passed: bool


def _identity(name: str, fd, formula, exact: bool = False, tol: float | None = None) -> IdentityCheck:
    fd = np.atleast_1d(fd)
    formula = np.atleast_1d(formula)
    diff = estimate(fd - formula) if not exact else Estimate(float(fd[0] - formula[0]), 0.0)
    tolerance = _tolerance(diff.std_err) if tol is None else tol
    return IdentityCheck(
        name, float(np.mean(fd)), float(np.mean(formula)), diff.mean, diff.std_err,
        tolerance, bool(abs(diff.mean) <= tolerance),
    )


# -- free energy -------------------------------------------------------------

@dataclass(frozen=True)
class _FreeEnergy:
    dist: SpinDistribution
    t: float
    x: float
    h: float

    def __call__(self, d: DisorderSample) -> np.ndarray:
        f = features(d, self.dist)
        return np.array([logsumexp(f.log_weights(self.t, self.x, self.h)) / d.n])


def quenched_free_energy(dist: SpinDistribution, n: int, t: float, x: float, h: float,
                         n_samples: int, seed: int, workers: int | None = None,
                         antithetic: bool = False) -> Estimate:
    """Mean and standard error of (1/n) log Z over independent disorder draws."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    check_budget(dist, n)
    rows = disorder_samples(_FreeEnergy(dist, t, x, h), n, n_samples, seed, workers, antithetic)
    return estimate(rows[:, 0])


@dataclass(frozen=True)
class _OverlapSample:
    dist: SpinDistribution
    t: float
    x: float
    h: float

    def __call__(self, d: DisorderSample) -> np.ndarray:
        r = gibbs_from_features(features(d, self.dist), self.t, self.x, self.h)
        return np.array([r.log_z / d.n, r.mean_overlap, r.mean_overlap_sq])


def mean_overlaps(dist: SpinDistribution, n: int, t: float, x: float, h: float, n_samples: int,
                  seed: int, workers: int | None = None) -> dict[str, Estimate]:
    rows = disorder_samples(_OverlapSample(dist, t, x, h), n, n_samples, seed, workers)
    return {
        "alpha_n": estimate(rows[:, 0]),
        "mean_overlap": estimate(rows[:, 1]),
        "mean_overlap_sq": estimate(rows[:, 2]),
    }


def linear_overlap_check(dist: SpinDistribution, n: int, x: float, h: float, n_samples: int,
                         seed: int, hermite_order: int = 61, workers: int | None = None) -> dict:
    """Disorder-averaged <q> of the linear model against q_lin(x)."""
    la = LinearModelAnalytics.build(dist, h, hermite_order)
    est = mean_overlaps(dist, n, 0.0, x, h, n_samples, seed, workers)["mean_overlap"]
    q = la.q_lin(x)
    return {
        "n": n, "x": x, "h": h, "samples": n_samples,
        "mean_overlap": est.mean, "std_err": est.std_err, "q_lin": q,
        "passed": bool(abs(est.mean - q) <= 3.0 * est.std_err),
    }


# -- integration by parts, single replica ------------------------------------

@dataclass(frozen=True)
class _SingleIbp:
    dist: SpinDistribution
    t: float
    x: float
    h: float
    step: float

    def __call__(self, d: DisorderSample) -> np.ndarray:
        f = features(d, self.dist)
        n = d.n

        def alpha(t, x):
            return logsumexp(f.log_weights(t, x, self.h)) / n

        r = gibbs_from_features(f, self.t, self.x, self.h)
        fd_t = _derivative(lambda s: alpha(s, self.x), self.t, self.step)
        fd_x = _derivative(lambda s: alpha(self.t, s), self.x, self.step)
        return np.array([fd_t, -0.5 * r.mean_overlap_sq, fd_x, -0.5 * r.mean_overlap])


@dataclass(frozen=True)
class IbpReport:
    params: dict
    checks: list[IdentityCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"params": self.params, "passed": self.passed,
                "checks": [asdict(c) for c in self.checks]}


def verify_ibp_single(dist: SpinDistribution, n: int, t: float, x: float, h: float,
                      n_samples: int, seed: int, step: float = FD_STEP,
                      workers: int | None = None, antithetic: bool = True) -> IbpReport:
    """d alpha/dt = -<q^2>/2 and d alpha/dx = -<q>/2, by finite differences."""
    check_budget(dist, n)
    rows = disorder_samples(_SingleIbp(dist, t, x, h, step), n, n_samples, seed, workers, antithetic)
    params = dict(n=n, t=t, x=x, h=h, samples=n_samples, seed=seed, step=step, antithetic=antithetic)
    return IbpReport(params, [
        _identity("d_alpha/dt = -<q^2>/2", rows[:, 0], rows[:, 1]),
        _identity("d_alpha/dx = -<q>/2", rows[:, 2], rows[:, 3]),
    ])


def verify_ibp_single_quadrature(dist: SpinDistribution, t: float, x: float, h: float,
                                 step: float = FD_STEP, order: int = 61, tol: float = 1e-6) -> IbpReport:
    """n = 1 version with the disorder integrated by tensor Gauss-Hermite quadrature."""
    avg = quadrature_average(_SingleIbp(dist, t, x, h, step), order)
    params = dict(n=1, t=t, x=x, h=h, step=step, quadrature_order=order)
    return IbpReport(params, [
        _identity("d_alpha/dt = -<q^2>/2", avg[0], avg[1], exact=True, tol=tol),
        _identity("d_alpha/dx = -<q>/2", avg[2], avg[3], exact=True, tol=tol),
    ])


# -- integration by parts, coupled replicas ----------------------------------

@dataclass(frozen=True)
class _CoupledIbp:
    dist: SpinDistribution
    t: float
    x: float
    h: float
    lam: float
    q: float
    step: float

    def __call__(self, d: DisorderSample) -> np.ndarray:
        f = features(d, self.dist)
        n = d.n

        def beta(t, x, lam):
            return coupled_from_features(f, t, x, self.h, lam, self.q).log_z / (2 * n)

        r = coupled_from_features(f, self.t, self.x, self.h, self.lam, self.q)
        return np.array([
            _derivative(lambda s: beta(s, self.x, self.lam), self.t, self.step),
            0.5 * (r.overlap_sq - 2.0 * r.cross_overlap_sq),
            _derivative(lambda s: beta(self.t, s, self.lam), self.x, self.step),
            0.5 * (r.overlap - 2.0 * r.cross_overlap),
            _derivative(lambda s: beta(self.t, self.x, s), self.lam, self.step),
            0.5 * r.gap_sq,
        ])


_COUPLED_NAMES = (
    "d_beta/dt = <q^2 - 2 q13^2>/2",
    "d_beta/dx = <q - 2 q13>/2",
    "d_beta/dlambda = <(q - overlap)^2>/2",
)


def verify_ibp_coupled(dist: SpinDistribution, n: int, t: float, x: float, h: float, lam: float,
                       q: float, n_samples: int, seed: int, step: float = FD_STEP,
                       workers: int | None = None, antithetic: bool = True) -> IbpReport:
    """Derivatives of (1/2n) E log Z_coupled in t, x and lambda against four-replica brackets."""
    check_budget(dist, n, replicas=2)
    rows = disorder_samples(_CoupledIbp(dist, t, x, h, lam, q, step), n, n_samples, seed,
                            workers, antithetic)
    params = dict(n=n, t=t, x=x, h=h, lam=lam, q=q, samples=n_samples, seed=seed, step=step,
                  antithetic=antithetic)
    return IbpReport(params, [
        _identity(name, rows[:, 2 * i], rows[:, 2 * i + 1]) for i, name in enumerate(_COUPLED_NAMES)
    ])


def verify_ibp_coupled_quadrature(dist: SpinDistribution, t: float, x: float, h: float, lam: float,
                                  q: float, step: float = FD_STEP, order: int = 61,
                                  tol: float = 1e-6) -> IbpReport:
    avg = quadrature_average(_CoupledIbp(dist, t, x, h, lam, q, step), order)
    params = dict(n=1, t=t, x=x, h=h, lam=lam, q=q, step=step, quadrature_order=order)
    return IbpReport(params, [
        _identity(name, avg[2 * i], avg[2 * i + 1], exact=True, tol=tol)
        for i, name in enumerate(_COUPLED_NAMES)
    ])


@dataclass(frozen=True)
class _FactOne:
    dist: SpinDistribution
    t: float
    x0: float
    h: float
    lam: float
    q: float

    def __call__(self, d: DisorderSample) -> np.ndarray:
        f = features(d, self.dist)
        n = d.n
        lhs = coupled_from_features(f, self.t, self.x0 - 2 * self.q * self.t, self.h, self.lam, self.q)
        rhs = coupled_from_features(f, 0.0, self.x0, self.h, self.lam + self.t, self.q)
        return np.array([lhs.log_z / (2 * n), rhs.log_z / (2 * n) + 0.5 * self.t * self.q**2])


def coupled_comparison(dist: SpinDistribution, n: int, t: float, x0: float, h: float, lam: float,
                       q: float, n_samples: int, seed: int, workers: int | None = None) -> dict:
    """beta(t, x0 - 2qt, lam) <= beta(0, x0, lam + t) + t q^2 / 2 within 3 standard errors."""
    if x0 < 2 * q * t:
        raise ValueError("need x0 >= 2 q t")
    rows = disorder_samples(_FactOne(dist, t, x0, h, lam, q), n, n_samples, seed, workers)
    lhs, rhs, diff = estimate(rows[:, 0]), estimate(rows[:, 1]), estimate(rows[:, 0] - rows[:, 1])
    return {
        "lhs": lhs.mean, "rhs": rhs.mean, "difference": diff.mean, "std_err": diff.std_err,
        "passed": bool(diff.mean <= 3.0 * diff.std_err),
    }


# -- interpolation path -------------------------------------------------------

@dataclass(frozen=True)
class _Interpolation:
    dist: SpinDistribution
    t: float
    h: float
    q: float
    s_grid: tuple
    s_mid: tuple
    step: float

    def __call__(self, d: DisorderSample) -> np.ndarray:
        f = features(d, self.dist)
        n, q, x0 = d.n, self.q, 2.0 * self.q * self.t

        def point(s):
            return gibbs_from_features(f, s, max(x0 - 2.0 * q * s, 0.0), self.h)

        def alpha(s):
            return logsumexp(f.log_weights(s, max(x0 - 2.0 * q * s, 0.0), self.h)) / n

        alphas, gaps = [], []
        for s in self.s_grid:
            r = point(s)
            alphas.append(r.log_z / n)
            gaps.append(r.mean_overlap_sq - 2.0 * q * r.mean_overlap + q * q)
        fds, targets = [], []
        for s in self.s_mid:
            r = point(s)
            gap = r.mean_overlap_sq - 2.0 * q * r.mean_overlap + q * q
            fds.append((alpha(s + self.step) - alpha(s - self.step)) / (2.0 * self.step))
            targets.append(0.5 * (q * q - gap))
        return np.concatenate([alphas, gaps, fds, targets])


def _trapezoid(y: np.ndarray, dx: float) -> np.ndarray:
    """Trapezoid rule along the last axis."""
    return dx * (y[..., 1:-1].sum(axis=-1) + 0.5 * (y[..., 0] + y[..., -1]))


@dataclass
class InterpolationReport:
    t: float
    x0: float
    q: float
    s_grid: list[float]
    alpha_tilde: list[float]
    alpha_tilde_std_err: list[float]
    deriv_bound_violations: int
    sum_rule_residual: float
    h_n_values: list[float]
    derivative_checks: list[dict] = field(default_factory=list)
    sum_rule: dict = field(default_factory=dict)
    h_n_std_err: list[float] = field(default_factory=list)
    upper_bound: dict = field(default_factory=dict)

    @property
    def derivative_identity_passed(self) -> bool:
        return all(c["passed"] for c in self.derivative_checks)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["derivative_identity_passed"] = self.derivative_identity_passed
        return out

    def csv_rows(self) -> list[dict]:
        rows = [{"s": s, "alpha_tilde": a, "std_err": e, "h_n": hn}
                for s, a, e, hn in zip(self.s_grid, self.alpha_tilde, self.alpha_tilde_std_err,
                                       self.h_n_values)]
        return rows


def interpolation_experiment(dist: SpinDistribution, n: int, t: float, h: float, q: float,
                             steps: int, n_samples: int, seed: int, step: float | None = None,
                             workers: int | None = None, antithetic: bool = True,
                             hermite_order: int = 61) -> InterpolationReport:
    """Follow x(s) = x0 - 2 q s from s = 0 to s = t with x0 = 2 q t.

    Checks, on common disorder: the path derivative against (q^2 - <(q - overlap)^2>)/2
    at each step midpoint, the bound derivative <= q^2/2, and the sum rule
    alpha(t, 0) = alpha(0, x0) + t q^2/2 - (1/2) int_0^t <(q - overlap)^2> ds.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if steps < 2 or steps % 2:
        raise ValueError("steps must be an even integer >= 2")
    check_budget(dist, n)
    x0 = 2.0 * q * t
    ds = t / steps
    s_grid = np.linspace(0.0, t, steps + 1)
    s_mid = 0.5 * (s_grid[1:] + s_grid[:-1]) if t > 0 else np.array([])
    if step is None:
        step = min(FD_STEP, ds / 4.0) if t > 0 else FD_STEP
    rows = disorder_samples(
        _Interpolation(dist, t, h, q, tuple(s_grid), tuple(s_mid), step),
        n, n_samples, seed, workers, antithetic,
    )
    m = steps + 1
    alphas, gaps = rows[:, :m], rows[:, m:2 * m]
    fds, targets = rows[:, 2 * m:2 * m + len(s_mid)], rows[:, 2 * m + len(s_mid):]

    alpha_est = [estimate(alphas[:, k]) for k in range(m)]
    checks, violations = [], 0
    for k, s in enumerate(s_mid):
        c = _identity("path derivative", fds[:, k], targets[:, k])
        fd_est = estimate(fds[:, k])
        bound_ok = fd_est.mean <= 0.5 * q * q + _tolerance(fd_est.std_err)
        violations += 0 if bound_ok else 1
        row = asdict(c)
        row.update(s=float(s), bound=0.5 * q * q, bound_ok=bool(bound_ok))
        checks.append(row)

    # sum rule, both sides on the same disorder
    integral = _trapezoid(gaps, ds) if t > 0 else np.zeros(len(rows))
    rhs = alphas[:, 0] + 0.5 * t * q * q - 0.5 * integral
    diff = estimate(alphas[:, -1] - rhs)
    if t > 0:
        mean_gap = gaps.mean(axis=0)
        coarse = _trapezoid(mean_gap[::2], 2.0 * ds)
        trap_err = 0.5 * abs(float(_trapezoid(mean_gap, ds)) - float(coarse)) / 3.0
    else:
        trap_err = 0.0
    sum_tol = trap_err + 3.0 * diff.std_err
    sum_rule = {
        "lhs_alpha_t_0": alpha_est[-1].mean,
        "rhs": float(np.mean(rhs)),
        "alpha_lin_x0": LinearModelAnalytics.build(dist, h, hermite_order).alpha_lin(x0),
        "alpha_0_x0": alpha_est[0].mean,
        "integral": float(np.mean(integral)),
        "residual": diff.mean,
        "std_err": diff.std_err,
        "trapezoid_error": trap_err,
        "tolerance": sum_tol,
        "passed": bool(abs(diff.mean) <= sum_tol),
    }

    # h_n(s) = alpha(0, x0) + s q^2/2 - alpha(s, x(s))
    hn_rows = alphas[:, [0]] + 0.5 * s_grid * q * q - alphas
    hn_est = [estimate(hn_rows[:, k]) for k in range(m)]

    alpha_lin_x0 = sum_rule["alpha_lin_x0"]
    end = alpha_est[-1]
    upper = {
        "alpha_n": end.mean, "std_err": end.std_err,
        "bound": alpha_lin_x0 + 0.5 * t * q * q,
        "passed": bool(end.mean <= alpha_lin_x0 + 0.5 * t * q * q + 3.0 * end.std_err),
    }
    return InterpolationReport(
        t=t, x0=x0, q=q, s_grid=s_grid.tolist(),
        alpha_tilde=[e.mean for e in alpha_est], alpha_tilde_std_err=[e.std_err for e in alpha_est],
        deriv_bound_violations=violations, sum_rule_residual=abs(diff.mean),
        h_n_values=[e.mean for e in hn_est], derivative_checks=checks, sum_rule=sum_rule,
        h_n_std_err=[e.std_err for e in hn_est], upper_bound=upper,
    )


# -- overlap concentration in the linear model --------------------------------

def concentration_bound(la: LinearModelAnalytics, x: float, lam: float, q: float | None = None) -> dict:
    """Constants bounding E log <exp(lam n (overlap - q)^2)> for the linear model.

    With v = 4 lam < 1/2 and X_i = (d_u phi)^2(h + sqrt(x) J_i, -x/2) - q:
      tight = -log(1 - 8 lam)/2 + lam Var(X_1) / (1 - 8 lam)
      loose = -log(1 - 8 lam)/2 + 2 lam Var(X_1)
    loose >= tight whenever lam <= 1/16.
    """
    if not 0.0 <= lam < 1.0 / 8.0:
        raise ValueError("bound requires 0 <= lam < 1/8")
    q = la.q_lin(x) if q is None else q
    var = la.overlap_variance(x, q)
    base = -0.5 * math.log1p(-8.0 * lam)
    return {"var_x1": var, "tight": base + lam * var / (1.0 - 8.0 * lam), "loose": base + 2.0 * lam * var}


@dataclass(frozen=True)
class _ConcentrationPsi:
    """log <exp(lam n (overlap - q)^2)> at t = 0 via a Gaussian linearization.

    exp(lam n (p - q)^2) = E_gamma exp(sqrt(2 lam n) gamma (p - q)) and the
    coupled linear model factorizes over sites into the two-replica exponent.
    """

    dist: SpinDistribution
    x: float
    h: float
    lam: float
    q: float
    order: int

    def __call__(self, d: DisorderSample) -> np.ndarray:
        if self.lam == 0.0:
            return np.array([0.0])
        ev = PhiEvaluator(self.dist)
        rule = HermiteRule.of_order(self.order)
        n = d.n
        u = (self.h + math.sqrt(self.x) * d.j_lin)[:, None]
        v = -0.5 * self.x
        coupling = math.sqrt(2.0 * self.lam / n) * rule.nodes[None, :]
        site = ev.psi(u, v, coupling) - ev.psi(u, v, 0.0)
        exponent = site.sum(axis=0) - self.q * math.sqrt(2.0 * self.lam * n) * rule.nodes
        return np.array([logsumexp(exponent, b=rule.weights)])


@dataclass(frozen=True)
class _ConcentrationEnum:
    dist: SpinDistribution
    x: float
    h: float
    lam: float
    q: float

    def __call__(self, d: DisorderSample) -> np.ndarray:
        f = features(d, self.dist)
        coupled = coupled_from_features(f, 0.0, self.x, self.h, self.lam, self.q)
        single = logsumexp(f.log_weights(0.0, self.x, self.h))
        return np.array([coupled.log_z - 2.0 * single])


def concentration_value(dist: SpinDistribution, d: DisorderSample, x: float, h: float, lam: float,
                        q: float, method: str = "psi", order: int = 121) -> float:
    if method == "psi":
        return float(_ConcentrationPsi(dist, x, h, lam, q, order)(d)[0])
    if method == "enumeration":
        check_budget(dist, d.n, replicas=2)
        return float(_ConcentrationEnum(dist, x, h, lam, q)(d)[0])
    raise ValueError(f"unknown method {method!r}")


def concentration_experiment(dist: SpinDistribution, n_list, x: float, h: float, lam: float,
                             n_samples: int, seed: int, method: str = "psi", order: int = 121,
                             hermite_order: int = 61, workers: int | None = None) -> dict:
    """E log <exp(lam n (overlap - q_lin(x))^2)> for each n, with the derived ceiling."""
    if lam < 0.0:
        raise ValueError("lambda must be >= 0")
    outside = lam > LAMBDA_MAX_PROVED
    if outside:
        log.warning("lambda=%g is above 1/20; the bound is not guaranteed there", lam)
    la = LinearModelAnalytics.build(dist, h, hermite_order)
    q = la.q_lin(x)
    bound = concentration_bound(la, x, lam, q) if lam < 1.0 / 8.0 else None
    rows = []
    for n in n_list:
        if method == "psi":
            evaluate = _ConcentrationPsi(dist, x, h, lam, q, order)
        else:
            check_budget(dist, n, replicas=2)
            evaluate = _ConcentrationEnum(dist, x, h, lam, q)
        est = estimate(disorder_samples(evaluate, n, n_samples, seed, workers)[:, 0])
        row = {"n": int(n), "value": est.mean, "std_err": est.std_err}
        if bound is not None:
            row["ceiling"] = bound["loose"] + 3.0 * est.std_err
            row["passed"] = bool(est.mean <= row["ceiling"])
        rows.append(row)
    return {
        "x": x, "h": h, "lambda": lam, "q": q, "method": method, "outside_proved_regime": outside,
        "bound": bound, "rows": rows, "passed": all(r.get("passed", False) for r in rows),
    }


# -- finite-n convergence towards the replica-symmetric value ------------------

def convergence_experiment(dist: SpinDistribution, n_list, t: float, h: float, n_samples: int,
                           seed: int, hermite_order: int = 61, workers: int | None = None) -> dict:
    la = LinearModelAnalytics.build(dist, h, hermite_order)
    sol = solve_fixed_point(la, t)
    rows = []
    for n in n_list:
        est = quenched_free_energy(dist, n, t, 0.0, h, n_samples, seed, workers)
        gap = est.mean - sol.alpha_inf
        rows.append({
            "n": int(n), "alpha_n": est.mean, "std_err": est.std_err, "alpha_inf": sol.alpha_inf,
            "gap": gap, "upper_bound_ok": bool(est.mean <= sol.alpha_inf + 3.0 * est.std_err),
        })
    trend_ok = all(
        abs(b["gap"]) <= abs(a["gap"]) + math.hypot(a["std_err"], b["std_err"]) + 1e-12
        for a, b in zip(rows, rows[1:])
    )
    return {
        "t": t, "h": h, "solution": sol.to_dict(), "rows": rows,
        "gap_non_increasing": trend_ok,
        "upper_bound_ok": all(r["upper_bound_ok"] for r in rows),
    }
