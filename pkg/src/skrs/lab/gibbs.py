"""Exact enumeration of single-replica and coupled-pair Gibbs measures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import logsumexp

from skrs.lab.disorder import DisorderSample, coupling_matrix
from skrs.spins import SpinDistribution

ENUMERATION_BUDGET = 2**24
_PAIR_BLOCK = 2**20


class BudgetError(RuntimeError):
    """Enumeration would exceed the configured number of terms."""


@dataclass(frozen=True)
class ConfigSpace:
    """All atoms^n configurations with their base log-weights."""

    dist: SpinDistribution
    n: int
    spins: np.ndarray
    base_logw: np.ndarray
    self_overlap: np.ndarray
    magnetization: np.ndarray

    @property
    def size(self) -> int:
        return self.spins.shape[0]

    @cached_property
    def pair_products(self) -> tuple[np.ndarray, np.ndarray]:
        """(s_i s_j for i <= j per configuration, multiplicity of each (i, j) in a full sum)."""
        iu, ju = np.triu_indices(self.n)
        prods = self.spins[:, iu] * self.spins[:, ju]
        mult = np.where(iu == ju, 1.0, 2.0)
        return prods, mult


def check_budget(dist: SpinDistribution, n: int, replicas: int = 1,
                 budget: int = ENUMERATION_BUDGET) -> None:
    terms = dist.n_atoms ** (replicas * n)
    if terms > budget:
        kind = "coupled-pair" if replicas == 2 else "single-replica"
        raise BudgetError(
            f"{kind} enumeration needs {terms} terms (> {budget}); "
            "reduce n or the atom count, or use a Monte Carlo path"
        )


@lru_cache(maxsize=16)
def config_space(dist: SpinDistribution, n: int) -> ConfigSpace:
    if n < 1:
        raise ValueError("n must be >= 1")
    check_budget(dist, n)
    a = dist.n_atoms
    idx = np.stack(np.unravel_index(np.arange(a**n), (a,) * n), axis=1)
    spins = dist.atom_values[idx]
    base = dist.atom_log_weights[idx].sum(axis=1)
    self_overlap = np.einsum("ki,ki->k", spins, spins) / n
    mag = spins.sum(axis=1)
    for arr in (spins, base, self_overlap, mag):
        arr.setflags(write=False)
    return ConfigSpace(dist, n, spins, base, self_overlap, mag)


@dataclass(frozen=True)
class SampleFeatures:
    """Disorder-dependent energies of every configuration for one sample."""

    space: ConfigSpace
    sk: np.ndarray
    linear: np.ndarray

    def log_weights(self, t: float, x: float, h: float) -> np.ndarray:
        if t < 0.0 or x < 0.0:
            raise ValueError("t and x must be >= 0")
        sp = self.space
        n = sp.n
        qss = sp.self_overlap
        return (sp.base_logw + math.sqrt(t) * self.sk + math.sqrt(x) * self.linear
                - 0.5 * n * (x * qss + t * qss * qss) + h * sp.magnetization)


def features(d: DisorderSample, dist: SpinDistribution) -> SampleFeatures:
    sp = config_space(dist, d.n)
    s = sp.spins
    sk = np.einsum("ki,ki->k", s @ coupling_matrix(d), s)
    return SampleFeatures(sp, sk, s @ d.j_lin)


@dataclass(frozen=True)
class GibbsReport:
    log_z: float
    mean_overlap: float
    mean_overlap_sq: float
    coupled_log_z: float | None = None

    def __post_init__(self) -> None:
        tol = 1e-12
        if not -1.0 - tol <= self.mean_overlap <= 1.0 + tol:
            raise ValueError(f"mean overlap {self.mean_overlap} outside [-1, 1]")
        if not -tol <= self.mean_overlap_sq <= 1.0 + tol:
            raise ValueError(f"mean squared overlap {self.mean_overlap_sq} outside [0, 1]")
        if self.mean_overlap_sq < self.mean_overlap**2 - tol:
            raise ValueError("mean squared overlap below squared mean overlap")


def replica_moments(p: np.ndarray, space: ConfigSpace) -> tuple[float, float]:
    """<q(s, s')> and <q(s, s')^2> for two independent replicas drawn from p.

    Both factorize through the one-replica moments <s_i> and <s_i s_j>.
    """
    n = space.n
    m = p @ space.spins
    prods, mult = space.pair_products
    corr = p @ prods
    return float(m @ m / n), float(mult @ (corr * corr) / (n * n))


def gibbs_from_features(f: SampleFeatures, t: float, x: float, h: float) -> GibbsReport:
    logw = f.log_weights(t, x, h)
    log_z = float(logsumexp(logw))
    p = np.exp(logw - log_z)
    q1, q2 = replica_moments(p, f.space)
    return GibbsReport(log_z, q1, q2)


def log_z_exact(d: DisorderSample, dist: SpinDistribution, t: float, x: float, h: float) -> float:
    return float(logsumexp(features(d, dist).log_weights(t, x, h)))


def gibbs_overlap_moments(d: DisorderSample, dist: SpinDistribution, t: float, x: float,
                          h: float) -> GibbsReport:
    return gibbs_from_features(features(d, dist), t, x, h)


@dataclass(frozen=True)
class CoupledReport:
    """Coupled pair (s, r) with weight exp(V(s) + V(r) + coupling(q(s, r))).

    ``cross_*`` refer to q(s, s') between replicas of two independent coupled
    pairs sharing the disorder.
    """

    log_z: float
    overlap: float
    overlap_sq: float
    gap_sq: float
    cross_overlap: float
    cross_overlap_sq: float


def _coupling(overlap: np.ndarray, n: int, lam: float, q: float, mode: str) -> np.ndarray:
    if mode == "square":
        return lam * n * (q - overlap) ** 2
    if mode == "linear":
        return lam * n * overlap
    raise ValueError(f"unknown coupling mode {mode!r}")


def coupled_from_features(f: SampleFeatures, t: float, x: float, h: float, lam: float, q: float,
                          mode: str = "square") -> CoupledReport:
    sp = f.space
    check_budget(sp.dist, sp.n, replicas=2)
    n, k = sp.n, sp.size
    logw = f.log_weights(t, x, h)
    s = sp.spins
    block = max(1, _PAIR_BLOCK // k)
    lses, marg, sums = [], [], []
    for start in range(0, k, block):
        rows = slice(start, min(start + block, k))
        ov = (s[rows] @ s.T) / n
        e = logw[rows, None] + logw[None, :] + _coupling(ov, n, lam, q, mode)
        lse = logsumexp(e)
        w = np.exp(e - lse)
        lses.append(lse)
        marg.append(w.sum(axis=1))
        sums.append((np.sum(w * ov), np.sum(w * ov * ov), np.sum(w * (q - ov) ** 2)))
    lses = np.array(lses)
    log_z = float(logsumexp(lses))
    scale = np.exp(lses - log_z)
    p = np.concatenate([m * c for m, c in zip(marg, scale)])
    ov1, ov2, gap = (float(v) for v in scale @ np.array(sums))
    cross1, cross2 = replica_moments(p, sp)
    return CoupledReport(log_z, ov1, ov2, gap, cross1, cross2)


def coupled_gibbs(d: DisorderSample, dist: SpinDistribution, t: float, x: float, h: float,
                  lam: float, q: float, mode: str = "square") -> CoupledReport:
    return coupled_from_features(features(d, dist), t, x, h, lam, q, mode)
