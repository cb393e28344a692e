"""Quenched Gaussian disorder, deterministic per-sample seeding and disorder averages."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

WORKERS_ENV = "SKRS_WORKERS"


@dataclass(frozen=True)
class DisorderSample:
    """One realization of the couplings g_ij (i <= j) and the linear fields J_i.

    ``g`` is stored as an upper-triangular n x n array including the diagonal.
    """

    n: int
    g: np.ndarray
    j_lin: np.ndarray
    seed: int | None = None

    def negated(self) -> DisorderSample:
        return DisorderSample(self.n, -self.g, -self.j_lin, self.seed)


def derive_seed(seed: int, index: int) -> int:
    """64-bit seed of the index-th disorder sample; independent of worker layout."""
    state = np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)]).generate_state(1, np.uint64)
    return int(state[0])


def sample_disorder(n: int, seed: int) -> DisorderSample:
    if n < 1:
        raise ValueError("n must be >= 1")
    g_stream, j_stream = np.random.SeedSequence(int(seed)).spawn(2)
    rng_g = np.random.Generator(np.random.Philox(g_stream))
    rng_j = np.random.Generator(np.random.Philox(j_stream))
    g = np.zeros((n, n))
    g[np.triu_indices(n)] = rng_g.standard_normal(n * (n + 1) // 2)
    return DisorderSample(n, g, rng_j.standard_normal(n), int(seed))


def coupling_matrix(d: DisorderSample) -> np.ndarray:
    """A such that H(sigma) = sigma^T A sigma."""
    n = d.n
    return math.sqrt(2.0 / n) * np.triu(d.g, 1) + np.diag(np.diag(d.g)) / math.sqrt(n)


def hamiltonian_sk(d: DisorderSample, sigma) -> np.ndarray | float:
    """sqrt(2/n) sum_{i<j} g_ij s_i s_j + n^{-1/2} sum_i g_ii s_i^2 for one or many configurations."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape[-1] != d.n:
        raise ValueError(f"configuration has {sigma.shape[-1]} spins, disorder has {d.n}")
    if np.any(np.abs(sigma) > 1.0):
        raise ValueError("spins must lie in [-1, 1]")
    out = np.einsum("...i,ij,...j->...", sigma, coupling_matrix(d), sigma)
    return float(out) if out.ndim == 0 else out


def linear_hamiltonian(d: DisorderSample, sigma) -> np.ndarray:
    return np.asarray(sigma, dtype=float) @ d.j_lin


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_err: float

    def as_tuple(self) -> tuple[float, float]:
        return self.mean, self.std_err


def estimate(values) -> Estimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = math.fsum(values.tolist()) / n
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(mean, se)


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _run_one(evaluate: Callable, n: int, seed: int, index: int, antithetic: bool) -> np.ndarray:
    d = sample_disorder(n, derive_seed(seed, index))
    out = np.atleast_1d(np.asarray(evaluate(d), dtype=float))
    if antithetic:
        out = 0.5 * (out + np.atleast_1d(np.asarray(evaluate(d.negated()), dtype=float)))
    return out


def disorder_samples(evaluate: Callable[[DisorderSample], np.ndarray], n: int, n_samples: int,
                     seed: int, workers: int | None = None, antithetic: bool = False) -> np.ndarray:
    """Evaluate ``evaluate`` on n_samples disorder draws; rows ordered by sample index.

    With ``antithetic`` each row averages the draw and its sign-flipped copy.
    ``evaluate`` must be picklable when ``workers > 1``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    indices = range(n_samples)
    if workers == 1:
        rows = [_run_one(evaluate, n, seed, i, antithetic) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_one, [evaluate] * n_samples, [n] * n_samples,
                                 [seed] * n_samples, indices, [antithetic] * n_samples,
                                 chunksize=max(1, n_samples // (4 * workers))))
    return np.vstack(rows)


def single_site_quadrature(order: int = 61):
    """Tensor Gauss-Hermite rule over (g_11, J_1) for n = 1: yields (sample, weight)."""
    from skrs.gaussian import HermiteRule

    rule = HermiteRule.of_order(order)
    for g, wg in zip(rule.nodes, rule.weights):
        for j, wj in zip(rule.nodes, rule.weights):
            yield DisorderSample(1, np.array([[g]]), np.array([j])), wg * wj


def quadrature_average(evaluate: Callable[[DisorderSample], np.ndarray], order: int = 61) -> np.ndarray:
    """Exact (to quadrature) disorder average for a single spin."""
    total = None
    for d, w in single_site_quadrature(order):
        val = w * np.atleast_1d(np.asarray(evaluate(d), dtype=float))
        total = val if total is None else total + val
    return total
