"""Symmetric spin laws on [-1, 1] and the mixed Laplace exponent.

Every law is stored as a finite list of atoms ``(s_k, w_k)``. The uniform law
is discretized with Gauss-Legendre nodes, so all expectations are finite sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

_WEIGHT_TOL = 1e-12
_KINDS = ("rademacher", "uniform", "discrete-symmetric")


@dataclass(frozen=True)
class SpinDistribution:
    """A symmetric probability law on [-1, 1] given by its atoms.

    ``values`` and ``weights`` are tuples so instances are hashable and can key
    enumeration caches.
    """

    kind: str
    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown spin law kind {self.kind!r}")
        if len(self.values) != len(self.weights) or not self.values:
            raise ValueError("values and weights must be non-empty and of equal length")
        vals = np.asarray(self.values, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) > 1.0):
            raise ValueError("atom values must lie in [-1, 1]")
        if np.any(wts <= 0.0):
            raise ValueError("atom weights must be positive")
        if abs(wts.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {wts.sum()!r}, expected 1")
        order = np.argsort(vals, kind="stable")
        vals, wts = vals[order], wts[order]
        if not (np.allclose(vals, -vals[::-1], rtol=0.0, atol=1e-14)
                and np.allclose(wts, wts[::-1], rtol=0.0, atol=1e-14)):
            raise ValueError("spin law is not symmetric under s -> -s")

    @classmethod
    def rademacher(cls) -> SpinDistribution:
        return cls("rademacher", (-1.0, 1.0), (0.5, 0.5))

    @classmethod
    def uniform(cls, nodes: int = 32) -> SpinDistribution:
        """Uniform law on [-1, 1], discretized by an even-order Gauss-Legendre rule."""
        if nodes < 2 or nodes % 2:
            raise ValueError("uniform discretization needs an even number of nodes >= 2")
        x, w = np.polynomial.legendre.leggauss(nodes)
        values = 0.5 * (x - x[::-1])
        weights = 0.5 * (w + w[::-1])
        weights = weights / math.fsum(weights)
        return cls("uniform", tuple(float(v) for v in values), tuple(float(v) for v in weights))

    @classmethod
    def discrete(cls, atoms: Sequence[Sequence[float]]) -> SpinDistribution:
        """Build a law from ``[[value, weight], ...]``; weights are renormalized."""
        pairs = [(float(v), float(w)) for v, w in atoms]
        total = math.fsum(w for _, w in pairs)
        if total <= 0.0:
            raise ValueError("atom weights must be positive")
        pairs.sort()
        return cls(
            "discrete-symmetric",
            tuple(v for v, _ in pairs),
            tuple(w / total for _, w in pairs),
        )

    @property
    def n_atoms(self) -> int:
        return len(self.values)

    @property
    def atom_values(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def atom_log_weights(self) -> np.ndarray:
        return np.log(np.asarray(self.weights, dtype=float))

    def describe(self) -> dict:
        out: dict = {"kind": self.kind, "n_atoms": self.n_atoms}
        if self.kind == "discrete-symmetric":
            out["atoms"] = [[v, w] for v, w in zip(self.values, self.weights)]
        return out

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = rng.choice(self.n_atoms, size=size, p=np.asarray(self.weights))
        return self.atom_values[idx]


def make_distribution(kind: str, atoms=None, nodes: int | None = None) -> SpinDistribution:
    """Resolve a config-level declaration ``{kind, atoms, nodes}``."""
    if kind == "rademacher":
        return SpinDistribution.rademacher()
    if kind == "uniform":
        return SpinDistribution.uniform(nodes or 32)
    if kind in ("discrete", "discrete-symmetric"):
        if atoms is None:
            raise ValueError("a discrete law needs an atoms list")
        return SpinDistribution.discrete(atoms)
    raise ValueError(f"unknown spin law kind {kind!r}")


class PhiPartials(NamedTuple):
    du: np.ndarray
    duu: np.ndarray
    dv: np.ndarray
    duuuu: np.ndarray
    duv: np.ndarray
    duuu: np.ndarray


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("phi arguments must be finite")


class PhiEvaluator:
    """phi(u, v) = log E exp(u s + v s^2) and its tilted-measure cumulants.

    All methods broadcast over array-valued ``u`` and ``v``. Instances hold no
    mutable state.
    """

    def __init__(self, dist: SpinDistribution):
        self.dist = dist
        self._s = dist.atom_values
        self._logw = dist.atom_log_weights

    def _exponents(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        _check_finite(u, v)
        u, v = np.broadcast_arrays(u, v)
        s = self._s
        return u[..., None] * s + v[..., None] * s * s + self._logw

    def phi(self, u, v):
        out = logsumexp(self._exponents(u, v), axis=-1)
        return out if out.ndim else float(out)

    def tilted_probs(self, u, v) -> np.ndarray:
        e = self._exponents(u, v)
        return np.exp(e - logsumexp(e, axis=-1, keepdims=True))

    def partials(self, u, v) -> PhiPartials:
        p = self.tilted_probs(u, v)
        s = self._s
        m1 = p @ s
        m2 = p @ (s * s)
        d = s - m1[..., None]
        var = np.sum(p * d * d, axis=-1)
        mu3 = np.sum(p * d**3, axis=-1)
        mu4 = np.sum(p * d**4, axis=-1)
        # Cov(s, s^2) = E[(s - m1) s^2]
        cov_s_s2 = np.sum(p * d * s * s, axis=-1)
        return PhiPartials(
            du=m1,
            duu=var,
            dv=m2,
            duuuu=mu4 - 3.0 * var * var,
            duv=cov_s_s2,
            duuu=mu3,
        )

    def psi(self, u, v, lam):
        """Two-replica exponent log E exp(u(s+r) + v(s^2+r^2) + lam s r)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        lam = np.asarray(lam, dtype=float)
        _check_finite(u, v, lam)
        u, v, lam = np.broadcast_arrays(u, v, lam)
        s = self._s
        single = u[..., None] * s + v[..., None] * s * s + self._logw
        pair = single[..., :, None] + single[..., None, :] + lam[..., None, None] * np.multiply.outer(s, s)
        out = logsumexp(pair.reshape(*pair.shape[:-2], -1), axis=-1)
        return out if out.ndim else float(out)
