"""Replica-symmetric solution of the high-temperature SK model with general spins."""

from skrs.spins import PhiEvaluator, PhiPartials, SpinDistribution, make_distribution

__version__ = "0.1.0"

__all__ = [
    "PhiEvaluator",
    "PhiPartials",
    "SpinDistribution",
    "make_distribution",
    "__version__",
]
