"""Finite-n experiments: disorder, exact enumeration, and identity checks."""

from skrs.lab.disorder import (
    DisorderSample,
    Estimate,
    derive_seed,
    hamiltonian_sk,
    sample_disorder,
)
from skrs.lab.experiments import (
    concentration_experiment,
    convergence_experiment,
    interpolation_experiment,
    quenched_free_energy,
    verify_ibp_coupled,
    verify_ibp_single,
)
from skrs.lab.gibbs import (
    BudgetError,
    CoupledReport,
    GibbsReport,
    coupled_gibbs,
    gibbs_overlap_moments,
    log_z_exact,
)

__all__ = [
    "BudgetError",
    "CoupledReport",
    "DisorderSample",
    "Estimate",
    "GibbsReport",
    "concentration_experiment",
    "convergence_experiment",
    "coupled_gibbs",
    "derive_seed",
    "gibbs_overlap_moments",
    "hamiltonian_sk",
    "interpolation_experiment",
    "log_z_exact",
    "quenched_free_energy",
    "sample_disorder",
    "verify_ibp_coupled",
    "verify_ibp_single",
]
