"""Spectral-Galerkin simulation of the stochastic Cahn-Hilliard/Allen-Cahn equation
with multiplicative space-time white noise on [0, pi]^d."""

__version__ = "0.1.0"

from .spectral_core import (
    NodalField,
    OperatorSpec,
    SpectralField,
    basis_eval,
    lam,
    semigroup_apply,
    to_nodal,
    to_spectral,
)
from .noise import CutoffSpec, SigmaSpec, cutoff_eval, sample_noise, sigma_eval
from .integrator import (
    Nonlinearity,
    SimConfig,
    Trajectory,
    drift_spectral,
    energy_diagnostics,
    f_eval,
    picard_solve,
    run_path,
    run_paths,
    step,
)

__all__ = [
    "CutoffSpec", "NodalField", "Nonlinearity", "OperatorSpec", "SigmaSpec", "SimConfig",
    "SpectralField", "Trajectory", "basis_eval", "cutoff_eval", "drift_spectral",
    "energy_diagnostics", "f_eval", "lam", "picard_solve", "run_path", "run_paths",
    "sample_noise", "semigroup_apply", "sigma_eval", "step", "to_nodal", "to_spectral",
]
