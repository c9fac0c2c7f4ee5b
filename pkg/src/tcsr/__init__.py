"""Superradiant single-photon emission from disordered emitter ensembles in a modulated cavity."""

__version__ = "0.1.0"

from .core import (Constant, Pulse, SinglePhotonState, SqrtScaled, SystemConfig, Trajectory,
                   effective_hamiltonian, evolve, propagator, symmetric_state)
from .engine import HorizonPolicy
from .errors import (IntegrationError, InvalidConfigError, NormalizationError, NumericError,
                     StateSpaceError)
from .kernels import BACKEND
from .large_n import (LargeNParams, effective_fidelity, evolve_effective, improvement_scan,
                      subradiant_occupation)
from .metrics import (eigenstate_superradiance_modulated, eigenstate_superradiance_static,
                      photon_fidelity)
from .multiphoton import (BinnedEnsemble, FockTruncation, binned_fidelity, exact_full_fidelity,
                          normalized_fidelity)
from .pulse_opt import OptimizationOptions, fidelity_gradient, optimize_pulse

__all__ = [
    "__version__", "BACKEND",
    "Constant", "SqrtScaled", "SystemConfig", "Pulse", "SinglePhotonState", "Trajectory",
    "symmetric_state", "effective_hamiltonian", "evolve", "propagator", "HorizonPolicy",
    "eigenstate_superradiance_static", "eigenstate_superradiance_modulated", "photon_fidelity",
    "OptimizationOptions", "fidelity_gradient", "optimize_pulse",
    "LargeNParams", "evolve_effective", "effective_fidelity", "subradiant_occupation",
    "improvement_scan",
    "FockTruncation", "BinnedEnsemble", "exact_full_fidelity", "binned_fidelity",
    "normalized_fidelity",
    "InvalidConfigError", "IntegrationError", "NumericError", "StateSpaceError",
    "NormalizationError",
]
