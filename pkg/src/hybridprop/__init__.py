"""Propagation engine for quantum-classical hybrid systems.

Mean-field (Schrodinger-picture) and quasiclassical-bracket
(Heisenberg-picture) propagators, plus the harness that checks they agree.
"""

from .errors import DivergenceError, HybridPropError, InvariantViolation, RejectedInput, UnsupportedModel
from .integrate import IntegratorSpec, Trajectory, read_trajectory_csv, write_trajectory_csv
from .kernels import BACKEND
from .models import (ClassicalState, HybridModel, build_oscillator_oscillator, build_spin_oscillator, load_model,
                     total_meanfield_energy)
from .meanfield import MeanFieldState, hellmann_feynman_force, propagate_meanfield
from .heisenberg import HeisenbergState, heisenberg_backreaction_force, propagate_alternative, propagate_heisenberg
from .equivalence import benchmark_schemes, compare_schemes, convergence_study, energy_rate_check

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClassicalState", "DivergenceError", "HeisenbergState", "HybridModel", "HybridPropError",
    "IntegratorSpec", "InvariantViolation", "MeanFieldState", "RejectedInput", "Trajectory", "UnsupportedModel",
    "benchmark_schemes", "build_oscillator_oscillator", "build_spin_oscillator", "compare_schemes",
    "convergence_study", "energy_rate_check", "hellmann_feynman_force", "heisenberg_backreaction_force",
    "load_model", "propagate_alternative", "propagate_heisenberg", "propagate_meanfield", "read_trajectory_csv",
    "total_meanfield_energy", "write_trajectory_csv",
]
