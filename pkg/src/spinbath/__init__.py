"""Exact dephasing dynamics of two entangling spins in finite spin baths.

Modules:

- :mod:`spinbath.states`: two-spin states, coherence factors, negativity
- :mod:`spinbath.bath`: diagonal bath distributions and configuration enumeration
- :mod:`spinbath.lattice`: hopping spins on a torus, phase accumulation, decoherence factors
- :mod:`spinbath.ensemble`: seeded batch-parallel trajectory averages
- :mod:`spinbath.collision`: the Markovian collision-model reference
- :mod:`spinbath.reset`: Poisson-timed resets and steady-state sweeps
- :mod:`spinbath.molecule`: thermal dipolar baths in a rigid molecule
- :mod:`spinbath.config` and :mod:`spinbath.cli`: experiment configuration and command line
"""

from .bath import CapacityError, DiagonalDistribution
from .collision import CollisionParams, collision_coefficients, evolve_collision
from .ensemble import EnsembleResult, ensemble_negativity
from .lattice import (
    LatticeConfig,
    TorusLattice,
    accumulate_phases,
    decoherence_factor_bruteforce,
    decoherence_factor_product,
    neighbor_sites,
    run_trajectory,
    step_positions,
)
from .molecule import (
    CouplingSet,
    MoleculeGeometry,
    Orientation,
    ThermalParams,
    build_couplings,
    decoherence_factor_thermal,
    dipole_coupling,
    dpme_geometry,
    gibbs_distribution,
    initial_decay_R,
    initial_decay_R_uncorrelated,
    load_geometry,
    orientation_averaged_decay,
    thermal_quantile,
)
from .reset import ResetConfig, reset_ensemble, run_reset_trajectory, sample_reset_times, steady_state_sweep
from .states import (
    StateError,
    apply_dephasing,
    bell_state,
    negativity,
    plus_plus,
    pure_state,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CollisionParams",
    "CouplingSet",
    "DiagonalDistribution",
    "EnsembleResult",
    "LatticeConfig",
    "MoleculeGeometry",
    "Orientation",
    "ResetConfig",
    "StateError",
    "ThermalParams",
    "TorusLattice",
    "accumulate_phases",
    "apply_dephasing",
    "bell_state",
    "build_couplings",
    "collision_coefficients",
    "decoherence_factor_bruteforce",
    "decoherence_factor_product",
    "decoherence_factor_thermal",
    "dipole_coupling",
    "dpme_geometry",
    "ensemble_negativity",
    "evolve_collision",
    "gibbs_distribution",
    "initial_decay_R",
    "initial_decay_R_uncorrelated",
    "load_geometry",
    "negativity",
    "neighbor_sites",
    "orientation_averaged_decay",
    "plus_plus",
    "pure_state",
    "reset_ensemble",
    "run_reset_trajectory",
    "run_trajectory",
    "sample_reset_times",
    "steady_state_sweep",
    "step_positions",
    "thermal_quantile",
]
