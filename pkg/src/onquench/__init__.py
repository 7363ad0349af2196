"""Quench dynamics and slab entanglement spectra of the large-N O(N) model in d=3."""

from .analysis import (
    FitReport,
    GapSeries,
    collapse_fit,
    degeneracy_splitting,
    fit_log_growth,
    fit_power_law,
    fit_shifted_power,
    front_position,
    front_speed_fit,
    prefactor_scan,
)
from .correlators import (
    CorrelationMatrix,
    MomentumCorrelators,
    correlators_at,
    mixed_correlation_matrix,
)
from .entropy import EntropyRecord, block_entropy, mode_entropy, slab_entropy
from .errors import ConfigError, NumericsError, PairingError, UnstableEvolutionError
from .evolve import (
    ModeState,
    Trajectory,
    conserved_energy,
    effective_mass,
    evolve,
    init_modes,
    momentum_kernels,
    step,
    wronskian_residual,
)
from .model import (
    ModelConfig,
    RadialGrid,
    SlabGeometry,
    build_slab_geometry,
    critical_mass,
    radial_grid,
    regulator,
    resolve_post_quench_mass,
)
from .pipeline import ExperimentPlan, RunManifest, get_trajectory, run
from .symplectic import (
    EntanglementBlock,
    ModeProfile,
    dispersion_from_lambda,
    entanglement_block,
    entanglement_eigenvectors,
    symplectic_spectrum,
)

__version__ = "0.1.0"
