"""Energy-filtered dynamical response functions of free-fermion chains.

Gaussian-state (Majorana covariance) simulation of spectral energy filters,
Kubo linear response, and filter-ensemble sampling for disordered
tight-binding models, with a dense exact-diagonalization oracle for
validation at small sizes.
"""

from .ensemble import (
    ChainDiagnostics,
    SamplerConfig,
    canonical_expectation,
    ensemble_expectation_exact,
    ensemble_expectation_sampled,
    mh_sample,
    run_chains,
    state_weight,
)
from .errors import (
    ConfigError,
    DimensionMismatchError,
    FermifilterError,
    OrthogonalStatesError,
    OverlapFloorError,
    SpectralWeightError,
)
from .filters import (
    FilterSpec,
    FilterWeights,
    dense_filter,
    dos,
    filtered_expectation,
    ldos,
    number_projector_phases,
    projected_trace,
    riemann_filter_weights,
    single_filter_expectation,
)
from .gaussian import (
    FockState,
    MajoranaCovariance,
    MajoranaMonomialSum,
    QuadraticHamiltonian,
    evolve_covariance,
    fock_covariance,
    gaussian_trace_phase,
    orthogonal_evolution,
    pfaffian,
    two_state_overlap_trace,
    wick_expectation,
)
from .model import (
    GOLDEN_RATIO,
    ModelSpec,
    build_hamiltonian,
    current_operator,
    inverse_participation_ratio,
    kinetic_operator,
    localization_scan,
    mobility_edges,
    onsite_potential,
    single_particle_spectrum,
)
from .response import (
    FixedFilling,
    SeriesRecord,
    TransformConfig,
    conductivity,
    filtered_anticommutator_trace,
    filtered_commutator_trace,
    fourier_half_line,
    lambda_frequency,
    loschmidt_echo,
    moving_average,
    three_time_correlator,
    time_average,
)

__version__ = "0.1.0"

__all__ = [
    "ChainDiagnostics",
    "ConfigError",
    "DimensionMismatchError",
    "FermifilterError",
    "FilterSpec",
    "FilterWeights",
    "FixedFilling",
    "FockState",
    "GOLDEN_RATIO",
    "MajoranaCovariance",
    "MajoranaMonomialSum",
    "ModelSpec",
    "OrthogonalStatesError",
    "OverlapFloorError",
    "QuadraticHamiltonian",
    "SamplerConfig",
    "SeriesRecord",
    "SpectralWeightError",
    "TransformConfig",
    "build_hamiltonian",
    "canonical_expectation",
    "conductivity",
    "current_operator",
    "dense_filter",
    "dos",
    "ensemble_expectation_exact",
    "ensemble_expectation_sampled",
    "evolve_covariance",
    "filtered_anticommutator_trace",
    "filtered_commutator_trace",
    "filtered_expectation",
    "fock_covariance",
    "fourier_half_line",
    "gaussian_trace_phase",
    "inverse_participation_ratio",
    "kinetic_operator",
    "lambda_frequency",
    "ldos",
    "localization_scan",
    "loschmidt_echo",
    "mh_sample",
    "mobility_edges",
    "moving_average",
    "number_projector_phases",
    "onsite_potential",
    "orthogonal_evolution",
    "pfaffian",
    "projected_trace",
    "riemann_filter_weights",
    "run_chains",
    "single_filter_expectation",
    "single_particle_spectrum",
    "state_weight",
    "three_time_correlator",
    "time_average",
    "two_state_overlap_trace",
    "wick_expectation",
]
