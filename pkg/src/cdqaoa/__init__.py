"""Counterdiabatic-augmented QAOA for all-to-all random Ising models."""
from .ansatz import (
    Circuit,
    Variant,
    VariationalParams,
    apply_2cd_layer,
    apply_cd_layer,
    apply_mixer_layer,
    apply_phase_layer,
    cost,
    cost_gradient,
    expectation,
    initial_state,
    prepare_state,
)
from .errors import (
    CdqaoaError,
    DegenerateSpectrumError,
    InvalidSizeError,
    MissingDataError,
    NumericalError,
    OperatorError,
    OptimizationError,
    ParameterError,
)
from .harness import (
    EnsembleConfig,
    disorder_stats,
    gap_histogram,
    landscape_scan,
    run_ensemble,
    steps_to_threshold,
    zone_binning,
)
from .metrics import MetricRecord, evaluate, excited_overlap, fidelity_ground_manifold, residual_energy
from .operators import (
    DenseOperator,
    build_mixer,
    build_target,
    cd_generator,
    commutator,
    second_order_generators,
)
from .optimizer import OptimizationResult, OptimizerConfig, minimize_variational, minimize_with_embedding
from .spin_model import SpinInstance, Spectrum, generate_instance, spectrum

__version__ = "0.1.0"
