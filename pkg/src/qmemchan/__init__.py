"""Quantum channels with memory: simulation, entropic quantities and capacity bounds."""

from .capacity import (
    CapacityOptions,
    CapacityReport,
    ConvergenceExperiment,
    OptimizationResult,
    capacity_convergence_experiment,
    convergence_gap_bound,
    ensemble_chi,
    lower_upper_capacity,
    memory_candidates,
    optimize_chi_n,
)
from .channels import (
    PAULI,
    ChannelSpec,
    MarkovChannelSpec,
    MemoryMap,
    ValidationError,
    apply_memory_channel,
    apply_memoryless,
    apply_product_channel,
    build_markov_channel,
    build_shift_channel,
    depolarizing_spec,
    factorized_spec,
    identity_channel,
    induced_memory_map,
    is_fixed_point_channel,
    markov_counterpart,
    memoryless_spec,
    run_channel,
)
from .entropics import (
    CQEnsemble,
    SeparableDecomposition,
    cq_embed,
    extend_separable,
    fannes_bound,
    holevo_chi,
    mutual_information,
    shannon_entropy,
    von_neumann_entropy,
)
from .indecomposability import (
    check_memory_continuity,
    contraction_coefficient,
    estimate_mixing_time,
    memory_trajectory_distance,
)
from .linalg import DensityMatrix, DimensionError, NotHermitianError, NotPSDError, partial_trace, trace_distance
from .specfile import SpecParseError, load_bundled, parse_channel_spec

__version__ = "0.1.0"

__all__ = [
    "CQEnsemble",
    "CapacityOptions",
    "CapacityReport",
    "ChannelSpec",
    "ConvergenceExperiment",
    "DensityMatrix",
    "DimensionError",
    "MarkovChannelSpec",
    "MemoryMap",
    "NotHermitianError",
    "NotPSDError",
    "OptimizationResult",
    "PAULI",
    "SeparableDecomposition",
    "SpecParseError",
    "ValidationError",
    "apply_memory_channel",
    "apply_memoryless",
    "apply_product_channel",
    "build_markov_channel",
    "build_shift_channel",
    "capacity_convergence_experiment",
    "check_memory_continuity",
    "contraction_coefficient",
    "convergence_gap_bound",
    "cq_embed",
    "depolarizing_spec",
    "ensemble_chi",
    "estimate_mixing_time",
    "extend_separable",
    "factorized_spec",
    "fannes_bound",
    "holevo_chi",
    "identity_channel",
    "induced_memory_map",
    "is_fixed_point_channel",
    "load_bundled",
    "lower_upper_capacity",
    "markov_counterpart",
    "memory_candidates",
    "memory_trajectory_distance",
    "memoryless_spec",
    "mutual_information",
    "optimize_chi_n",
    "parse_channel_spec",
    "partial_trace",
    "run_channel",
    "shannon_entropy",
    "trace_distance",
    "von_neumann_entropy",
]
