"""Finite, seeded diagnostics for measure-preserving systems.

Build a symbolic system, sample a trajectory, and measure it: block and
conditional entropies, coupling distances between block laws, and
finite-window certificates for Bernoulli-like, K-like, and relative-mixing
behavior of fiber extensions.  Everything is deterministic given its seed.
"""

from .core import (
    Alphabet,
    FiniteAlgebra,
    Partition,
    Word,
    WordDistribution,
    distance_to_algebra,
    empirical_word_distribution,
    join,
    join_all,
    measure_algebra_distance,
    nearest_algebra_set,
    read_distribution_csv,
    read_word_file,
    window_codes,
    window_keys,
    write_distribution_csv,
    write_word_file,
)
from .diagnostics import (
    ConditionalLawReport,
    DiagnosticReport,
    KPropertyReport,
    RelativeMixingResult,
    ZeroEntropyVlbReport,
    ea_statistic,
    factor_rwm_statistic,
    fiber_half_set,
    k_property_check,
    product_set,
    relative_mixing_statistic,
    rwm_verdict,
    vlb_statistic,
    vlb_zero_entropy,
    vwb_statistic,
)
from .entropy import (
    EntropyEstimate,
    analytic_entropy,
    block_entropy,
    calibrate_independence_margin,
    conditional_block_entropy,
    entropy_rate_estimate,
    eps_independence,
    independence_entropy_margin,
)
from .errors import (
    DimensionError,
    ErgolabError,
    InsufficientDataError,
    ParameterError,
    PreconditionError,
    ReturnTimeOverflowError,
    ValidationError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    default_config,
    emit_report,
    load_config,
    run_class_preservation,
    run_entropy_genericity,
    run_experiment,
    run_rwm_genericity,
)
from .metrics import (
    Coupling,
    TransportResult,
    dbar_distributions,
    dbar_words,
    fbar_distributions,
    fbar_words,
    lcs_length,
    solve_transport,
    weak_distance,
)
from .seeds import derive_seed
from .systems import (
    BernoulliShift,
    CocycleSpec,
    FinitePermutation,
    Induced,
    MarkovShift,
    RelIndepProduct,
    RotationCoding,
    SkewProduct,
    TfTriple,
    TrajectorySample,
    cell_driven_cocycle,
    conditional_expectation,
    constant_cocycle,
    dyadic_fiber_partition,
    frozen_cocycle,
    generator_partition,
    induce,
    lifted_base_partition,
    load_system,
    product_partition,
    random_permutation_cocycle,
    random_rotation_cocycle,
    read_trajectory,
    relative_independent_product,
    sample_trajectory,
    skew_product,
    t_f_triple,
    write_trajectory,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
