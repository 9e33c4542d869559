"""Constructive machinery for time quasi-periodic solutions of nonlinear
Klein-Gordon equations on the torus: exact quadratic-irrational arithmetic,
sparse cosine series, frequency basis selection, characteristics and their
clusters, truncated linearized operators, and the Newton iteration over
growing boxes."""

from .exactfield import (
    IntegerFactorization,
    QuadFieldElement,
    check_linear_nonvanishing,
    check_quadratic_nonequality,
    classify_quadratic_square,
    factorize,
    is_square_free,
    square_free_split,
)
from .fourier import (
    CosineSeries,
    Nonlinearity,
    Weight,
    convolve,
    evaluate,
    pde_residual_on_grid,
    power,
    residual,
    weighted_norm,
)
from .basis import (
    BasisSelectionError,
    ConditionReport,
    FrequencyBasis,
    check_condition_i,
    check_condition_ii,
    check_condition_iii,
    select_basis,
)
from .characteristics import (
    AdjacencySet,
    Cluster,
    chain_probe,
    cluster_decomposition,
    cluster_pattern_bound,
    enumerate_characteristics,
    is_on_characteristics,
    spacing_dichotomy,
    theta_zoo,
    verify_cluster_bounds,
)
from .linop import (
    Box,
    ExcisionSignal,
    SweepThresholds,
    TruncatedOperator,
    block_decomposition,
    build_operator,
    default_near_set,
    lipschitz_zero_family,
    measure_green_decay,
    schur_invert,
    theta_bad_sweep,
)
from .newton import (
    NewtonTrace,
    RunResult,
    SolutionState,
    SolverParameters,
    diophantine_gate,
    frequency_jacobian,
    newton_step,
    pinned_amplitudes,
    q_solve,
    quadratic_gate,
    run,
    small_divisor_fit,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencySet",
    "BasisSelectionError",
    "Box",
    "Cluster",
    "ConditionReport",
    "CosineSeries",
    "ExcisionSignal",
    "FrequencyBasis",
    "IntegerFactorization",
    "NewtonTrace",
    "Nonlinearity",
    "QuadFieldElement",
    "RunResult",
    "SolutionState",
    "SolverParameters",
    "SweepThresholds",
    "TruncatedOperator",
    "Weight",
    "block_decomposition",
    "build_operator",
    "chain_probe",
    "check_condition_i",
    "check_condition_ii",
    "check_condition_iii",
    "check_linear_nonvanishing",
    "check_quadratic_nonequality",
    "classify_quadratic_square",
    "cluster_decomposition",
    "cluster_pattern_bound",
    "convolve",
    "default_near_set",
    "diophantine_gate",
    "enumerate_characteristics",
    "evaluate",
    "factorize",
    "frequency_jacobian",
    "is_on_characteristics",
    "is_square_free",
    "lipschitz_zero_family",
    "measure_green_decay",
    "newton_step",
    "pde_residual_on_grid",
    "pinned_amplitudes",
    "power",
    "q_solve",
    "quadratic_gate",
    "residual",
    "run",
    "schur_invert",
    "select_basis",
    "small_divisor_fit",
    "spacing_dichotomy",
    "square_free_split",
    "theta_bad_sweep",
    "theta_zoo",
    "verify_cluster_bounds",
    "weighted_norm",
]
