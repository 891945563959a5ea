"""Environment invariant linear least squares for multi-environment regression."""

from .data import (
    EnvironmentSample,
    MultiEnvDataset,
    SampleSizeDiagnostics,
    SufficientStats,
    compute_stats,
    load_csv,
    make_weights,
    sample_size_diagnostics,
    write_csv,
)
from .estimator import EILLSRegressor
from .exceptions import (
    ConfigurationError,
    EillsError,
    ParseError,
    SchemaError,
    SingularSupportError,
    SolverError,
    ValidationError,
)
from .objective import ObjectiveValue, eills_objective, enhanced_reg, invariance_reg, l0_objective, pooled_risk
from .solver import (
    FitResult,
    SearchConfig,
    exhaustive_eills,
    gamma_path,
    l0_exhaustive,
    lambda_path,
    minimize_on_support,
    pooled_least_squares,
    restricted_normal_system,
)

__version__ = "0.1.0"
