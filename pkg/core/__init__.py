"""Core utilities for the functional factor covariance toolkit."""

from core.config import (
    THREADS,
    LOG_LEVEL,
    SCHEMA_VERSION,
    OUTPUT_DIR,
    BASIS_CONFIG,
    THRESHOLD_CONFIG,
    SELECTION_CONFIG,
    INVERSE_CONFIG,
    SIM_CONFIG,
    PORTFOLIO_CONFIG,
    BENCH_CONFIG,
)
from core.errors import (
    FFMError,
    InvalidArgumentError,
    SchemaError,
    SingularInputError,
    NumericalError,
    DegenerateConfigError,
)
from core.models import (
    BasisKind,
    NormKind,
    BasisSpec,
    Curve,
    FunctionalPanel,
    KernelMatrix,
    MercerDecomposition,
    LongPanel,
)
from core.basis import (
    make_basis,
    basis_from_grid,
    basis_from_dict,
    project,
    evaluate,
    transfer_matrix,
    inner_product,
    kernel_norm,
    mercer_eigen,
    apply_kernel,
)
from core.covariance import center, sample_cov
from core.data_loader import (
    load_json_file,
    write_json_file,
    load_long_panel,
    load_price_panel,
    write_long_panel,
    write_kernel_matrix,
    load_kernel_matrix,
)

__all__ = [
    # Config
    "THREADS",
    "LOG_LEVEL",
    "SCHEMA_VERSION",
    "OUTPUT_DIR",
    "BASIS_CONFIG",
    "THRESHOLD_CONFIG",
    "SELECTION_CONFIG",
    "INVERSE_CONFIG",
    "SIM_CONFIG",
    "PORTFOLIO_CONFIG",
    "BENCH_CONFIG",
    # Errors
    "FFMError",
    "InvalidArgumentError",
    "SchemaError",
    "SingularInputError",
    "NumericalError",
    "DegenerateConfigError",
    # Models
    "BasisKind",
    "NormKind",
    "BasisSpec",
    "Curve",
    "FunctionalPanel",
    "KernelMatrix",
    "MercerDecomposition",
    "LongPanel",
    # Basis
    "make_basis",
    "basis_from_grid",
    "basis_from_dict",
    "project",
    "evaluate",
    "transfer_matrix",
    "inner_product",
    "kernel_norm",
    "mercer_eigen",
    "apply_kernel",
    # Covariance
    "center",
    "sample_cov",
    # Data Loader
    "load_json_file",
    "write_json_file",
    "load_long_panel",
    "load_price_panel",
    "write_long_panel",
    "write_kernel_matrix",
    "load_kernel_matrix",
]
