"""Factor-guided covariance estimators, thresholding, selection and inversion."""

from estimators.aft import (
    ThresholdFamily,
    ThresholdRule,
    VarianceFactors,
    variance_factors,
    threshold_level,
    apply_aft,
    cv_select_C,
    functional_sparsity,
)
from estimators.digit import DigitFit, OmegaMatrix, gram_omega, digit_estimator, omega_parts
from estimators.fpoet import FpoetFit, Solver, mfpca, fpoet_estimator, ls_estimator, check_equivalence, spectral_parts
from estimators.select import (
    ModelKind,
    SelectionReport,
    ratio_digit,
    ratio_fpoet,
    mean_squared_residuals,
    information_criteria,
    select_model,
)
from estimators.inverse import (
    InverseMode,
    InverseSpec,
    truncated_inverse,
    smw_inverse,
    correlation_pair,
)

__all__ = [
    # Thresholding
    "ThresholdFamily",
    "ThresholdRule",
    "VarianceFactors",
    "variance_factors",
    "threshold_level",
    "apply_aft",
    "cv_select_C",
    "functional_sparsity",
    # DIGIT
    "DigitFit",
    "OmegaMatrix",
    "gram_omega",
    "digit_estimator",
    "omega_parts",
    # FPOET
    "FpoetFit",
    "Solver",
    "mfpca",
    "fpoet_estimator",
    "ls_estimator",
    "check_equivalence",
    "spectral_parts",
    # Selection
    "ModelKind",
    "SelectionReport",
    "ratio_digit",
    "ratio_fpoet",
    "mean_squared_residuals",
    "information_criteria",
    "select_model",
    # Inversion
    "InverseMode",
    "InverseSpec",
    "truncated_inverse",
    "smw_inverse",
    "correlation_pair",
]
