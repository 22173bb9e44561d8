"""Centering and the sample covariance matrix function."""

import numpy as np

from core.errors import InvalidArgumentError
from core.models import FunctionalPanel, KernelMatrix


def center(panel: FunctionalPanel) -> FunctionalPanel:
    """Remove the time mean of every (series, coefficient) pair."""
    if panel.n < 2:
        raise InvalidArgumentError(f"centering needs n >= 2, got n={panel.n}", "covariance")
    coeffs = panel.coeffs - panel.coeffs.mean(axis=0, keepdims=True)
    return FunctionalPanel(coeffs, panel.basis, panel.projection_error)


def sample_cov(panel: FunctionalPanel | np.ndarray) -> KernelMatrix:
    """n^{-1} sum_t y_t y_t^T in coefficient space (divisor n, no re-centering).

    Accepts a panel or a raw (n, p, K) coefficient array so factor series,
    residuals and cross-validation folds share one code path.
    """
    coeffs = panel.coeffs if isinstance(panel, FunctionalPanel) else np.asarray(panel, dtype=float)
    if coeffs.ndim != 3:
        raise InvalidArgumentError(f"expected an (n, p, K) array, got shape {coeffs.shape}", "covariance")
    n = coeffs.shape[0]
    if n == 0:
        raise InvalidArgumentError("cannot form a covariance from an empty panel", "covariance")
    blocks = np.einsum("tik,tjl->ijkl", coeffs, coeffs) / n
    # einsum leaves round-off asymmetry between (i, j) and (j, i)
    return KernelMatrix(0.5 * (blocks + blocks.transpose(1, 0, 3, 2)))
