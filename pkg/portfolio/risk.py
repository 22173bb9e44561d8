"""Functional risk management: weighted quadratic norm, minimum-variance weights and risks."""

import logging
from dataclasses import dataclass

import numpy as np

from core.basis import evaluate
from core.config import PORTFOLIO_CONFIG
from core.errors import InvalidArgumentError, SingularInputError
from core.models import BasisSpec, FunctionalPanel, KernelMatrix
from estimators.inverse import POSITIVE_TOL, InverseSpec, truncated_power

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    """Allocation vector function w(u) as a (p, K) coefficient array.

    ``constraint_residual`` is max_u |1^T w(u) - 1| before any renormalization.
    """
    w: np.ndarray
    constraint_residual: float
    renormalized: bool = False
    d_n: int | None = None

    def on_grid(self, basis: BasisSpec) -> np.ndarray:
        return evaluate(self.w, basis)

    def to_dict(self) -> dict:
        return {
            "constraint_residual": self.constraint_residual,
            "renormalized": self.renormalized,
            "d_n": self.d_n,
            "w": self.w.tolist(),
        }


def weighted_quadratic_norm(K_op: KernelMatrix, Sigma_y: KernelMatrix, spec: InverseSpec | None = None) -> float:
    """|Sigma^{-1/2} K Sigma^{-1/2}|_SF / sqrt(d_n) with the truncated inverse square root."""
    spec = spec or InverseSpec()
    if K_op.blocks.shape != Sigma_y.blocks.shape:
        raise InvalidArgumentError(f"kernel shapes differ: {K_op.blocks.shape} vs {Sigma_y.blocks.shape}", "portfolio")
    root, d_n = truncated_power(Sigma_y, spec.energy, -0.5)
    W = root.flat()
    return float(np.linalg.norm(W @ K_op.flat() @ W) / np.sqrt(d_n))


def constant_coefficients(basis: BasisSpec) -> np.ndarray:
    """Coefficients of the constant function 1 in the basis."""
    return basis.values.T @ basis.quad_weights


def constraint_residual(w: np.ndarray, basis: BasisSpec) -> float:
    return float(np.abs(evaluate(np.asarray(w).sum(axis=0), basis) - 1.0).max())


def min_variance_weights(
    Sigma_y_hat: KernelMatrix,
    basis: BasisSpec,
    spec: InverseSpec | None = None,
    tol: float = PORTFOLIO_CONFIG["constraint_tol"],
) -> PortfolioWeights:
    """Minimum-variance functional allocation subject to 1^T w(u) = 1 for every u.

    Args:
        Sigma_y_hat: Estimated covariance matrix function.
        basis: Basis of the coefficient space, used for the grid constraint.
        spec: Truncation settings for the inverse.
        tol: Grid residual above which the weights are renormalized.

    Returns:
        PortfolioWeights with the pre-normalization constraint residual.
    """
    spec = spec or InverseSpec()
    p, K = Sigma_y_hat.p_rows, Sigma_y_hat.K
    if basis.K != K:
        raise InvalidArgumentError(f"basis has K={basis.K} but the covariance has K={K}", "portfolio")

    inverse, d_n = truncated_power(Sigma_y_hat, spec.energy, -1.0)
    S_inv = inverse.flat()
    E = np.kron(np.ones((p, 1)), np.eye(K))                 # pK x K
    H = E.T @ S_inv @ E

    h_values, h_vectors = np.linalg.eigh(0.5 * (H + H.T))
    top = h_values.max(initial=0.0)
    if top <= 0:
        raise SingularInputError("aggregated precision kernel H is singular", "portfolio")
    keep = h_values > POSITIVE_TOL * top
    H_pinv = (h_vectors[:, keep] / h_values[keep]) @ h_vectors[:, keep].T

    c1 = constant_coefficients(basis)
    w = (S_inv @ E @ H_pinv @ c1).reshape(p, K)
    residual = constraint_residual(w, basis)
    renormalized = residual > tol
    if renormalized:
        w = w + (c1 - w.sum(axis=0)) / p
        logger.info("renormalized weights (grid residual %.2e before)", residual)
    return PortfolioWeights(w=w, constraint_residual=residual, renormalized=renormalized, d_n=d_n)


def perceived_risk(w: PortfolioWeights | np.ndarray, Sigma_hat: KernelMatrix) -> float:
    """<w, Sigma(w)>."""
    coeffs = np.asarray(w.w if isinstance(w, PortfolioWeights) else w, dtype=float)
    if coeffs.shape != (Sigma_hat.p_rows, Sigma_hat.K):
        raise InvalidArgumentError(f"weights {coeffs.shape} do not match ({Sigma_hat.p_rows}, {Sigma_hat.K})", "portfolio")
    flat = coeffs.ravel()
    return float(flat @ Sigma_hat.flat() @ flat)


def actual_risk(
    w: PortfolioWeights | np.ndarray,
    holdout: FunctionalPanel | np.ndarray,
    basis: BasisSpec | None = None,
) -> float:
    """Realized variance m^{-1} sum_t (int w(u)^T y_t(u) du)^2 over a holdout window.

    ``holdout`` is either a coefficient panel or (m, p, G) grid samples, in which
    case the integral uses the basis quadrature.
    """
    coeffs = np.asarray(w.w if isinstance(w, PortfolioWeights) else w, dtype=float)
    if isinstance(holdout, FunctionalPanel):
        if holdout.coeffs.shape[1:] != coeffs.shape:
            raise InvalidArgumentError("holdout panel does not match the weights", "portfolio")
        scores = np.einsum("tik,ik->t", holdout.coeffs, coeffs)
    else:
        if basis is None:
            raise InvalidArgumentError("grid holdout samples need the basis quadrature", "portfolio")
        samples = np.asarray(holdout, dtype=float)
        if samples.ndim != 3 or samples.shape[1:] != (coeffs.shape[0], basis.G):
            raise InvalidArgumentError(f"holdout samples {samples.shape} do not match the weights", "portfolio")
        scores = np.einsum("tig,ig,g->t", samples, evaluate(coeffs, basis), basis.quad_weights)
    return float(np.mean(scores**2)) if scores.size else 0.0


def cidr(prices) -> np.ndarray:
    """Cumulative intraday returns 100 (log P(u) - log P(u_1)) from (n, p, G) prices."""
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 3:
        raise InvalidArgumentError(f"prices must be (n, p, G), got shape {prices.shape}", "portfolio")
    if not np.all(prices > 0):
        raise InvalidArgumentError("prices must be strictly positive", "portfolio")
    logs = np.log(prices)
    return 100.0 * (logs - logs[..., :1])
