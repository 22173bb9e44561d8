"""DIGIT: factor-guided covariance estimation with functional factors and scalar loadings.

The loading space is read off the eigenvectors of the doubly integrated Gram
covariance Omega = int int S(u, v) S(u, v)^T du dv, the functional factors are
recovered by least squares, and the residual covariance is thresholded.
"""

import logging
from dataclasses import dataclass

import numpy as np

from core.basis import symmetric_eigh
from core.covariance import sample_cov
from core.errors import InvalidArgumentError
from core.models import FunctionalPanel, KernelMatrix
from estimators.aft import ThresholdRule, threshold_residuals

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class OmegaMatrix:
    """Doubly integrated Gram covariance, a p x p symmetric PSD matrix."""
    mat: np.ndarray

    def __post_init__(self):
        mat = np.array(self.mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidArgumentError(f"Omega must be square, got shape {mat.shape}", "digit")
        mat = 0.5 * (mat + mat.T)
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @property
    def p(self) -> int:
        return self.mat.shape[0]

    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (descending) and sign-fixed eigenvectors."""
        return symmetric_eigh(self.mat)


@dataclass(frozen=True, eq=False)
class DigitFit:
    """Fitted functional-factor model with scalar loadings."""
    B_hat: np.ndarray                 # p x r, p^{-1} B^T B = I_r
    factors: FunctionalPanel          # n x r functional factors
    Sigma_f_hat: KernelMatrix         # r x r
    residuals: FunctionalPanel        # n x p
    omega_eigenvalues: np.ndarray     # p, descending
    r: int
    Sigma_eps_hat: KernelMatrix | None = None
    Sigma_eps_thresholded: KernelMatrix | None = None

    def common_covariance(self) -> KernelMatrix:
        return loading_sandwich(self.B_hat, self.Sigma_f_hat)


@dataclass(frozen=True, eq=False)
class OmegaParts:
    """Population Omega split into its low-rank and remainder parts."""
    omega: OmegaMatrix
    omega_L: np.ndarray
    omega_R: np.ndarray
    leading: np.ndarray  # p^2 theta_j, the nonzero eigenvalues of omega_L


def loading_sandwich(B: np.ndarray, Sigma_f: KernelMatrix) -> KernelMatrix:
    """B Sigma_f B^T for a scalar p x r loading matrix and an r x r kernel matrix."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[1] != Sigma_f.p_rows:
        raise InvalidArgumentError(f"loadings {B.shape} do not match factor covariance with r={Sigma_f.p_rows}", "digit")
    return KernelMatrix(np.einsum("ia,jb,abkl->ijkl", B, B, Sigma_f.blocks))


def gram_omega(S: KernelMatrix) -> OmegaMatrix:
    """Omega[i, l] = sum_j trace(S_ij S_lj^T)."""
    if not S.is_square:
        raise InvalidArgumentError(f"Omega needs a square kernel matrix, got {S.p_rows}x{S.p_cols}", "digit")
    return OmegaMatrix(np.einsum("ijkm,ljkm->il", S.blocks, S.blocks))


def estimate_loadings(omega: OmegaMatrix, r: int) -> np.ndarray:
    """sqrt(p) times the top-r eigenvectors of Omega."""
    if not 1 <= r <= omega.p:
        raise InvalidArgumentError(f"r={r} must lie in [1, {omega.p}]", "digit")
    _, vectors = omega.eigen()
    return np.sqrt(omega.p) * vectors[:, :r]


def estimate_factors(panel: FunctionalPanel, B_hat: np.ndarray) -> FunctionalPanel:
    """Least-squares factors f_t = p^{-1} B^T y_t, applied per basis coefficient."""
    B_hat = np.asarray(B_hat, dtype=float)
    if B_hat.ndim != 2 or B_hat.shape[0] != panel.p:
        raise InvalidArgumentError(f"loadings {B_hat.shape} do not match a panel with p={panel.p}", "digit")
    return panel.with_coeffs(np.einsum("ir,tik->trk", B_hat, panel.coeffs) / panel.p)


def project_out(panel: FunctionalPanel, B_hat: np.ndarray) -> FunctionalPanel:
    """Residuals y_t - p^{-1} B B^T y_t."""
    factors = estimate_factors(panel, B_hat)
    return panel.with_coeffs(panel.coeffs - np.einsum("ir,trk->tik", B_hat, factors.coeffs))


def digit_estimator(
    panel: FunctionalPanel,
    r: int,
    rule: ThresholdRule,
    threshold_diagonal: bool = False,
) -> tuple[KernelMatrix, DigitFit]:
    """DIGIT covariance estimate B Sigma_f B^T + AFT(Sigma_eps).

    Args:
        panel: Centered panel of n observations of p curves.
        r: Number of functional factors.
        rule: Thresholding rule for the idiosyncratic part.
        threshold_diagonal: Also threshold the diagonal blocks.

    Returns:
        Tuple of (estimate, fit).
    """
    S = sample_cov(panel)
    omega = gram_omega(S)
    eigenvalues, _ = omega.eigen()
    B_hat = estimate_loadings(omega, r)

    factors = estimate_factors(panel, B_hat)
    residuals = panel.with_coeffs(panel.coeffs - np.einsum("ir,trk->tik", B_hat, factors.coeffs))
    Sigma_f = sample_cov(factors)
    Sigma_eps, Sigma_eps_A = threshold_residuals(residuals, rule, threshold_diagonal)

    fit = DigitFit(
        B_hat=B_hat,
        factors=factors,
        Sigma_f_hat=Sigma_f,
        residuals=residuals,
        omega_eigenvalues=eigenvalues,
        r=r,
        Sigma_eps_hat=Sigma_eps,
        Sigma_eps_thresholded=Sigma_eps_A,
    )
    estimate = (fit.common_covariance() + Sigma_eps_A).symmetrized()
    logger.info("DIGIT fit: p=%d n=%d r=%d, leading Omega eigenvalue %.4g", panel.p, panel.n, r, eigenvalues[0])
    return estimate, fit


def omega_parts(B: np.ndarray, Sigma_f: KernelMatrix, Sigma_eps: KernelMatrix) -> OmegaParts:
    """Population Omega = Omega_L + Omega_R for Sigma_y = B Sigma_f B^T + Sigma_eps."""
    common = loading_sandwich(B, Sigma_f)
    omega = gram_omega(common + Sigma_eps)
    omega_L = gram_omega(common).mat
    leading = np.sort(np.linalg.eigvalsh(omega_L))[::-1][: np.asarray(B).shape[1]]
    return OmegaParts(omega=omega, omega_L=omega_L, omega_R=omega.mat - omega_L, leading=leading)
