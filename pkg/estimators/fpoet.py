"""FPOET: scalar factors with functional loadings.

The low-rank part is the leading multivariate functional principal components
of the sample covariance matrix function; the principal orthogonal complement
is thresholded. ``ls_fit`` solves the equivalent constrained least-squares
problem through the n x n dual matrix, and ``check_equivalence`` measures how
far the two pipelines drift apart numerically.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import linalg

from core.basis import kernel_norm, sign_fix, symmetric_eigh
from core.covariance import sample_cov
from core.errors import InvalidArgumentError
from core.models import FunctionalPanel, KernelMatrix
from estimators.aft import ThresholdRule, apply_aft, threshold_residuals, variance_factors

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12


class Solver(str, Enum):
    """Eigen-solver path for the MFPCA step."""
    AUTO = "auto"
    PRIMAL = "primal"
    DUAL = "dual"


@dataclass(frozen=True, eq=False)
class FpoetFit:
    """Fitted scalar-factor model with functional loadings."""
    tau_hat: np.ndarray            # eigenvalues, descending
    phi_hat: np.ndarray            # r x p x K eigenfunctions
    R_hat: KernelMatrix            # principal orthogonal complement
    Gamma_hat: np.ndarray          # n x r, n^{-1} Gamma^T Gamma = I_r
    Q_hat: np.ndarray              # p x r x K functional loadings
    residuals: FunctionalPanel
    r: int
    R_thresholded: KernelMatrix | None = None

    def low_rank(self) -> KernelMatrix:
        return loading_outer(self.Q_hat)


@dataclass(frozen=True, eq=False)
class SpectralParts:
    """Population Sigma_y = Q Q^T + Sigma_eps with the spectrum of Q Q^T."""
    Sigma_y: KernelMatrix
    common: KernelMatrix
    leading: np.ndarray  # p * vartheta_j


def loading_outer(Q: np.ndarray) -> KernelMatrix:
    """Q(u) Q(v)^T for functional loadings stored as a (p, r, K) array."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 3:
        raise InvalidArgumentError(f"functional loadings must be (p, r, K), got {Q.shape}", "fpoet")
    return KernelMatrix(np.einsum("iak,jal->ijkl", Q, Q))


def _check_rank(panel: FunctionalPanel, r: int) -> None:
    limit = min(panel.n, panel.p * panel.K)
    if not 0 <= r <= limit:
        raise InvalidArgumentError(f"r={r} must lie in [0, {limit}] (min of n and pK)", "fpoet")


def _resolve_solver(solver: Solver | str, panel: FunctionalPanel) -> Solver:
    try:
        solver = Solver(solver)
    except ValueError as exc:
        raise InvalidArgumentError(f"unknown solver: {solver!r}", "fpoet") from exc
    if solver is Solver.AUTO:
        return Solver.PRIMAL if panel.p * panel.K <= 2 * panel.n else Solver.DUAL
    return solver


def mfpca(panel: FunctionalPanel, solver: Solver | str = Solver.AUTO) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unit eigenvectors (pK columns) of the sample covariance flattening.

    The dual path works on M = Y Y^T and returns only the spectrum it can see,
    which is the full nonzero spectrum.
    """
    solver = _resolve_solver(solver, panel)
    Y = panel.flat()
    if solver is Solver.PRIMAL:
        return symmetric_eigh(sample_cov(panel).flat())

    mu, V = symmetric_eigh(Y @ Y.T)
    tau = np.clip(mu, 0.0, None) / panel.n
    keep = mu > RANK_TOL * max(1.0, float(mu[0]) if mu.size else 1.0)
    phi = np.zeros((Y.shape[1], len(mu)))
    phi[:, keep] = (Y.T @ V[:, keep]) / np.sqrt(mu[keep])
    return np.where(keep, tau, 0.0), sign_fix(phi)


def fpoet_estimator(
    panel: FunctionalPanel,
    r: int,
    rule: ThresholdRule,
    solver: Solver | str = Solver.AUTO,
    threshold_diagonal: bool = False,
) -> tuple[KernelMatrix, FpoetFit]:
    """FPOET covariance estimate sum_{j<=r} tau_j phi_j phi_j^T + AFT(R_hat).

    Args:
        panel: Centered panel.
        r: Number of scalar factors, 0 <= r <= min(n, pK).
        rule: Thresholding rule for the principal orthogonal complement.
        solver: ``primal`` (pK x pK), ``dual`` (n x n) or ``auto``.
        threshold_diagonal: Also threshold the diagonal blocks.

    Returns:
        Tuple of (estimate, fit).
    """
    _check_rank(panel, r)
    tau, phi = mfpca(panel, solver)
    if r and tau[r - 1] <= RANK_TOL * max(1.0, float(tau[0])):
        raise InvalidArgumentError(f"r={r} exceeds the numerical rank of the sample covariance", "fpoet")

    p, K, n = panel.p, panel.K, panel.n
    Y = panel.flat()
    lead = phi[:, :r]
    scores = Y @ lead                                   # <y_t, phi_j>
    Gamma = scores / np.sqrt(tau[:r])
    Q = (lead * np.sqrt(tau[:r])).T.reshape(r, p, K).transpose(1, 0, 2)
    residuals = panel.with_coeffs((Y - scores @ lead.T).reshape(n, p, K))

    S = sample_cov(panel)
    low_rank = KernelMatrix.from_flat((lead * tau[:r]) @ lead.T, p, p, K)
    R_hat = (S - low_rank).symmetrized()
    if rule.C_dot == 0:
        R_A = R_hat
    else:
        R_A = apply_aft(R_hat, variance_factors(residuals, R_hat), rule, n, p, threshold_diagonal)

    fit = FpoetFit(
        tau_hat=tau,
        phi_hat=lead.T.reshape(r, p, K),
        R_hat=R_hat,
        Gamma_hat=Gamma,
        Q_hat=Q,
        residuals=residuals,
        r=r,
        R_thresholded=R_A,
    )
    logger.info("FPOET fit: p=%d n=%d r=%d, leading tau %.4g", p, n, r, tau[0] if tau.size else 0.0)
    return (low_rank + R_A).symmetrized(), fit


def ls_fit(panel: FunctionalPanel, r: int) -> FpoetFit:
    """Constrained least squares: Gamma = sqrt(n) * top-r eigenvectors of Y Y^T, Q = n^{-1} Y^T Gamma."""
    if r > panel.n or r < 0:
        raise InvalidArgumentError(f"r={r} must lie in [0, n={panel.n}]", "fpoet")
    n, p, K = panel.n, panel.p, panel.K
    Y = panel.flat()
    mu, V = symmetric_eigh(Y @ Y.T)
    Gamma = np.sqrt(n) * V[:, :r]
    Q_flat = Y.T @ Gamma / n                             # pK x r
    residuals = panel.with_coeffs((Y - Gamma @ Q_flat.T).reshape(n, p, K))

    norms = np.linalg.norm(Q_flat, axis=0)
    phi = np.divide(Q_flat, norms, out=np.zeros_like(Q_flat), where=norms > 0)
    return FpoetFit(
        tau_hat=np.clip(mu, 0.0, None) / n,
        phi_hat=phi.T.reshape(r, p, K),
        R_hat=sample_cov(residuals),
        Gamma_hat=Gamma,
        Q_hat=Q_flat.T.reshape(r, p, K).transpose(1, 0, 2),
        residuals=residuals,
        r=r,
    )


def ls_estimator(
    panel: FunctionalPanel,
    r: int,
    rule: ThresholdRule,
    threshold_diagonal: bool = False,
) -> tuple[KernelMatrix, FpoetFit]:
    """Q Q^T + AFT(Sigma_eps) built from the least-squares fit."""
    fit = ls_fit(panel, r)
    Sigma_eps, Sigma_eps_A = threshold_residuals(fit.residuals, rule, threshold_diagonal)
    fit = replace(fit, R_hat=Sigma_eps, R_thresholded=Sigma_eps_A)
    return (fit.low_rank() + Sigma_eps_A).symmetrized(), fit


def check_equivalence(panel: FunctionalPanel, r: int, rule: ThresholdRule) -> tuple[float, float]:
    """Smax gaps between the FPOET and least-squares pipelines.

    Returns:
        (|Sigma^F - Sigma^L|_Smax, |R^A - Sigma_eps^A|_Smax)
    """
    sigma_f, fpoet = fpoet_estimator(panel, r, rule, solver=Solver.PRIMAL)
    sigma_l, ls = ls_estimator(panel, r, rule)
    gaps = (
        float(kernel_norm(sigma_f - sigma_l, "Smax")),
        float(kernel_norm(fpoet.R_thresholded - ls.R_thresholded, "Smax")),
    )
    logger.debug("FPOET/least-squares gaps: %.3e, %.3e", *gaps)
    return gaps


def spectral_parts(Q: np.ndarray, Sigma_eps: KernelMatrix) -> SpectralParts:
    """Population Sigma_y for functional loadings Q and idiosyncratic Sigma_eps."""
    common = loading_outer(Q)
    r = np.asarray(Q).shape[1]
    leading = linalg.eigvalsh(common.flat())[::-1][:r]
    return SpectralParts(Sigma_y=common + Sigma_eps, common=common, leading=leading)
