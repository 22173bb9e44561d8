"""Inversion of estimated covariance matrix functions.

Two routes are provided: a truncated spectral pseudo-inverse of the pK x pK
flattening, and a Sherman-Morrison-Woodbury inverse that exploits the DIGIT
factor structure. ``correlation_pair`` gives Tikhonov-regularized correlation
and precision matrix functions.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg

from core.basis import symmetric_eigh
from core.config import INVERSE_CONFIG, SYMMETRY_TOL
from core.errors import InvalidArgumentError, SingularInputError
from core.models import KernelMatrix
from estimators.digit import DigitFit

logger = logging.getLogger(__name__)

POSITIVE_TOL = 1e-12


class InverseMode(str, Enum):
    SMW = "smw"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class InverseSpec:
    """How to invert a covariance matrix function.

    ``ridge=None`` means the trace-scaled default used by the SMW route.
    ``d_n`` is filled in on the copy returned by ``truncated_power``.
    """
    mode: InverseMode = InverseMode(INVERSE_CONFIG["mode"])
    energy: float = INVERSE_CONFIG["energy"]
    ridge: float | None = None
    kappa: float | None = INVERSE_CONFIG["kappa"]
    d_n: int | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", InverseMode(self.mode))
        except ValueError as exc:
            raise InvalidArgumentError(f"unknown inverse mode: {self.mode!r}", "inverse") from exc
        if not 0 < self.energy <= 1:
            raise InvalidArgumentError(f"energy must lie in (0, 1], got {self.energy}", "inverse")
        if self.ridge is not None and self.ridge < 0:
            raise InvalidArgumentError(f"ridge must be nonnegative, got {self.ridge}", "inverse")


def retained_rank(eigenvalues, energy: float) -> int:
    """Smallest d whose leading positive eigenvalues carry at least ``energy`` of the total."""
    if not 0 < energy <= 1:
        raise InvalidArgumentError(f"energy must lie in (0, 1], got {energy}", "inverse")
    values = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    if values.size == 0 or values[0] <= 0:
        raise SingularInputError("no positive eigenvalues to invert", "inverse")
    positive = values[values > POSITIVE_TOL * values[0]]
    fraction = np.cumsum(positive) / positive.sum()
    return int(np.searchsorted(fraction, energy - 1e-12) + 1)


def truncated_power(M: KernelMatrix, energy: float, power: float) -> tuple[KernelMatrix, int]:
    """Spectral power sum_{i<=d_n} tau_i^power phi_i phi_i^T on the retained eigenspace."""
    if not M.is_symmetric(SYMMETRY_TOL):
        raise InvalidArgumentError("truncated inversion needs a symmetric kernel matrix", "inverse")
    values, vectors = symmetric_eigh(M.flat())
    d_n = retained_rank(values, energy)
    kept = vectors[:, :d_n]
    flat = (kept * values[:d_n] ** power) @ kept.T
    return KernelMatrix.from_flat(flat, M.p_rows, M.p_cols, M.K), d_n


def truncated_inverse(M: KernelMatrix, spec: InverseSpec | None = None) -> KernelMatrix:
    """Pseudo-inverse restricted to the leading eigenspace carrying ``spec.energy``."""
    spec = spec or InverseSpec()
    inverse, d_n = truncated_power(M, spec.energy, -1.0)
    logger.debug("truncated inverse kept d_n=%d of %d components", d_n, M.p_rows * M.K)
    return inverse


def default_ridge(M: KernelMatrix) -> float:
    size = M.p_rows * M.K
    return INVERSE_CONFIG["ridge_scale"] * float(np.trace(M.flat())) / size if size else 0.0


def _spd_inverse(mat: np.ndarray, what: str) -> np.ndarray:
    values, vectors = symmetric_eigh(mat)
    if values.size and values[-1] <= POSITIVE_TOL * max(1.0, abs(values[0])):
        raise SingularInputError(f"{what} is singular (smallest eigenvalue {values[-1]:.3e})", "inverse")
    return (vectors / values) @ vectors.T


def smw_inverse(
    fit: DigitFit,
    Sigma_eps_A: KernelMatrix,
    ridge: float | None = None,
    factor_energy: float = 1.0,
) -> KernelMatrix:
    """Sherman-Morrison-Woodbury inverse of B Sigma_f B^T + Sigma_eps^A.

    Args:
        fit: DIGIT fit providing B_hat and Sigma_f_hat.
        Sigma_eps_A: Thresholded idiosyncratic covariance.
        ridge: Added to the flattening of Sigma_eps_A before inversion;
            ``None`` uses 1e-6 * trace / pK.
        factor_energy: Energy kept by the truncated inverse of Sigma_f_hat.

    Returns:
        The inverse as a KernelMatrix.
    """
    if not Sigma_eps_A.is_symmetric(SYMMETRY_TOL):
        raise InvalidArgumentError("Sigma_eps^A must be symmetric", "inverse")
    p, K = Sigma_eps_A.p_rows, Sigma_eps_A.K
    ridge = default_ridge(Sigma_eps_A) if ridge is None else ridge
    A_inv = _spd_inverse(Sigma_eps_A.flat() + ridge * np.eye(p * K), "ridge-stabilized Sigma_eps^A")
    if fit.r == 0:
        return KernelMatrix.from_flat(A_inv, p, p, K)

    B_op = np.kron(fit.B_hat, np.eye(K))                           # pK x rK
    Sigma_f_inv = truncated_inverse(fit.Sigma_f_hat, InverseSpec(energy=factor_energy)).flat()
    AB = A_inv @ B_op
    inner = Sigma_f_inv + B_op.T @ AB
    try:
        middle = linalg.solve(inner, AB.T, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise SingularInputError(f"inner rK x rK system is singular: {exc}", "inverse") from exc
    if not np.all(np.isfinite(middle)):
        raise SingularInputError("inner rK x rK system is singular", "inverse")
    return KernelMatrix.from_flat(A_inv - AB @ middle, p, p, K).symmetrized()


def _block_power(block: np.ndarray, power: float, shift: float = 0.0) -> np.ndarray:
    values, vectors = linalg.eigh(0.5 * (block + block.T))
    values = np.clip(values, 0.0, None) + shift
    powered = np.zeros_like(values)
    positive = values > 0
    powered[positive] = values[positive] ** power
    return (vectors * powered) @ vectors.T


def correlation_pair(Sigma_y_hat: KernelMatrix, kappa: float) -> tuple[KernelMatrix, KernelMatrix]:
    """Tikhonov-regularized correlation and precision matrix functions.

    C = (D + kappa I)^{-1/2} Sigma (D + kappa I)^{-1/2} and
    Theta = D^{1/2} (Sigma + kappa I)^{-1} D^{1/2}, with D the diagonal blocks.
    """
    if not kappa > 0:
        raise InvalidArgumentError(f"kappa must be positive, got {kappa}", "inverse")
    if not Sigma_y_hat.is_square:
        raise InvalidArgumentError("correlation needs a square kernel matrix", "inverse")
    p, K = Sigma_y_hat.p_rows, Sigma_y_hat.K
    diag = [Sigma_y_hat.blocks[i, i] for i in range(p)]
    inv_sqrt = np.stack([_block_power(G, -0.5, kappa) for G in diag])
    sqrt = np.stack([_block_power(G, 0.5) for G in diag])

    C = np.einsum("ikl,ijlm,jnm->ijkn", inv_sqrt, Sigma_y_hat.blocks, inv_sqrt)
    shifted = Sigma_y_hat.flat() + kappa * np.eye(p * K)
    inner = KernelMatrix.from_flat(_spd_inverse(shifted, "Sigma + kappa I"), p, p, K).blocks
    Theta = np.einsum("ikl,ijlm,jnm->ijkn", sqrt, inner, sqrt)
    return KernelMatrix(C).symmetrized(), KernelMatrix(Theta).symmetrized()
