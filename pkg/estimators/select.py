"""Factor-number selection by eigenvalue ratios and model selection by information criteria."""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.config import SELECTION_CONFIG
from core.covariance import sample_cov
from core.errors import InvalidArgumentError
from core.models import FunctionalPanel
from estimators.digit import estimate_loadings, gram_omega, project_out
from estimators.fpoet import ls_fit, mfpca

logger = logging.getLogger(__name__)


class ModelKind(str, Enum):
    """Functional factor model structures."""
    FFM1 = "ffm1"  # functional factors, scalar loadings (DIGIT)
    FFM2 = "ffm2"  # scalar factors, functional loadings (FPOET)


class Method(str, Enum):
    DIGIT = "digit"
    FPOET = "fpoet"


@dataclass
class SelectionReport:
    """Ratio-estimated ranks and the information criteria comparing both models.

    Rows of ``PC``/``IC`` are (digit, fpoet); columns are the three penalties.
    """
    r_hat_digit: int
    r_hat_fpoet: int
    V: np.ndarray                 # (V^D, V^F)
    PC: np.ndarray                # 2 x 3
    IC: np.ndarray                # 2 x 3, NaN when some V is 0
    delta_PC: np.ndarray          # 3
    delta_IC: np.ndarray          # 3
    chosen_model: ModelKind
    warnings: list[str] = field(default_factory=list)

    @property
    def ic_defined(self) -> bool:
        return bool(np.all(np.isfinite(self.IC)))

    def to_dict(self) -> dict:
        def clean(values: np.ndarray) -> list:
            return [None if not np.isfinite(v) else float(v) for v in np.ravel(values)]

        return {
            "r_hat_digit": self.r_hat_digit,
            "r_hat_fpoet": self.r_hat_fpoet,
            "V": clean(self.V),
            "PC": {"digit": clean(self.PC[0]), "fpoet": clean(self.PC[1])},
            "IC": {"digit": clean(self.IC[0]), "fpoet": clean(self.IC[1])},
            "delta_PC": clean(self.delta_PC),
            "delta_IC": clean(self.delta_IC),
            "chosen_model": self.chosen_model.value,
            "warnings": list(self.warnings),
        }


def _ratio_estimate(normalized: np.ndarray, max_rank: int, eps0: float) -> int:
    """First argmin over r in [1, max_rank] of lambda_{r+1} / lambda_r with 0/0 read as 1."""
    values = np.where(np.clip(normalized, 0.0, None) < eps0, 0.0, normalized)
    max_rank = min(max_rank, len(values) - 1)
    if max_rank < 1:
        return 1
    num, den = values[1 : max_rank + 1], values[:max_rank]
    ratios = np.divide(num, den, out=np.ones(max_rank), where=den > 0)
    return int(np.argmin(ratios)) + 1


def ratio_digit(
    omega_eigenvalues,
    p: int,
    c_r: float = SELECTION_CONFIG["c_r"],
    eps0: float = SELECTION_CONFIG["eps0"],
) -> int:
    """Number of functional factors from the Omega spectrum (normalized by p^2)."""
    values = np.asarray(omega_eigenvalues, dtype=float)
    if values.size == 0:
        raise InvalidArgumentError("empty eigenvalue spectrum", "select")
    return _ratio_estimate(values / p**2, max(1, int(np.floor(c_r * p))), eps0)


def ratio_fpoet(
    tau_eigenvalues,
    p: int,
    r0: int,
    eps0: float = SELECTION_CONFIG["eps0"],
) -> int:
    """Number of scalar factors from the MFPCA spectrum (normalized by p)."""
    values = np.asarray(tau_eigenvalues, dtype=float)
    if values.size == 0:
        raise InvalidArgumentError("empty eigenvalue spectrum", "select")
    return _ratio_estimate(values / p, max(1, r0), eps0)


def default_r0(n: int, p: int) -> int:
    return max(1, int(np.floor(SELECTION_CONFIG["r0_fraction"] * min(n, p))))


def mean_squared_residuals(panel: FunctionalPanel, method: Method | str, r: int) -> float:
    """(pn)^{-1} sum_t |y_t - fitted_t|^2 for the DIGIT or least-squares FPOET fit."""
    try:
        method = Method(method)
    except ValueError as exc:
        raise InvalidArgumentError(f"unknown method: {method!r}", "select") from exc
    limit = panel.p if method is Method.DIGIT else panel.n
    if not 0 <= r <= limit:
        raise InvalidArgumentError(f"r={r} must lie in [0, {limit}] for {method.value}", "select")

    if r == 0:
        residuals = panel.coeffs
    elif method is Method.DIGIT:
        B_hat = estimate_loadings(gram_omega(sample_cov(panel)), r)
        residuals = project_out(panel, B_hat).coeffs
    else:
        residuals = ls_fit(panel, r).residuals.coeffs
    return float(np.sum(residuals**2) / (panel.p * panel.n))


def penalty(p: int, n: int) -> np.ndarray:
    """The three penalty functions g_1, g_2, g_3 of (p, n)."""
    m = min(p, n)
    factor = (p + n) / (p * n)
    return np.array([factor * np.log(p * n / (p + n)), factor * np.log(m), np.log(m) / m])


def information_criteria(panel: FunctionalPanel, r_digit: int, r_fpoet: int) -> SelectionReport:
    """PC and IC values of both models at the given ranks; majority vote over the IC deltas."""
    V_digit = mean_squared_residuals(panel, Method.DIGIT, r_digit)
    V_fpoet = mean_squared_residuals(panel, Method.FPOET, r_fpoet)
    return compare_models(V_digit, V_fpoet, r_digit, r_fpoet, panel.p, panel.n)


def compare_models(V_digit: float, V_fpoet: float, r_digit: int, r_fpoet: int, p: int, n: int) -> SelectionReport:
    """Information criteria from precomputed mean squared residuals."""
    g = penalty(p, n)
    V = np.array([V_digit, V_fpoet], dtype=float)
    ranks = np.array([[r_digit], [r_fpoet]])
    PC = V[:, None] + ranks * g
    delta_PC = PC[0] - PC[1]

    warnings = []
    if np.all(V > 0):
        IC = np.log(V)[:, None] + ranks * g
        votes = IC[0] - IC[1]
    else:
        message = "mean squared residuals vanish; IC is undefined, deciding on PC only"
        logger.warning(message)
        warnings.append(message)
        IC = np.full((2, 3), np.nan)
        votes = delta_PC
    delta_IC = IC[0] - IC[1]

    chosen = ModelKind.FFM1 if np.count_nonzero(votes < 0) >= 2 else ModelKind.FFM2
    return SelectionReport(
        r_hat_digit=r_digit,
        r_hat_fpoet=r_fpoet,
        V=V,
        PC=PC,
        IC=IC,
        delta_PC=delta_PC,
        delta_IC=delta_IC,
        chosen_model=chosen,
        warnings=warnings,
    )


def estimate_ranks(
    panel: FunctionalPanel,
    c_r: float = SELECTION_CONFIG["c_r"],
    eps0: float = SELECTION_CONFIG["eps0"],
    r0: int | None = None,
) -> tuple[int, int]:
    """Ratio-estimated (r_digit, r_fpoet) for a centered panel."""
    omega_eigenvalues, _ = gram_omega(sample_cov(panel)).eigen()
    tau, _ = mfpca(panel)
    r0 = default_r0(panel.n, panel.p) if r0 is None else r0
    return ratio_digit(omega_eigenvalues, panel.p, c_r, eps0), ratio_fpoet(tau, panel.p, r0, eps0)


def select_model(
    panel: FunctionalPanel,
    c_r: float = SELECTION_CONFIG["c_r"],
    eps0: float = SELECTION_CONFIG["eps0"],
    r0: int | None = None,
) -> SelectionReport:
    """Ratio-estimated ranks for both models followed by the information criteria."""
    r_digit, r_fpoet = estimate_ranks(panel, c_r, eps0, r0)
    report = information_criteria(panel, r_digit, r_fpoet)
    logger.info(
        "selection: r_digit=%d r_fpoet=%d -> %s", r_digit, r_fpoet, report.chosen_model.value
    )
    return report
