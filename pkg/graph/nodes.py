"""
Workflow nodes for model selection.

Each node reads the shared panel and options and returns ONLY the new keys
it produces. Failures are caught and reported through the ``errors`` list,
which the state merges across the parallel branches.
"""

import logging

from core.config import SELECTION_CONFIG, THRESHOLD_CONFIG
from core.covariance import sample_cov
from core.errors import FFMError
from estimators.aft import ThresholdRule
from estimators.digit import digit_estimator, gram_omega
from estimators.fpoet import Solver, fpoet_estimator, mfpca
from estimators.select import (
    Method,
    ModelKind,
    compare_models,
    default_r0,
    mean_squared_residuals,
    ratio_digit,
    ratio_fpoet,
)
from graph.state import SelectionState

logger = logging.getLogger(__name__)


def digit_node(state: SelectionState) -> dict:
    """
    DIGIT branch: Omega spectrum, ratio-estimated rank and V^D(r).

    IMPORTANT: Only returns NEW keys (omega_eigenvalues, r_hat_digit, V_digit).
    """
    panel = state["panel"]
    options = state.get("options", {})
    try:
        eigenvalues, _ = gram_omega(sample_cov(panel)).eigen()
        r_hat = ratio_digit(
            eigenvalues,
            panel.p,
            options.get("c_r", SELECTION_CONFIG["c_r"]),
            options.get("eps0", SELECTION_CONFIG["eps0"]),
        )
        V = mean_squared_residuals(panel, Method.DIGIT, r_hat)
    except FFMError as exc:
        logger.error("DIGIT branch failed: %s", exc)
        return {"errors": [f"{exc.code}: {exc}"]}

    logger.info("DIGIT branch: r_hat=%d V=%.4g", r_hat, V)
    return {"omega_eigenvalues": eigenvalues, "r_hat_digit": r_hat, "V_digit": V}


def fpoet_node(state: SelectionState) -> dict:
    """
    FPOET branch: MFPCA spectrum, ratio-estimated rank and V^F(r).

    IMPORTANT: Only returns NEW keys (tau_eigenvalues, r_hat_fpoet, V_fpoet).
    """
    panel = state["panel"]
    options = state.get("options", {})
    try:
        tau, _ = mfpca(panel, options.get("solver", Solver.AUTO))
        r0 = options.get("r0") or default_r0(panel.n, panel.p)
        r_hat = ratio_fpoet(tau, panel.p, r0, options.get("eps0", SELECTION_CONFIG["eps0"]))
        V = mean_squared_residuals(panel, Method.FPOET, r_hat)
    except FFMError as exc:
        logger.error("FPOET branch failed: %s", exc)
        return {"errors": [f"{exc.code}: {exc}"]}

    logger.info("FPOET branch: r_hat=%d V=%.4g", r_hat, V)
    return {"tau_eigenvalues": tau, "r_hat_fpoet": r_hat, "V_fpoet": V}


def criteria_node(state: SelectionState) -> dict:
    """Join point: PC/IC comparison of the two branches."""
    if state.get("errors"):
        return {"workflow_status": "failed"}

    panel = state["panel"]
    report = compare_models(
        state["V_digit"], state["V_fpoet"], state["r_hat_digit"], state["r_hat_fpoet"], panel.p, panel.n
    )
    return {
        "report": report,
        "chosen_model": report.chosen_model.value,
        "workflow_status": "selected",
    }


def should_fit(state: SelectionState) -> str:
    """
    Router function to decide if the chosen model should be fitted.

    Returns:
        "fit_model" if fitting was requested and selection succeeded, else "skip_fit"
    """
    if state.get("errors") or "report" not in state:
        logger.info("selection incomplete, skipping the fit")
        return "skip_fit"
    if not state.get("options", {}).get("fit", False):
        return "skip_fit"
    return "fit_model"


def fit_node(state: SelectionState) -> dict:
    """Fit the selected model at its ratio-estimated rank."""
    panel = state["panel"]
    options = state.get("options", {})
    rule = options.get("rule") or ThresholdRule()
    threshold_diagonal = options.get("threshold_diagonal", THRESHOLD_CONFIG["threshold_diagonal"])

    try:
        if state["report"].chosen_model is ModelKind.FFM1:
            estimate, fit = digit_estimator(panel, state["r_hat_digit"], rule, threshold_diagonal)
        else:
            estimate, fit = fpoet_estimator(
                panel, state["r_hat_fpoet"], rule, options.get("solver", Solver.AUTO), threshold_diagonal
            )
    except FFMError as exc:
        logger.error("fit of %s failed: %s", state["chosen_model"], exc)
        return {"errors": [f"{exc.code}: {exc}"], "workflow_status": "failed"}

    return {"Sigma_y_hat": estimate, "fit": fit, "workflow_status": "fitted"}
