"""State definitions for the LangGraph selection workflow."""

from typing import Annotated, Any, TypedDict

from core.models import FunctionalPanel, KernelMatrix
from estimators.select import SelectionReport


def merge_errors(left: list[str] | None, right: list[str] | None) -> list[str]:
    """Merge error lists from parallel branches."""
    left = left or []
    right = right or []
    return left + right


class SelectionState(TypedDict, total=False):
    """
    State object that flows through the selection workflow.

    Nodes only return the NEW keys they produce, so the DIGIT and FPOET
    branches can run in parallel without write conflicts.

    Flow:
    1. Centered panel and options set at the start (read-only afterwards)
    2. DIGIT branch + FPOET branch run in PARALLEL
       - DIGIT writes: omega_eigenvalues, r_hat_digit, V_digit
       - FPOET writes: tau_eigenvalues, r_hat_fpoet, V_fpoet
    3. Criteria node joins both branches and writes the SelectionReport
    4. Fit node runs only when requested and the report is available
    """

    # ============== INPUT DATA ==============
    panel: FunctionalPanel
    options: dict[str, Any]     # c_r, eps0, r0, rule, solver, fit

    # ============== DIGIT BRANCH ==============
    omega_eigenvalues: Any      # p eigenvalues of Omega, descending
    r_hat_digit: int
    V_digit: float

    # ============== FPOET BRANCH ==============
    tau_eigenvalues: Any        # MFPCA spectrum, descending
    r_hat_fpoet: int
    V_fpoet: float

    # ============== CRITERIA / FIT ==============
    report: SelectionReport
    chosen_model: str
    Sigma_y_hat: KernelMatrix
    fit: Any                    # DigitFit or FpoetFit

    # ============== WORKFLOW METADATA ==============
    workflow_status: str
    errors: Annotated[list[str], merge_errors]
