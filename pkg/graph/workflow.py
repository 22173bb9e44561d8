"""LangGraph workflow definition for factor model selection."""

from typing import Any

from langgraph.graph import StateGraph, END, START

from core.models import FunctionalPanel
from graph.nodes import criteria_node, digit_node, fit_node, fpoet_node, should_fit
from graph.state import SelectionState


def create_workflow() -> StateGraph:
    """
    Create the LangGraph workflow for choosing between the two factor models.

    Workflow Structure (PARALLEL BRANCHES):

                      ┌─────────────────┐
                      │      START      │
                      └────────┬────────┘
                               │
           ┌───────────────────┴───────────────────┐
           │                                       │
           ▼                                       ▼
    ┌─────────────────┐                   ┌─────────────────┐
    │  DIGIT Branch   │    (PARALLEL)     │  FPOET Branch   │
    │ (Omega → r, V)  │                   │ (MFPCA → r, V)  │
    └────────┬────────┘                   └────────┬────────┘
             │                                     │
             └──────────────────┬──────────────────┘
                                │
                                ▼
                       ┌─────────────────┐
                       │    Criteria     │
                       │ (PC/IC, voting) │
                       └────────┬────────┘
                                │
                         ┌──────┴──────┐
                         │             │
                         ▼             ▼
                   (fit_model)     (skip_fit)
                         │             │
                         ▼             │
                ┌─────────────────┐    │
                │    Fit Node     │    │
                │ (chosen model)  │    │
                └────────┬────────┘    │
                         └──────┬──────┘
                                ▼
                          ┌───────────┐
                          │    END    │
                          └───────────┘
    """
    workflow = StateGraph(SelectionState)

    workflow.add_node("digit", digit_node)
    workflow.add_node("fpoet", fpoet_node)
    workflow.add_node("criteria", criteria_node)
    workflow.add_node("fit", fit_node)

    # Both branches start from START and join at the criteria node
    workflow.add_edge(START, "digit")
    workflow.add_edge(START, "fpoet")
    workflow.add_edge(["digit", "fpoet"], "criteria")

    workflow.add_conditional_edges(
        "criteria",
        should_fit,
        {
            "fit_model": "fit",
            "skip_fit": END,
        }
    )
    workflow.add_edge("fit", END)

    return workflow


def run_selection(
    panel: FunctionalPanel,
    options: dict[str, Any] | None = None,
    verbose: bool = False,
) -> SelectionState:
    """
    Run the complete selection workflow.

    Args:
        panel: Centered functional panel
        options: c_r, eps0, r0, solver, rule, threshold_diagonal and fit

    Returns:
        Final state with the SelectionReport, the optional fit and any errors
    """
    app = create_workflow().compile()

    initial_state: SelectionState = {
        "panel": panel,
        "options": dict(options or {}),
        "workflow_status": "started",
        "errors": [],
    }

    if verbose:
        print("\n🚀 Starting selection workflow (parallel branches)...")
        print("=" * 50)
        print(f"   📊 Panel: n={panel.n}, p={panel.p}, K={panel.K}")
        print("   🔹 Branch 1: DIGIT ratio estimate")
        print("   🔸 Branch 2: FPOET ratio estimate")
        print("=" * 50)

    final_state = app.invoke(initial_state)

    if verbose:
        print("\n" + "=" * 50)
        if final_state.get("errors"):
            print(f"⚠️ Workflow finished with {len(final_state['errors'])} error(s)")
        else:
            print(f"✅ Workflow Complete! Chosen model: {final_state.get('chosen_model')}")

    return final_state
