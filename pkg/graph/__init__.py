"""LangGraph workflow definitions."""

from graph.state import SelectionState
from graph.workflow import create_workflow, run_selection

__all__ = ["SelectionState", "create_workflow", "run_selection"]
