"""Simulation harness with analytic truths."""

from sim.dgp import DgpConfig, GroundTruth, generate, loss
from sim.bench import replicate, factor_number_table, selection_table, loss_curves, win_rate

__all__ = [
    "DgpConfig",
    "GroundTruth",
    "generate",
    "loss",
    "replicate",
    "factor_number_table",
    "selection_table",
    "loss_curves",
    "win_rate",
]
