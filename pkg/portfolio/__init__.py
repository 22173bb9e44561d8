"""Functional risk management and the rolling backtest."""

from portfolio.risk import (
    PortfolioWeights,
    weighted_quadratic_norm,
    min_variance_weights,
    perceived_risk,
    actual_risk,
    cidr,
)
from portfolio.backtest import backtest, summarize_backtest

__all__ = [
    "PortfolioWeights",
    "weighted_quadratic_norm",
    "min_variance_weights",
    "perceived_risk",
    "actual_risk",
    "cidr",
    "backtest",
    "summarize_backtest",
]
