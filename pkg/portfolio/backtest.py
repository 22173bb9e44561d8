"""Rolling-window backtest of minimum-variance functional portfolios."""

import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core.basis import project
from core.config import PORTFOLIO_CONFIG, THREADS
from core.covariance import center, sample_cov
from core.errors import InvalidArgumentError
from core.models import BasisSpec
from estimators.aft import ThresholdRule
from estimators.digit import digit_estimator
from estimators.fpoet import fpoet_estimator
from estimators.inverse import InverseSpec
from estimators.select import estimate_ranks
from portfolio.risk import actual_risk, min_variance_weights, perceived_risk

logger = logging.getLogger(__name__)

METHODS = ("digit", "fpoet", "sample")


def _evaluate_window(
    samples: np.ndarray,
    start: int,
    basis: BasisSpec,
    methods: tuple[str, ...],
    rule: ThresholdRule,
    spec: InverseSpec,
    train_days: int,
    test_days: int,
) -> list[dict]:
    train = center(project(samples[start : start + train_days], basis))
    holdout = samples[start + train_days : start + train_days + test_days]
    r_digit, r_fpoet = estimate_ranks(train)

    rows = []
    for method in methods:
        if method == "digit":
            sigma, _ = digit_estimator(train, r_digit, rule)
            r_hat = r_digit
        elif method == "fpoet":
            sigma, _ = fpoet_estimator(train, r_fpoet, rule)
            r_hat = r_fpoet
        else:
            sigma, r_hat = sample_cov(train), np.nan
        weights = min_variance_weights(sigma, basis, spec)
        rows.append({
            "start": start,
            "method": method,
            "r_hat": r_hat,
            "d_n": weights.d_n,
            "perceived_risk": perceived_risk(weights, sigma),
            "actual_risk": actual_risk(weights, holdout, basis),
            "constraint_residual": weights.constraint_residual,
        })
    return rows


def backtest(
    samples: np.ndarray,
    basis: BasisSpec,
    methods=METHODS,
    rule: ThresholdRule | None = None,
    spec: InverseSpec | None = None,
    train_days: int = PORTFOLIO_CONFIG["train_days"],
    test_days: int = PORTFOLIO_CONFIG["test_days"],
    n_jobs: int = THREADS,
) -> pd.DataFrame:
    """Roll a training window forward by ``test_days`` and record perceived/actual risk.

    Args:
        samples: (N, p, G) CIDR curves on the basis grid.
        basis: Estimation basis.
        methods: Any of ``digit``, ``fpoet``, ``sample``.
        rule: Thresholding rule for the factor-guided estimators.
        spec: Truncation settings for the inverse.
        train_days: Length of each training window.
        test_days: Length of each evaluation window and the roll step.
        n_jobs: joblib worker count.

    Returns:
        One row per (window, method).
    """
    samples = np.asarray(samples, dtype=float)
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise InvalidArgumentError(f"unknown backtest methods: {sorted(unknown)}", "portfolio")
    if train_days < 2 or test_days < 1:
        raise InvalidArgumentError("training window needs >= 2 days and the test window >= 1", "portfolio")
    starts = list(range(0, samples.shape[0] - train_days - test_days + 1, test_days))
    if not starts:
        raise InvalidArgumentError(
            f"{samples.shape[0]} days are too few for a {train_days}+{test_days} day window", "portfolio"
        )

    rule = rule or ThresholdRule()
    spec = spec or InverseSpec()
    logger.info("backtest: %d windows, methods %s", len(starts), ", ".join(methods))
    results = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_window)(samples, s, basis, methods, rule, spec, train_days, test_days) for s in starts
    )
    frame = pd.DataFrame([row for rows in results for row in rows])
    frame.insert(0, "window", frame["start"].rank(method="dense").astype(int) - 1)
    return frame


def summarize_backtest(frame: pd.DataFrame) -> pd.DataFrame:
    """Average r_hat and risks per method, in the order the methods were run."""
    order = list(dict.fromkeys(frame["method"]))
    summary = frame.groupby("method", sort=False).agg(
        r_hat=("r_hat", "mean"),
        perceived_risk=("perceived_risk", "mean"),
        actual_risk=("actual_risk", "mean"),
        windows=("window", "nunique"),
    )
    return summary.loc[order].reset_index()
