"""Monte Carlo bench: factor-number frequencies, information-criterion summaries and loss curves."""

import logging
from typing import Callable

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core.config import BENCH_CONFIG, THREADS
from core.covariance import center, sample_cov
from estimators.aft import ThresholdRule
from estimators.digit import digit_estimator
from estimators.fpoet import fpoet_estimator
from estimators.select import estimate_ranks, information_criteria
from sim.dgp import DgpConfig, generate, loss

logger = logging.getLogger(__name__)

LOSS_NORMS = ("Smax", "SF", "S1")


def replicate(
    config: DgpConfig,
    reps: int,
    task: Callable[[DgpConfig, np.random.Generator], dict],
    n_jobs: int = THREADS,
) -> list[dict]:
    """Run ``task`` on ``reps`` replications with independent RNG streams.

    Streams are spawned from ``SeedSequence(config.seed)``, so results depend on
    the seed and the replication index only, not on the worker count.
    """
    streams = np.random.SeedSequence(config.seed).spawn(reps)
    return Parallel(n_jobs=n_jobs)(
        delayed(task)(config, np.random.default_rng(stream)) for stream in streams
    )


def rank_task(config: DgpConfig, rng: np.random.Generator) -> dict:
    panel, _ = generate(config, rng)
    r_digit, r_fpoet = estimate_ranks(center(panel))
    return {"r_hat_digit": r_digit, "r_hat_fpoet": r_fpoet}


def selection_task(config: DgpConfig, rng: np.random.Generator) -> dict:
    panel, _ = generate(config, rng)
    panel = center(panel)
    report = information_criteria(panel, *estimate_ranks(panel))
    row = {f"delta_PC{i + 1}": float(v) for i, v in enumerate(report.delta_PC)}
    row.update({f"delta_IC{i + 1}": float(v) for i, v in enumerate(report.delta_IC)})
    row["chosen_model"] = report.chosen_model.value
    return row


def loss_task(config: DgpConfig, rng: np.random.Generator, rule: ThresholdRule | None = None) -> dict:
    """Losses of DIGIT, FPOET and the sample covariance at the true number of factors."""
    rule = rule or ThresholdRule()
    panel, truth = generate(config, rng)
    panel = center(panel)
    estimates = {
        "digit": digit_estimator(panel, config.r, rule)[0],
        "fpoet": fpoet_estimator(panel, config.r, rule)[0],
        "sample": sample_cov(panel),
    }
    row = {}
    for method, estimate in estimates.items():
        for which in LOSS_NORMS:
            row[f"{method}_{which}"] = loss(estimate, truth.Sigma_y_true, which)
    return row


def factor_number_table(
    p: int = BENCH_CONFIG["p"],
    n: int = BENCH_CONFIG["n"],
    r: int = BENCH_CONFIG["r"],
    alphas=(0.25, 0.75),
    reps: int = BENCH_CONFIG["reps"],
    seed: int = BENCH_CONFIG["seed"],
    n_jobs: int = THREADS,
    **basis,
) -> pd.DataFrame:
    """Relative frequency of recovering r: DIGIT ratio on DGP1, FPOET ratio on DGP2."""
    rows = []
    for alpha in alphas:
        for dgp, column in ((1, "r_hat_digit"), (2, "r_hat_fpoet")):
            config = DgpConfig(dgp=dgp, p=p, n=n, r=r, alpha=alpha, seed=seed, **basis)
            results = pd.DataFrame(replicate(config, reps, rank_task, n_jobs))
            rows.append({
                "dgp": dgp,
                "estimator": "digit" if dgp == 1 else "fpoet",
                "p": p,
                "n": n,
                "r": r,
                "alpha": alpha,
                "frequency": float((results[column] == r).mean()),
                "reps": reps,
            })
            logger.info("factor numbers DGP%d alpha=%.2f: %.3f", dgp, alpha, rows[-1]["frequency"])
    return pd.DataFrame(rows)


def selection_table(
    p: int = BENCH_CONFIG["p"],
    n: int = BENCH_CONFIG["n"],
    r: int = BENCH_CONFIG["r"],
    alpha: float = 0.5,
    reps: int = 100,
    seed: int = BENCH_CONFIG["seed"],
    n_jobs: int = THREADS,
    **basis,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Per-replication delta PC/IC values and the share of negative values per DGP."""
    frames = []
    for dgp in (1, 2):
        config = DgpConfig(dgp=dgp, p=p, n=n, r=r, alpha=alpha, seed=seed, **basis)
        frame = pd.DataFrame(replicate(config, reps, selection_task, n_jobs))
        frame.insert(0, "dgp", dgp)
        frames.append(frame)
    detail = pd.concat(frames, ignore_index=True)
    deltas = [c for c in detail.columns if c.startswith("delta_")]
    summary = detail.groupby("dgp")[deltas].agg(lambda col: float((col < 0).mean())).reset_index()
    return detail, summary


def loss_curves(
    dgp: int,
    p: int = BENCH_CONFIG["p"],
    n_grid=tuple(BENCH_CONFIG["loss_n_grid"]),
    r: int = BENCH_CONFIG["r"],
    alpha: float = 0.5,
    reps: int = 100,
    seed: int = BENCH_CONFIG["seed"],
    n_jobs: int = THREADS,
    **basis,
) -> pd.DataFrame:
    """Mean losses over n for DIGIT, FPOET and the sample covariance."""
    rows = []
    for n in n_grid:
        config = DgpConfig(dgp=dgp, p=p, n=n, r=r, alpha=alpha, seed=seed, **basis)
        frame = pd.DataFrame(replicate(config, reps, loss_task, n_jobs))
        for method in ("digit", "fpoet", "sample"):
            row = {"dgp": dgp, "n": n, "method": method}
            row.update({which: float(frame[f"{method}_{which}"].mean()) for which in LOSS_NORMS})
            rows.append(row)
    return pd.DataFrame(rows)


def win_rate(config: DgpConfig, method: str, reps: int, n_jobs: int = THREADS) -> float:
    """Share of replications where ``method`` beats the sample covariance in SF loss."""
    frame = pd.DataFrame(replicate(config, reps, loss_task, n_jobs))
    return float((frame[f"{method}_SF"] < frame["sample_SF"]).mean())
