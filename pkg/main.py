"""
Functional Factor Covariance Toolkit

Command-line entry point that:
1. Simulates panels with analytic covariance truths (DGP1 / DGP2)
2. Fits DIGIT or FPOET with adaptive functional thresholding
3. Chooses between the two factor models (LangGraph selection workflow)
4. Inverts estimates and runs the functional portfolio backtest
5. Reproduces the Monte Carlo tables

Usage:
    python main.py simulate --dgp 1 --p 50 --n 100 --output-dir outputs/sim
    python main.py fit --input outputs/sim/panel.csv --method digit --truth outputs/sim/truth_sigma_y.csv
    python main.py bench --table1 --alpha 0.75 --reps 200

Exit codes: 0 ok, 1 numerical failure, 2 usage / schema / IO error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from core.basis import basis_from_grid, evaluate, kernel_norm, project
from core.config import (
    BASIS_CONFIG,
    BENCH_CONFIG,
    INVERSE_CONFIG,
    OUTPUT_DIR,
    PORTFOLIO_CONFIG,
    THREADS,
    THRESHOLD_CONFIG,
)
from core.covariance import center, sample_cov
from core.data_loader import (
    load_json_file,
    load_kernel_matrix,
    load_long_panel,
    load_price_panel,
    write_json_file,
    write_kernel_matrix,
    write_long_panel,
)
from core.errors import FFMError, InvalidArgumentError, SchemaError
from core.log import configure_logging
from core.models import BasisSpec, FunctionalPanel, KernelMatrix
from estimators.aft import ThresholdRule, cv_select_C, functional_sparsity
from estimators.digit import digit_estimator
from estimators.fpoet import fpoet_estimator
from estimators.inverse import InverseSpec, correlation_pair, default_ridge, smw_inverse, truncated_power
from estimators.select import estimate_ranks
from graph.workflow import run_selection
from portfolio.backtest import METHODS, backtest, summarize_backtest
from portfolio.risk import cidr, min_variance_weights
from sim.bench import factor_number_table, loss_curves, selection_table
from sim.dgp import DgpConfig, generate, loss

logger = logging.getLogger("ffm")


class RunConfig(BaseModel):
    """Validated options for one CLI run; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    command: Literal["simulate", "fit", "select", "invert", "portfolio", "bench"]

    # io
    input: Optional[str] = None
    truth: Optional[str] = None
    kernel: Optional[str] = None
    output_dir: str = str(OUTPUT_DIR)

    # basis
    basis_kind: Literal["fourier", "bspline"] = BASIS_CONFIG["kind"]
    K: int = Field(BASIS_CONFIG["K"], ge=1)
    G: int = Field(BASIS_CONFIG["G"], ge=3)

    # estimation
    method: Literal["digit", "fpoet"] = "digit"
    r: Optional[int] = Field(None, ge=0)
    solver: Literal["auto", "primal", "dual"] = "auto"
    threshold: Literal["hard", "soft", "scad", "alasso", "adaptive-lasso"] = THRESHOLD_CONFIG["family"]
    cdot: float = Field(THRESHOLD_CONFIG["C_dot"], ge=0)
    cv_folds: int = Field(THRESHOLD_CONFIG["cv_folds"], ge=0)
    threshold_diagonal: bool = THRESHOLD_CONFIG["threshold_diagonal"]
    universal: bool = False

    # inversion
    mode: Literal["smw", "truncated"] = INVERSE_CONFIG["mode"]
    energy: float = Field(INVERSE_CONFIG["energy"], gt=0, le=1)
    ridge: Optional[float] = Field(None, ge=0)
    kappa: Optional[float] = Field(INVERSE_CONFIG["kappa"], gt=0)

    # simulation / bench
    dgp: Optional[Literal[1, 2]] = None
    p: Optional[int] = Field(None, ge=2)
    n: Optional[int] = Field(None, ge=2)
    factors: int = Field(BENCH_CONFIG["r"], ge=1)
    alpha: Optional[float] = Field(None, ge=0, le=1)
    seed: int = BENCH_CONFIG["seed"]
    reps: int = Field(BENCH_CONFIG["reps"], ge=1)
    table: Literal["factors", "selection", "loss"] = "factors"

    # portfolio
    methods: list[Literal["digit", "fpoet", "sample"]] = Field(default_factory=lambda: list(METHODS))
    train_days: int = Field(PORTFOLIO_CONFIG["train_days"], ge=2)
    test_days: int = Field(PORTFOLIO_CONFIG["test_days"], ge=1)

    # runtime
    threads: int = Field(THREADS, ge=1)
    log_level: str = "INFO"

    def rule(self) -> ThresholdRule:
        return ThresholdRule(family=self.threshold, C_dot=self.cdot, adaptive=not self.universal)

    def basis_options(self) -> dict:
        return {"K": self.K, "basis_kind": self.basis_kind, "G": self.G}

    def output_path(self, name: str) -> Path:
        return Path(self.output_dir) / name


# ============== ARGUMENT PARSING ==============

def build_parser() -> argparse.ArgumentParser:
    """CLI flags; unset flags stay absent so ``--config`` values are not overridden."""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with RunConfig fields")
    common.add_argument("--input", help="Input CSV (long format)")
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--basis", dest="basis_kind", choices=["fourier", "bspline"])
    common.add_argument("--K", type=int)
    common.add_argument("--G", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--log-level", dest="log_level")

    estimation = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    estimation.add_argument("--method", choices=["digit", "fpoet"])
    estimation.add_argument("--r", type=int, help="Number of factors (ratio-estimated when omitted)")
    estimation.add_argument("--solver", choices=["auto", "primal", "dual"])
    estimation.add_argument("--threshold", choices=["hard", "soft", "scad", "alasso", "adaptive-lasso"])
    estimation.add_argument("--cdot", type=float)
    estimation.add_argument("--cv-folds", dest="cv_folds", type=int)
    estimation.add_argument("--threshold-diagonal", dest="threshold_diagonal", action="store_true")
    estimation.add_argument("--universal", action="store_true", help="Universal instead of adaptive thresholding")

    simulation = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    simulation.add_argument("--dgp", type=int, choices=[1, 2])
    simulation.add_argument("--p", type=int)
    simulation.add_argument("--n", type=int)
    simulation.add_argument("--factors", type=int, help="True number of factors")
    simulation.add_argument("--alpha", type=float)
    simulation.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(description="Functional factor covariance toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common, simulation], argument_default=argparse.SUPPRESS, help="Simulate a panel with its analytic truth")

    fit = sub.add_parser("fit", parents=[common, estimation], argument_default=argparse.SUPPRESS, help="Fit DIGIT or FPOET")
    fit.add_argument("--truth", help="Kernel CSV of the true covariance for a loss report")

    select = sub.add_parser("select", parents=[common, estimation], argument_default=argparse.SUPPRESS, help="Choose between the two factor models")
    select.add_argument("--fit", dest="fit_chosen", action="store_true", help="Also fit the chosen model")

    invert = sub.add_parser("invert", parents=[common, estimation], argument_default=argparse.SUPPRESS, help="Invert an estimate")
    invert.add_argument("--kernel", help="Invert a stored kernel CSV instead of fitting")
    invert.add_argument("--mode", choices=["smw", "truncated"])
    invert.add_argument("--energy", type=float)
    invert.add_argument("--ridge", type=float)
    invert.add_argument("--kappa", type=float)

    portfolio = sub.add_parser("portfolio", parents=[common, estimation], argument_default=argparse.SUPPRESS, help="Rolling minimum-variance backtest")
    portfolio.add_argument("--methods", nargs="+", choices=list(METHODS))
    portfolio.add_argument("--train-days", dest="train_days", type=int)
    portfolio.add_argument("--test-days", dest="test_days", type=int)
    portfolio.add_argument("--energy", type=float)

    bench = sub.add_parser("bench", parents=[common, simulation, estimation], argument_default=argparse.SUPPRESS, help="Monte Carlo tables")
    bench.add_argument("--table", choices=["factors", "selection", "loss"])
    bench.add_argument("--table1", dest="table", action="store_const", const="factors")
    bench.add_argument("--reps", type=int)

    return parser


def load_run_config(argv: list[str] | None = None) -> tuple[RunConfig, dict]:
    """Merge ``--config`` file values with explicit flags (flags win)."""
    args = vars(build_parser().parse_args(argv))
    extras = {"fit_chosen": args.pop("fit_chosen", False)}
    config_path = args.pop("config", None)
    values: dict[str, Any] = {}
    if config_path:
        payload = load_json_file(config_path)
        if not isinstance(payload, dict):
            raise SchemaError(f"{config_path} must hold a JSON object", "cli")
        values.update(payload)
    values.update(args)
    try:
        return RunConfig.model_validate(values), extras
    except ValidationError as exc:
        raise SchemaError(f"invalid run configuration: {exc}", "cli") from exc


# ============== SHARED STEPS ==============

def unit_grid(grid: np.ndarray) -> np.ndarray:
    """Rescale an observation grid onto [0, 1]."""
    grid = np.asarray(grid, dtype=float)
    span = grid[-1] - grid[0] if grid.size else 0.0
    if span <= 0:
        raise SchemaError("observation grid must have at least two distinct points", "cli")
    return (grid - grid[0]) / span


def load_panel(config: RunConfig) -> FunctionalPanel:
    """Read a long-format panel, project it onto the configured basis and center it."""
    if not config.input:
        raise InvalidArgumentError(f"{config.command} needs --input", "cli")
    long = load_long_panel(config.input)
    basis = basis_from_grid(config.basis_kind, config.K, unit_grid(long.grid))
    panel = project(long.samples, basis)
    logger.info("loaded panel n=%d p=%d (projection error %.3e)", panel.n, panel.p, panel.projection_error)
    return center(panel)


def fit_panel(panel: FunctionalPanel, config: RunConfig) -> dict:
    """Fit the configured estimator, ratio-estimating r and cross-validating C_dot when asked."""
    r = config.r
    if r is None:
        r_digit, r_fpoet = estimate_ranks(panel)
        r = r_digit if config.method == "digit" else r_fpoet

    def run(rule: ThresholdRule):
        if config.method == "digit":
            return digit_estimator(panel, r, rule, config.threshold_diagonal)
        return fpoet_estimator(panel, r, rule, config.solver, config.threshold_diagonal)

    rule = config.rule()
    estimate, fit = run(rule)
    if config.cv_folds:
        C_dot = cv_select_C(fit.residuals, rule, config.cv_folds, THRESHOLD_CONFIG["cv_grid"], config.threshold_diagonal)
        rule = rule.with_C(C_dot)
        estimate, fit = run(rule)
    return {"r": r, "rule": rule, "estimate": estimate, "fit": fit}


def fit_summary(config: RunConfig, panel: FunctionalPanel, result: dict) -> dict:
    fit, estimate = result["fit"], result["estimate"]
    if config.method == "digit":
        spectrum, idiosyncratic = fit.omega_eigenvalues, fit.Sigma_eps_thresholded
        extra = {"B_hat": fit.B_hat.tolist()}
    else:
        spectrum, idiosyncratic = fit.tau_hat, fit.R_thresholded
        extra = {"Q_hat_norms": np.linalg.norm(fit.Q_hat, axis=2).tolist()}
    return {
        "command": "fit",
        "method": config.method,
        "r": result["r"],
        "rule": result["rule"].to_dict(),
        "threshold_diagonal": config.threshold_diagonal,
        "panel": {"n": panel.n, "p": panel.p, "K": panel.K},
        "spectrum": np.asarray(spectrum, dtype=float).tolist(),
        "sparsity": functional_sparsity(idiosyncratic, 0.0),
        "norms": {which: float(kernel_norm(estimate, which)) for which in ("Smax", "SF", "L")},
        **extra,
    }


def records(frame: pd.DataFrame) -> list[dict]:
    """DataFrame rows as JSON-safe dicts (NaN becomes null)."""
    return frame.astype(object).where(frame.notna(), None).to_dict(orient="records")


# ============== COMMANDS ==============

def run_simulate(config: RunConfig) -> dict:
    dgp = DgpConfig(
        dgp=config.dgp or 1,
        p=config.p or 50,
        n=config.n or 100,
        r=config.factors,
        alpha=0.5 if config.alpha is None else config.alpha,
        seed=config.seed,
        **config.basis_options(),
    )
    panel, truth = generate(dgp)
    write_long_panel(evaluate(panel.coeffs, panel.basis), panel.basis.grid, config.output_path("panel.csv"))
    write_kernel_matrix(truth.Sigma_y_true, config.output_path("truth_sigma_y.csv"), panel.basis)
    write_kernel_matrix(truth.Sigma_eps_true, config.output_path("truth_sigma_eps.csv"), panel.basis)
    return {
        "command": "simulate",
        "config": dgp.to_dict(),
        "s_p_true": truth.s_p_true,
        "projection_remainder": truth.projection_remainder,
        "norm_SF_true": float(kernel_norm(truth.Sigma_y_true, "SF")),
    }


def run_fit(config: RunConfig) -> dict:
    panel = load_panel(config)
    result = fit_panel(panel, config)
    report = fit_summary(config, panel, result)
    write_kernel_matrix(result["estimate"], config.output_path("sigma_hat.csv"), panel.basis)
    if config.truth:
        truth, _ = load_kernel_matrix(config.truth)
        report["loss"] = {which: loss(result["estimate"], truth, which) for which in ("Smax", "SF", "S1")}
    return report


def run_select(config: RunConfig, fit_chosen: bool = False) -> dict:
    panel = load_panel(config)
    state = run_selection(
        panel,
        {"rule": config.rule(), "solver": config.solver, "threshold_diagonal": config.threshold_diagonal, "fit": fit_chosen},
        verbose=True,
    )
    if state.get("errors"):
        return {"command": "select", "errors": state["errors"]}
    report = {
        "command": "select",
        "report": state["report"].to_dict(),
        "omega_eigenvalues": np.asarray(state["omega_eigenvalues"]).tolist(),
        "tau_eigenvalues": np.asarray(state["tau_eigenvalues"]).tolist(),
    }
    if "Sigma_y_hat" in state:
        write_kernel_matrix(state["Sigma_y_hat"], config.output_path("sigma_hat.csv"), panel.basis)
    return report


def run_invert(config: RunConfig) -> dict:
    basis: BasisSpec | None = None
    if config.kernel:
        if config.mode == "smw":
            raise InvalidArgumentError("the SMW inverse needs a DIGIT fit, not a stored kernel", "cli")
        Sigma, _ = load_kernel_matrix(config.kernel)
        fit = None
    else:
        panel = load_panel(config)
        basis = panel.basis
        result = fit_panel(panel, config)
        Sigma, fit = result["estimate"], result["fit"]

    report: dict[str, Any] = {"command": "invert", "mode": config.mode}
    if config.mode == "smw":
        if config.method != "digit":
            raise InvalidArgumentError("the SMW inverse needs --method digit", "cli")
        ridge = default_ridge(fit.Sigma_eps_thresholded) if config.ridge is None else config.ridge
        inverse = smw_inverse(fit, fit.Sigma_eps_thresholded, ridge)
        report.update({"ridge": ridge, "r": fit.r})
    else:
        inverse, d_n = truncated_power(Sigma, config.energy, -1.0)
        report.update({"energy": config.energy, "d_n": d_n})

    identity = KernelMatrix.identity(Sigma.p_rows, Sigma.K)
    report["norm_L_inverse"] = float(kernel_norm(inverse, "L"))
    report["identity_residual_L"] = float(
        kernel_norm(KernelMatrix.from_flat(Sigma.flat() @ inverse.flat(), Sigma.p_rows, Sigma.p_cols, Sigma.K) - identity, "L")
    )
    write_kernel_matrix(inverse, config.output_path("inverse.csv"), basis)

    if config.kappa is not None:
        C, Theta = correlation_pair(Sigma, config.kappa)
        write_kernel_matrix(C, config.output_path("correlation.csv"), basis)
        write_kernel_matrix(Theta, config.output_path("precision.csv"), basis)
        report["kappa"] = config.kappa
    return report


def run_portfolio(config: RunConfig) -> dict:
    if not config.input:
        raise InvalidArgumentError("portfolio needs --input with columns t,series,u,price", "cli")
    prices = load_price_panel(config.input)
    samples = cidr(prices.samples)
    basis = basis_from_grid(config.basis_kind, config.K, unit_grid(prices.grid))
    rule = config.rule()
    spec = InverseSpec(energy=config.energy)

    frame = backtest(
        samples, basis, config.methods, rule, spec, config.train_days, config.test_days, n_jobs=config.threads
    )
    frame.to_csv(config.output_path("backtest.csv"), index=False)

    # Allocation fitted on the most recent training window
    latest = center(project(samples[-config.train_days:], basis))
    rows, weights_report = [], {}
    for method in config.methods:
        if method == "sample":
            Sigma = sample_cov(latest)
        else:
            Sigma = fit_panel(latest, config.model_copy(update={"method": method}))["estimate"]
        weights = min_variance_weights(Sigma, basis, spec)
        weights_report[method] = {
            "constraint_residual": weights.constraint_residual,
            "renormalized": weights.renormalized,
            "d_n": weights.d_n,
        }
        values = weights.on_grid(basis)
        for i, series in enumerate(prices.series):
            rows.extend(
                {"method": method, "series": series, "u": float(u), "weight": float(v)}
                for u, v in zip(prices.grid, values[i])
            )
    pd.DataFrame(rows).to_csv(config.output_path("weights.csv"), index=False)

    return {
        "command": "portfolio",
        "windows": int(frame["window"].nunique()),
        "summary": records(summarize_backtest(frame)),
        "weights": weights_report,
    }


def run_bench(config: RunConfig) -> dict:
    common = {
        "p": config.p or BENCH_CONFIG["p"],
        "r": config.factors,
        "reps": config.reps,
        "seed": config.seed,
        "n_jobs": config.threads,
        **config.basis_options(),
    }
    report: dict[str, Any] = {"command": "bench", "table": config.table}
    if config.table == "factors":
        alphas = (0.25, 0.75) if config.alpha is None else (config.alpha,)
        frame = factor_number_table(n=config.n or BENCH_CONFIG["n"], alphas=alphas, **common)
        report["rows"] = records(frame)
    elif config.table == "selection":
        detail, summary = selection_table(
            n=config.n or BENCH_CONFIG["n"], alpha=0.5 if config.alpha is None else config.alpha, **common
        )
        detail.to_csv(config.output_path("selection_detail.csv"), index=False)
        frame = summary
        report["rows"] = records(summary)
    else:
        dgps = (config.dgp,) if config.dgp else (1, 2)
        alpha = 0.5 if config.alpha is None else config.alpha
        frame = pd.concat([loss_curves(dgp, alpha=alpha, **common) for dgp in dgps], ignore_index=True)
        report["rows"] = records(frame)
    frame.to_csv(config.output_path(f"bench_{config.table}.csv"), index=False)
    return report


# ============== OUTPUT FORMATTING ==============

def format_fit_output(report: dict) -> str:
    output = []
    output.append("\n" + "=" * 60)
    output.append(f"📐 {report['method'].upper()} COVARIANCE ESTIMATE")
    output.append("=" * 60)
    panel = report["panel"]
    output.append(f"  Panel: n={panel['n']}, p={panel['p']}, K={panel['K']}")
    output.append(f"  Factors: r={report['r']}")
    rule = report["rule"]
    output.append(f"  Thresholding: {rule['family']} (C_dot={rule['C_dot']:.3g})")
    output.append(f"  Functional sparsity s_p: {report['sparsity']:.1f}")
    output.append(f"  Leading spectrum: {', '.join(f'{v:.4g}' for v in report['spectrum'][:5])}")
    if "loss" in report:
        output.append("  Loss against truth:")
        for which, value in report["loss"].items():
            output.append(f"    {which:>5}: {value:.4f}")
    output.append("=" * 60)
    return "\n".join(output)


def format_selection_output(report: dict) -> str:
    output = []
    output.append("\n" + "=" * 60)
    output.append("🎯 FACTOR MODEL SELECTION")
    output.append("=" * 60)
    if report.get("errors"):
        for error in report["errors"]:
            output.append(f"  ❌ {error}")
        output.append("=" * 60)
        return "\n".join(output)

    sel = report["report"]
    output.append(f"  r_hat (DIGIT, functional factors):  {sel['r_hat_digit']}")
    output.append(f"  r_hat (FPOET, functional loadings): {sel['r_hat_fpoet']}")
    for name in ("delta_PC", "delta_IC"):
        values = ", ".join("n/a" if v is None else f"{v:+.4f}" for v in sel[name])
        output.append(f"  {name}: {values}")
    for warning in sel["warnings"]:
        output.append(f"  ⚠️  {warning}")
    output.append(f"\n  Chosen model: {sel['chosen_model']}")
    output.append("=" * 60)
    return "\n".join(output)


def format_table_output(title: str, rows: list[dict]) -> str:
    output = ["\n" + "=" * 60, f"📊 {title}", "=" * 60]
    if rows:
        output.append(pd.DataFrame(rows).to_string(index=False))
    output.append("=" * 60)
    return "\n".join(output)


def format_output(report: dict) -> str:
    command = report["command"]
    if command == "fit":
        return format_fit_output(report)
    if command == "select":
        return format_selection_output(report)
    if command == "portfolio":
        return format_table_output(f"BACKTEST ({report['windows']} windows)", report["summary"])
    if command == "bench":
        return format_table_output(f"MONTE CARLO: {report['table']}", report["rows"])
    if command == "invert":
        details = {k: v for k, v in report.items() if k != "command"}
        return format_table_output("INVERSE", [details])
    return format_table_output("SIMULATION", [{"s_p_true": report["s_p_true"],
                                                "projection_remainder": report["projection_remainder"]}])


def main(argv: list[str] | None = None) -> int:
    """Run one CLI command and return its exit code."""
    try:
        config, extras = load_run_config(argv)
    except FFMError as exc:
        print(f"❌ {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, OSError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 2

    configure_logging(config.log_level)
    Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    runners = {
        "simulate": run_simulate,
        "fit": run_fit,
        "invert": run_invert,
        "portfolio": run_portfolio,
        "bench": run_bench,
    }
    try:
        if config.command == "select":
            report = run_select(config, extras["fit_chosen"])
        else:
            report = runners[config.command](config)
    except FFMError as exc:
        logger.error("%s failed: %s", config.command, exc)
        print(f"❌ {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, OSError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return 2

    path = write_json_file(report, config.output_path(f"{config.command}.json"))
    print(format_output(report))
    print(f"\n💾 Report saved to: {path}")
    return 1 if report.get("errors") else 0


if __name__ == "__main__":
    sys.exit(main())
