import json

import numpy as np
import pandas as pd
import pytest

from main import main

SIM_ARGS = ["--dgp", "1", "--p", "6", "--n", "40", "--factors", "2", "--K", "5", "--seed", "4"]


@pytest.fixture
def simulated(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", *SIM_ARGS, "--output-dir", str(out)]) == 0
    return out


def read_report(directory, command):
    return json.loads((directory / f"{command}.json").read_text())


def test_simulate_then_fit_reports_loss(simulated, tmp_path):
    out = tmp_path / "fit"
    code = main([
        "fit", "--input", str(simulated / "panel.csv"), "--truth", str(simulated / "truth_sigma_y.csv"),
        "--K", "5", "--method", "digit", "--r", "2", "--output-dir", str(out),
    ])
    assert code == 0
    report = read_report(out, "fit")
    assert report["panel"] == {"n": 40, "p": 6, "K": 5}
    assert set(report["loss"]) == {"Smax", "SF", "S1"}
    assert (out / "sigma_hat.csv").exists()


def test_simulate_is_reproducible(simulated, tmp_path):
    again = tmp_path / "again"
    assert main(["simulate", *SIM_ARGS, "--output-dir", str(again)]) == 0
    assert (simulated / "simulate.json").read_bytes() == (again / "simulate.json").read_bytes()
    assert (simulated / "panel.csv").read_bytes() == (again / "panel.csv").read_bytes()


def test_malformed_csv_exits_with_usage_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["fit", "--input", str(bad), "--output-dir", str(tmp_path)]) == 2


def test_missing_input_file_exits_with_usage_code(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "none.csv"), "--output-dir", str(tmp_path)]) == 2


def test_unknown_config_key_is_rejected(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"bogus": 1}))
    assert main(["simulate", "--config", str(config), "--output-dir", str(tmp_path)]) == 2


def test_config_file_values_are_overridden_by_flags(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"p": 4, "n": 30, "K": 5, "seed": 1}))
    assert main(["simulate", "--config", str(config), "--p", "5", "--output-dir", str(tmp_path)]) == 0
    report = read_report(tmp_path, "simulate")
    assert report["config"]["p"] == 5
    assert report["config"]["n"] == 30


def test_select_command(simulated, tmp_path):
    out = tmp_path / "select"
    code = main(["select", "--input", str(simulated / "panel.csv"), "--K", "5", "--fit", "--output-dir", str(out)])
    assert code == 0
    report = read_report(out, "select")
    assert report["report"]["chosen_model"] in ("ffm1", "ffm2")
    assert (out / "sigma_hat.csv").exists()


def test_invert_command_with_correlation(simulated, tmp_path):
    out = tmp_path / "invert"
    code = main([
        "invert", "--input", str(simulated / "panel.csv"), "--K", "5", "--r", "2",
        "--mode", "truncated", "--energy", "1.0", "--kappa", "0.01", "--output-dir", str(out),
    ])
    assert code == 0
    report = read_report(out, "invert")
    assert report["d_n"] <= 30
    for name in ("inverse.csv", "correlation.csv", "precision.csv"):
        assert (out / name).exists()


def test_smw_invert_needs_a_fit(simulated, tmp_path):
    code = main([
        "invert", "--kernel", str(simulated / "truth_sigma_y.csv"), "--mode", "smw", "--output-dir", str(tmp_path),
    ])
    assert code == 2


def test_portfolio_command(tmp_path):
    rng = np.random.default_rng(9)
    days, series, grid = 40, ["AAA", "BBB", "CCC"], np.linspace(0.0, 390.0, 21)
    steps = 0.01 * rng.standard_normal((days, len(series), grid.size))
    prices = 50.0 * np.exp(np.cumsum(steps, axis=2))
    rows = [
        {"t": t, "series": s, "u": u, "price": prices[t, i, g]}
        for t in range(days) for i, s in enumerate(series) for g, u in enumerate(grid)
    ]
    path = tmp_path / "prices.csv"
    pd.DataFrame(rows).to_csv(path, index=False)

    out = tmp_path / "portfolio"
    code = main([
        "portfolio", "--input", str(path), "--K", "5", "--train-days", "20", "--test-days", "10",
        "--methods", "fpoet", "sample", "--output-dir", str(out),
    ])
    assert code == 0
    report = read_report(out, "portfolio")
    assert report["windows"] == 2
    assert [row["method"] for row in report["summary"]] == ["fpoet", "sample"]
    weights = pd.read_csv(out / "weights.csv")
    assert len(weights) == 2 * len(series) * grid.size


def test_small_factor_bench(tmp_path):
    code = main([
        "bench", "--table", "factors", "--reps", "2", "--p", "10", "--n", "40",
        "--K", "5", "--alpha", "0.75", "--output-dir", str(tmp_path),
    ])
    assert code == 0
    rows = read_report(tmp_path, "bench")["rows"]
    assert [row["dgp"] for row in rows] == [1, 2]
    assert all(0 <= row["frequency"] <= 1 for row in rows)
