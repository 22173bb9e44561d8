"""Data loading utilities for curve panels, price panels and kernel matrices."""

import json
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from core.config import SCHEMA_VERSION
from core.errors import SchemaError
from core.models import BasisSpec, KernelMatrix, LongPanel

PANEL_COLUMNS = ("t", "series", "u", "value")
PRICE_COLUMNS = ("t", "series", "u", "price")


def load_json_file(file_path: str | Path) -> Any:
    """Load and parse a JSON file."""
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path} is not valid JSON: {exc}", "cli") from exc


def write_json_file(payload: dict, file_path: str | Path) -> Path:
    """Write a report with sorted keys so identical runs give identical bytes."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"schema_version": SCHEMA_VERSION, **payload}, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _read_long_frame(file_path: str | Path, columns: tuple[str, ...]) -> pd.DataFrame:
    path = Path(file_path)
    if not path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"could not parse {path}: {exc}", "basis") from exc

    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path} is missing columns {missing}; expected {list(columns)}", "basis")
    frame = frame[list(columns)].copy()
    if frame.empty:
        raise SchemaError(f"{path} has no rows", "basis")

    for col in ("u", columns[-1]):
        frame[col] = pd.to_numeric(frame[col], errors="coerce")
    if frame[["u", columns[-1]]].isna().any().any():
        raise SchemaError(f"{path} has non-numeric or missing 'u'/'{columns[-1]}' entries", "basis")
    if frame.duplicated(subset=["t", "series", "u"]).any():
        raise SchemaError(f"{path} has duplicated (t, series, u) rows", "basis")
    return frame


def _pivot_long(frame: pd.DataFrame, value_col: str, source: str) -> LongPanel:
    times = list(pd.unique(frame["t"]))
    series = list(pd.unique(frame["series"]))
    grid = np.sort(frame["u"].unique())

    expected = len(times) * len(series) * len(grid)
    if len(frame) != expected:
        raise SchemaError(
            f"{source}: every (t, series) pair must be observed on the same {len(grid)}-point grid "
            f"({len(frame)} rows, expected {expected})",
            "basis",
        )

    cube = (
        frame.set_index(["t", "series", "u"])[value_col]
        .unstack("u")
        .reindex(pd.MultiIndex.from_product([times, series], names=["t", "series"]))
    )
    if cube.isna().any().any():
        raise SchemaError(f"{source}: incomplete panel, some (t, series, u) cells are missing", "basis")
    samples = cube[grid].to_numpy(dtype=float).reshape(len(times), len(series), len(grid))
    return LongPanel(samples=samples, grid=grid, times=times, series=series)


def load_long_panel(file_path: str | Path) -> LongPanel:
    """Load grid samples from a long-format CSV with columns t,series,u,value."""
    frame = _read_long_frame(file_path, PANEL_COLUMNS)
    return _pivot_long(frame, "value", str(file_path))


def load_price_panel(file_path: str | Path) -> LongPanel:
    """Load intraday prices from a long-format CSV with columns t,series,u,price."""
    frame = _read_long_frame(file_path, PRICE_COLUMNS)
    return _pivot_long(frame, "price", str(file_path))


def write_long_panel(
    samples: np.ndarray,
    grid: np.ndarray,
    file_path: str | Path,
    value_name: str = "value",
) -> Path:
    """Write (n, p, G) grid samples in the long format read by ``load_long_panel``."""
    n, p, G = samples.shape
    t_idx, s_idx, g_idx = np.meshgrid(np.arange(n), np.arange(p), np.arange(G), indexing="ij")
    frame = pd.DataFrame(
        {
            "t": t_idx.ravel(),
            "series": s_idx.ravel(),
            "u": np.asarray(grid)[g_idx.ravel()],
            value_name: samples.ravel(),
        }
    )
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.12g")
    return path


def write_kernel_matrix(M: KernelMatrix, file_path: str | Path, basis: BasisSpec | None = None) -> Path:
    """Write the pK x pK flattening as CSV plus a ``.json`` header {p, K, basis}."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(M.flat()).to_csv(path, index=False, header=False, float_format="%.17g")
    header = {"p": M.p_rows, "p_cols": M.p_cols, "K": M.K, "basis": basis.to_dict() if basis else None}
    write_json_file(header, path.with_suffix(".json"))
    return path


def load_kernel_matrix(file_path: str | Path) -> tuple[KernelMatrix, dict]:
    """Inverse of ``write_kernel_matrix``; returns the matrix and its header."""
    path = Path(file_path)
    header = load_json_file(path.with_suffix(".json"))
    try:
        p, K = int(header["p"]), int(header["K"])
        p_cols = int(header.get("p_cols", p))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"kernel header for {path} needs integer 'p' and 'K': {exc}", "covariance") from exc
    try:
        flat = pd.read_csv(path, header=None, float_precision="round_trip").to_numpy(dtype=float)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as exc:
        raise SchemaError(f"could not parse kernel CSV {path}: {exc}", "covariance") from exc
    if flat.shape != (p * K, p_cols * K):
        raise SchemaError(f"kernel CSV {path} has shape {flat.shape}, header says p={p}, K={K}", "covariance")
    return KernelMatrix.from_flat(flat, p, p_cols, K), header
