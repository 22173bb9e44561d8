"""Configuration for the functional factor covariance toolkit."""

import os
from dotenv import load_dotenv
from pathlib import Path

load_dotenv()

# Runtime
THREADS = int(os.getenv("FFM_THREADS", "1"))
LOG_LEVEL = os.getenv("FFM_LOG_LEVEL", "INFO")

# Report format
SCHEMA_VERSION = "1.0"

# File Paths
OUTPUT_DIR = Path(os.getenv("FFM_OUTPUT_DIR", "./outputs"))

# Numerical tolerances
ORTHONORMALITY_TOL = 1e-8
SYMMETRY_TOL = 1e-8

# Basis used for estimation (data generation always uses 50 Fourier functions)
BASIS_CONFIG = {
    "kind": "fourier",
    "K": 15,
    "G": 101,
}

# Adaptive functional thresholding
THRESHOLD_CONFIG = {
    "family": "soft",
    "C_dot": 0.5,
    "scad_a": 3.7,
    "alasso_eta": 1.0,
    "threshold_diagonal": False,
    "adaptive": True,
    "cv_folds": 0,  # 0 disables cross-validation of C_dot
    "cv_grid": [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
}

# Factor-number and model selection
SELECTION_CONFIG = {
    "eps0": 0.01,
    "c_r": 0.75,
    "r0_fraction": 0.75,  # FPOET search range as a fraction of min(n, p)
}

# Inversion
INVERSE_CONFIG = {
    "mode": "truncated",
    "energy": 0.95,
    "ridge_scale": 1e-6,  # ridge = ridge_scale * trace / pK
    "kappa": None,
}

# Data-generating processes
SIM_CONFIG = {
    "burn_in": 100,
    "n_factor_basis": 50,
    "n_eps_basis": 25,
    "var_decay": 0.4,
    "loading_bound": 0.75,
    "q_sd": 0.3,
    "gamma_shape": 3.0,
    "gamma_scale": 1.0,
    "eps_scale": 0.25,    # idiosyncratic sd multiplier, keeps noise eigenvalues under the eps0 gate at p = 100
    "offdiag_high": 0.5,
    "pd_margin": 0.01,
}

# Functional portfolio backtest
PORTFOLIO_CONFIG = {
    "train_days": 126,
    "test_days": 21,
    "constraint_tol": 1e-6,
}

# Monte Carlo bench defaults
BENCH_CONFIG = {
    "reps": 200,
    "p": 100,
    "n": 100,
    "r": 3,
    "alpha": 0.75,
    "seed": 20240901,
    "loss_n_grid": [60, 100, 140, 200],
}
