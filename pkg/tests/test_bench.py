"""Monte Carlo acceptance checks at full size; run with ``pytest -m slow``."""

import numpy as np
import pytest

from core.basis import kernel_norm, make_basis
from core.covariance import center, sample_cov
from core.models import FunctionalPanel, KernelMatrix
from estimators.inverse import truncated_power
from sim.bench import factor_number_table, selection_table, win_rate
from sim.dgp import DgpConfig

pytestmark = pytest.mark.slow


def test_factor_numbers_are_recovered():
    table = factor_number_table(p=100, n=100, r=3, alphas=(0.25, 0.75), reps=200)
    sparse = table[table["alpha"] == 0.75].set_index("dgp")["frequency"]
    dense = table[table["alpha"] == 0.25].set_index("dgp")["frequency"]
    assert (sparse >= 0.95).all()
    # a denser idiosyncratic covariance pushes noise eigenvalues over the eps0 gate
    assert (dense <= sparse).all()
    assert dense[2] < sparse[2]


def test_information_criteria_pick_the_generating_model():
    detail, _ = selection_table(p=100, n=100, r=3, alpha=0.5, reps=100)
    dgp1 = detail[detail["dgp"] == 1]["delta_IC1"]
    dgp2 = detail[detail["dgp"] == 2]["delta_IC1"]
    assert (dgp1 < 0).mean() >= 0.95
    assert (dgp2 > 0).mean() >= 0.95


@pytest.mark.parametrize("dgp, method", [(1, "digit"), (2, "fpoet")])
def test_factor_guided_estimator_beats_sample_covariance(dgp, method):
    config = DgpConfig(dgp=dgp, p=100, n=100, r=3, alpha=0.5, seed=2024)
    assert win_rate(config, method, reps=100) >= 0.9


def test_inverse_error_decreases_with_sample_size():
    rng = np.random.default_rng(31)
    p, K = 10, 3
    A = rng.standard_normal((p * K, p * K))
    Sigma = KernelMatrix.from_flat(A @ A.T / (p * K) + 0.1 * np.eye(p * K), p, p, K)
    exact, _ = truncated_power(Sigma, 1.0, -1.0)
    chol = np.linalg.cholesky(Sigma.flat())
    basis = make_basis("fourier", K, 21)

    means = []
    for n in (100, 400, 1600):
        errors = []
        for _ in range(20):
            coeffs = (rng.standard_normal((n, p * K)) @ chol.T).reshape(n, p, K)
            estimate, _ = truncated_power(sample_cov(center(FunctionalPanel(coeffs, basis))), 1.0, -1.0)
            errors.append(kernel_norm(estimate - exact, "L"))
        means.append(np.mean(errors))
    assert means[0] > means[1] > means[2]
