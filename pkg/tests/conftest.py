"""Shared fixtures: small bases, random panels and simulated factor panels."""

import numpy as np
import pytest

from core.basis import make_basis
from core.covariance import center
from core.models import FunctionalPanel, KernelMatrix
from sim.dgp import DgpConfig, generate


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def basis():
    return make_basis("fourier", 4, 21)


@pytest.fixture
def random_panel(rng, basis):
    return center(FunctionalPanel(rng.standard_normal((40, 6, 4)), basis))


@pytest.fixture
def spd_kernel(rng):
    """Factory for well-conditioned symmetric positive definite kernel matrices."""
    def make(p=4, K=3, floor=0.5):
        A = rng.standard_normal((p * K, p * K))
        return KernelMatrix.from_flat(A @ A.T / (p * K) + floor * np.eye(p * K), p, p, K)
    return make


@pytest.fixture
def factor_panel(rng):
    """Factory for panels y_t = B f_t + noise with strong functional factors."""
    def make(p=12, n=80, r=2, K=4, noise=0.1):
        B = rng.uniform(-1.0, 1.0, size=(p, r)) + np.sign(rng.standard_normal((p, r)))
        factors = rng.standard_normal((n, r, K)) * np.linspace(3.0, 0.5, K)
        coeffs = np.einsum("ia,tak->tik", B, factors) + noise * rng.standard_normal((n, p, K))
        return center(FunctionalPanel(coeffs, make_basis("fourier", K, 2 * K + 11))), B
    return make


@pytest.fixture(scope="session")
def dgp1_sample():
    config = DgpConfig(dgp=1, p=20, n=100, r=2, K=5, seed=11)
    panel, truth = generate(config)
    return center(panel), truth


@pytest.fixture(scope="session")
def dgp2_sample():
    config = DgpConfig(dgp=2, p=20, n=100, r=2, K=5, seed=12)
    panel, truth = generate(config)
    return center(panel), truth
