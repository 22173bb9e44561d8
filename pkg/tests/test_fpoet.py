import numpy as np
import pytest

from core.basis import kernel_norm, make_basis
from core.covariance import center, sample_cov
from core.errors import InvalidArgumentError
from core.models import FunctionalPanel, KernelMatrix
from estimators.aft import ThresholdRule
from estimators.fpoet import (
    Solver,
    _resolve_solver,
    check_equivalence,
    fpoet_estimator,
    loading_outer,
    ls_fit,
    mfpca,
    spectral_parts,
)


def _scalar_factor_panel(rng, p=10, n=60, r=2, K=3, noise=0.2):
    Q = rng.standard_normal((p, r, K))
    gamma = rng.standard_normal((n, r))
    coeffs = np.einsum("iak,ta->tik", Q, gamma) + noise * rng.standard_normal((n, p, K))
    return center(FunctionalPanel(coeffs, make_basis("fourier", K, 2 * K + 5)))


def test_auto_solver_follows_dimension_rule(rng):
    small = _scalar_factor_panel(rng, p=4, n=20, K=3)       # pK = 12 <= 40
    wide = _scalar_factor_panel(rng, p=20, n=10, K=3)       # pK = 60 > 20
    assert _resolve_solver("auto", small) is Solver.PRIMAL
    assert _resolve_solver("auto", wide) is Solver.DUAL
    with pytest.raises(InvalidArgumentError):
        _resolve_solver("lanczos", small)


def test_primal_and_dual_spectra_agree(rng):
    panel = _scalar_factor_panel(rng, p=8, n=30, K=3)
    tau_p, phi_p = mfpca(panel, "primal")
    tau_d, phi_d = mfpca(panel, "dual")
    m = min(panel.n, panel.p * panel.K) - 1
    np.testing.assert_allclose(tau_d[:m], tau_p[:m], atol=1e-10)
    # leading eigenvectors agree up to sign
    for j in range(3):
        assert abs(abs(phi_p[:, j] @ phi_d[:, j]) - 1.0) < 1e-8


def test_fpoet_fit_normalizations(rng):
    panel = _scalar_factor_panel(rng)
    _, fit = fpoet_estimator(panel, 2, ThresholdRule())
    np.testing.assert_allclose(fit.Gamma_hat.T @ fit.Gamma_hat / panel.n, np.eye(2), atol=1e-10)
    assert fit.Q_hat.shape == (panel.p, 2, panel.K)
    assert fit.phi_hat.shape == (2, panel.p, panel.K)
    low_rank = loading_outer(fit.Q_hat).flat()
    lead = fit.phi_hat.reshape(2, -1).T
    np.testing.assert_allclose(low_rank, (lead * fit.tau_hat[:2]) @ lead.T, atol=1e-10)


def test_principal_orthogonal_complement(rng):
    panel = _scalar_factor_panel(rng)
    _, fit = fpoet_estimator(panel, 2, ThresholdRule(C_dot=0.0))
    expected = sample_cov(panel) - fit.low_rank()
    np.testing.assert_allclose(fit.R_hat.blocks, expected.blocks, atol=1e-10)
    np.testing.assert_allclose(fit.R_hat.blocks, sample_cov(fit.residuals).blocks, atol=1e-10)


def test_rank_zero_thresholds_the_sample_covariance(rng):
    panel = _scalar_factor_panel(rng)
    estimate, fit = fpoet_estimator(panel, 0, ThresholdRule(C_dot=0.0))
    np.testing.assert_allclose(estimate.blocks, sample_cov(panel).blocks, atol=1e-12)
    assert fit.Q_hat.shape == (panel.p, 0, panel.K)


def test_rank_bounds(rng):
    panel = _scalar_factor_panel(rng, p=3, n=5, K=2)
    with pytest.raises(InvalidArgumentError):
        fpoet_estimator(panel, 6, ThresholdRule())
    # centering leaves rank n - 1, so r = n exceeds the numerical rank
    with pytest.raises(InvalidArgumentError):
        fpoet_estimator(panel, 5, ThresholdRule())


def test_least_squares_fit_normalization(rng):
    panel = _scalar_factor_panel(rng)
    fit = ls_fit(panel, 2)
    np.testing.assert_allclose(fit.Gamma_hat.T @ fit.Gamma_hat / panel.n, np.eye(2), atol=1e-10)
    fitted = fit.Gamma_hat @ fit.Q_hat.transpose(1, 0, 2).reshape(2, -1)
    np.testing.assert_allclose(fitted + fit.residuals.flat(), panel.flat(), atol=1e-10)


@pytest.mark.parametrize("family", ["hard", "soft", "scad", "alasso"])
def test_fpoet_equals_least_squares(rng, family):
    for _ in range(20):
        p = int(rng.integers(2, 51))
        n = int(rng.integers(20, 101))
        r = int(rng.integers(1, 4))
        panel = _scalar_factor_panel(rng, p=p, n=n, r=r, K=3)
        gap_sigma, gap_residual = check_equivalence(panel, r, ThresholdRule(family=family))
        assert gap_sigma <= 1e-8
        assert gap_residual <= 1e-8


def test_spectral_parts(rng):
    p, r, K = 6, 2, 3
    Q = rng.standard_normal((p, r, K))
    Sigma_eps = KernelMatrix.identity(p, K)
    parts = spectral_parts(Q, Sigma_eps)
    np.testing.assert_allclose((parts.Sigma_y - parts.common).blocks, Sigma_eps.blocks)
    top = np.sort(np.linalg.eigvalsh(parts.common.flat()))[::-1][:r]
    np.testing.assert_allclose(parts.leading, top)
    # Weyl: the leading eigenvalues of Sigma_y sit within |Sigma_eps|_L of those of QQ^T
    shifted = np.sort(np.linalg.eigvalsh(parts.Sigma_y.flat()))[::-1][:r]
    assert np.all(np.abs(shifted - top) <= kernel_norm(Sigma_eps, "L") + 1e-10)


def test_fpoet_beats_sample_covariance_on_dgp2(dgp2_sample):
    panel, truth = dgp2_sample
    estimate, _ = fpoet_estimator(panel, 2, ThresholdRule())
    assert kernel_norm(estimate - truth.Sigma_y_true, "SF") < kernel_norm(sample_cov(panel) - truth.Sigma_y_true, "SF")
