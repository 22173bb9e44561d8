import numpy as np
import pytest

from core.basis import kernel_norm
from core.covariance import sample_cov
from core.errors import InvalidArgumentError, SingularInputError
from core.models import FunctionalPanel, KernelMatrix
from estimators.digit import DigitFit, loading_sandwich
from estimators.inverse import (
    InverseSpec,
    correlation_pair,
    default_ridge,
    retained_rank,
    smw_inverse,
    truncated_inverse,
    truncated_power,
)


def test_retained_rank():
    assert retained_rank([4.0, 3.0, 2.0, 1.0], 0.5) == 2
    assert retained_rank([4.0, 3.0, 2.0, 1.0], 1.0) == 4
    assert retained_rank([1.0, 1.0, 0.0, -1e-15], 1.0) == 2
    with pytest.raises(SingularInputError):
        retained_rank([0.0, -1.0], 0.9)
    with pytest.raises(InvalidArgumentError):
        retained_rank([1.0], 0.0)


def test_full_energy_truncated_inverse_is_exact(spd_kernel):
    M = spd_kernel(p=3, K=2)
    inverse = truncated_inverse(M, InverseSpec(energy=1.0))
    np.testing.assert_allclose(M.flat() @ inverse.flat(), np.eye(6), atol=1e-8)


def test_truncated_power_reports_rank(spd_kernel):
    M = spd_kernel(p=3, K=2)
    root, d_n = truncated_power(M, 1.0, -0.5)
    assert d_n == 6
    np.testing.assert_allclose(root.flat() @ M.flat() @ root.flat(), np.eye(6), atol=1e-8)
    _, d_small = truncated_power(M, 0.5, -1.0)
    assert 1 <= d_small < 6


def test_truncated_inverse_needs_symmetry(rng):
    M = KernelMatrix.from_flat(rng.standard_normal((4, 4)), 2, 2, 2)
    with pytest.raises(InvalidArgumentError):
        truncated_inverse(M)


def test_inverse_spec_validation():
    with pytest.raises(InvalidArgumentError):
        InverseSpec(energy=1.5)
    with pytest.raises(InvalidArgumentError):
        InverseSpec(mode="cholesky")
    with pytest.raises(InvalidArgumentError):
        InverseSpec(ridge=-1.0)


def _digit_structure(rng, p=6, r=2, K=3):
    B = rng.standard_normal((p, r))
    A = rng.standard_normal((r * K, r * K))
    Sigma_f = KernelMatrix.from_flat(A @ A.T + np.eye(r * K), r, r, K)
    E = rng.standard_normal((p * K, p * K)) * 0.2
    Sigma_eps = KernelMatrix.from_flat(E @ E.T + np.eye(p * K), p, p, K)
    placeholder = FunctionalPanel(np.zeros((2, p, K)))
    fit = DigitFit(
        B_hat=B,
        factors=FunctionalPanel(np.zeros((2, r, K))),
        Sigma_f_hat=Sigma_f,
        residuals=placeholder,
        omega_eigenvalues=np.zeros(p),
        r=r,
    )
    return fit, Sigma_eps, (loading_sandwich(B, Sigma_f) + Sigma_eps).symmetrized()


def test_smw_agrees_with_truncated_inverse(rng):
    fit, Sigma_eps, Sigma = _digit_structure(rng)
    smw = smw_inverse(fit, Sigma_eps, ridge=0.0)
    direct = truncated_inverse(Sigma, InverseSpec(energy=1.0))
    assert kernel_norm(smw - direct, "L") <= 1e-6 * max(1.0, kernel_norm(direct, "L"))


def test_smw_rank_zero_is_ridge_inverse(rng):
    fit, Sigma_eps, _ = _digit_structure(rng)
    fit = DigitFit(fit.B_hat[:, :0], fit.factors, KernelMatrix.zeros(0, 0, 3), fit.residuals, fit.omega_eigenvalues, 0)
    out = smw_inverse(fit, Sigma_eps, ridge=0.0)
    np.testing.assert_allclose(out.flat() @ Sigma_eps.flat(), np.eye(18), atol=1e-8)


def test_smw_singular_idiosyncratic_part(rng):
    fit, _, _ = _digit_structure(rng)
    with pytest.raises(SingularInputError):
        smw_inverse(fit, KernelMatrix.zeros(6, 6, 3), ridge=0.0)


def test_default_ridge_scales_with_trace(spd_kernel):
    M = spd_kernel(p=2, K=2)
    assert default_ridge(M) == pytest.approx(1e-6 * np.trace(M.flat()) / 4)


def test_correlation_pair(spd_kernel):
    Sigma = spd_kernel(p=3, K=2, floor=1.0)
    C, Theta = correlation_pair(Sigma, 1e-8)
    assert C.is_symmetric() and Theta.is_symmetric()
    for i in range(3):
        np.testing.assert_allclose(C.blocks[i, i], np.eye(2), atol=1e-6)
    # Theta with kappa -> 0 is D^{1/2} Sigma^{-1} D^{1/2}, the inverse of the correlation
    np.testing.assert_allclose(C.flat() @ Theta.flat(), np.eye(6), atol=1e-5)
    with pytest.raises(InvalidArgumentError):
        correlation_pair(Sigma, 0.0)


def test_truncated_inverse_keeps_both_components_at_95_percent():
    rotation = np.array([[0.6, -0.8], [0.8, 0.6]])
    M = KernelMatrix.from_flat(rotation @ np.diag([9.0, 1.0]) @ rotation.T, 2, 2, 1)
    inverse, d_n = truncated_power(M, 0.95, -1.0)
    assert d_n == 2
    np.testing.assert_allclose(np.linalg.eigvalsh(inverse.flat()), [1.0 / 9.0, 1.0])
    np.testing.assert_allclose(truncated_inverse(M, InverseSpec(energy=0.95)).flat(), inverse.flat())


def test_regularized_precision_is_positive_semidefinite(rng):
    # n < pK leaves the sample covariance singular
    S = sample_cov(FunctionalPanel(rng.standard_normal((5, 3, 3))))
    for kappa in (1e-3, 0.01, 1.0):
        _, Theta = correlation_pair(S, kappa)
        assert np.linalg.eigvalsh(Theta.flat()).min() >= -1e-10


def test_correlation_blocks_are_contractions(rng, spd_kernel):
    for Sigma in (spd_kernel(p=4, K=3), sample_cov(FunctionalPanel(rng.standard_normal((6, 4, 3))))):
        C, _ = correlation_pair(Sigma, 0.01)
        for i in range(4):
            for j in range(4):
                assert np.linalg.norm(C.blocks[i, j], 2) <= 1 + 1e-10
