import numpy as np
import pytest

from core.covariance import center, sample_cov
from core.errors import InvalidArgumentError
from core.models import FunctionalPanel, KernelMatrix


def test_center_removes_time_mean(rng, basis):
    panel = FunctionalPanel(rng.standard_normal((10, 3, basis.K)) + 5.0, basis)
    np.testing.assert_allclose(center(panel).coeffs.mean(axis=0), 0.0, atol=1e-12)


def test_center_needs_two_observations(basis):
    with pytest.raises(InvalidArgumentError):
        center(FunctionalPanel(np.zeros((1, 2, basis.K)), basis))


def test_sample_cov_is_flat_outer_product(random_panel):
    S = sample_cov(random_panel)
    Y = random_panel.flat()
    np.testing.assert_allclose(S.flat(), Y.T @ Y / random_panel.n, atol=1e-12)
    assert S.is_symmetric()


def test_sample_cov_accepts_raw_arrays(rng):
    coeffs = rng.standard_normal((6, 2, 3))
    assert sample_cov(coeffs).blocks.shape == (2, 2, 3, 3)
    with pytest.raises(InvalidArgumentError):
        sample_cov(coeffs[0])


def test_sample_cov_matches_grid_covariance(random_panel, basis):
    S = sample_cov(random_panel)
    grid_values = random_panel.coeffs @ basis.values.T        # (n, p, G)
    oracle = np.einsum("tiu,tjv->ijuv", grid_values, grid_values) / random_panel.n
    recon = np.einsum("uk,ijkl,vl->ijuv", basis.values, S.blocks, basis.values)
    np.testing.assert_allclose(recon, oracle, atol=1e-10)


def test_kernel_arithmetic_and_shape_checks(spd_kernel):
    A = spd_kernel(p=2, K=2)
    np.testing.assert_allclose((A + A - 2 * A).blocks, 0.0, atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        A + KernelMatrix.zeros(3, 3, 2)


def test_diagonal_part_keeps_only_diagonal_blocks(spd_kernel):
    D = spd_kernel(p=3, K=2).diagonal()
    off = ~np.eye(3, dtype=bool)
    assert np.all(D.hs_norms()[off] == 0)
