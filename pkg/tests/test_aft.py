import numpy as np
import pytest

from core.covariance import sample_cov
from core.errors import InvalidArgumentError
from core.models import FunctionalPanel, KernelMatrix
from estimators.aft import (
    ThresholdFamily,
    ThresholdRule,
    VarianceFactors,
    apply_aft,
    cv_select_C,
    functional_sparsity,
    shrinkage_multiplier,
    threshold_block,
    threshold_level,
    threshold_residuals,
    variance_factors,
)

FAMILIES = ["hard", "soft", "scad", "alasso"]


def test_threshold_level_formula():
    rule = ThresholdRule(C_dot=2.0)
    expected = 2.0 * (np.sqrt(np.log(50) / 100) + 1 / np.sqrt(50))
    assert threshold_level(rule, n=100, p=50) == pytest.approx(expected)


def test_threshold_level_needs_two_series():
    with pytest.raises(InvalidArgumentError):
        threshold_level(ThresholdRule(), n=10, p=1)


def test_family_parsing():
    assert ThresholdFamily.parse("adaptive-lasso") is ThresholdFamily.ADAPTIVE_LASSO
    assert ThresholdRule(family="scad").family is ThresholdFamily.SCAD
    with pytest.raises(InvalidArgumentError):
        ThresholdFamily.parse("garrote")


def test_rule_validation():
    with pytest.raises(InvalidArgumentError):
        ThresholdRule(C_dot=-1.0)
    with pytest.raises(InvalidArgumentError):
        ThresholdRule(scad_a=2.0)


def test_soft_multiplier_values():
    rule = ThresholdRule(family="soft")
    np.testing.assert_allclose(shrinkage_multiplier(np.array([0.5, 2.0, 4.0]), 1.0, rule), [0.0, 0.5, 0.75])


def test_scad_is_continuous_at_knots():
    rule = ThresholdRule(family="scad")
    lam, a = 1.0, rule.scad_a
    for knot in (2 * lam, a * lam):
        below = knot * shrinkage_multiplier(np.array([knot - 1e-9]), lam, rule)[0]
        above = knot * shrinkage_multiplier(np.array([knot + 1e-9]), lam, rule)[0]
        assert abs(below - above) < 1e-6


@pytest.mark.parametrize("family", FAMILIES)
def test_operator_class_axioms(family, rng):
    rule = ThresholdRule(family=family)
    lam, K = 0.7, 3
    c = {"hard": 2.0, "soft": 1.0, "scad": rule.scad_a / (rule.scad_a - 1.0), "alasso": 1.0 + rule.alasso_eta}[family]
    for _ in range(1000):
        Y = rng.standard_normal((K, K)) * rng.uniform(0.0, 2.0)
        D = rng.standard_normal((K, K))
        Z = Y + D * rng.uniform(0.0, lam) / np.linalg.norm(D)
        z = np.linalg.norm(Z)
        out = threshold_block(Z, lam, rule)

        # (ii) blocks at or below the level vanish
        if z <= lam:
            assert np.all(out == 0)
        # (iii) shrinkage moves a block by at most lambda
        assert np.linalg.norm(out - Z) <= lam + 1e-12
        # (i) bounded by any block within lambda; hard only away from the level
        if family == "hard" and lam < z <= 2 * lam:
            continue
        assert np.linalg.norm(out) <= c * np.linalg.norm(Y) + 1e-12


def _residual_panel(rng, n=60, p=5, K=3):
    return FunctionalPanel(rng.standard_normal((n, p, K)))


def test_zero_threshold_is_identity(rng):
    residuals = _residual_panel(rng)
    S = sample_cov(residuals)
    out = apply_aft(S, variance_factors(residuals, S), ThresholdRule(C_dot=0.0), residuals.n, residuals.p)
    np.testing.assert_array_equal(out.blocks, S.blocks)


def test_blocks_below_level_are_killed_and_diagonal_kept():
    p, K = 3, 2
    blocks = np.zeros((p, p, K, K))
    for i in range(p):
        blocks[i, i] = np.eye(K)
    blocks[0, 1] = blocks[1, 0] = 0.01 * np.eye(K)
    blocks[0, 2] = blocks[2, 0] = 5.0 * np.eye(K)
    S = KernelMatrix(blocks)
    vf = VarianceFactors(np.ones((p, p)))
    rule = ThresholdRule(family="hard", C_dot=1.0)
    out = apply_aft(S, vf, rule, n=100, p=p)
    assert np.all(out.blocks[0, 1] == 0)
    np.testing.assert_array_equal(out.blocks[0, 2], blocks[0, 2])
    for i in range(p):
        np.testing.assert_array_equal(out.blocks[i, i], blocks[i, i])


def test_diagonal_thresholding_is_optional():
    p, K = 2, 2
    S = KernelMatrix(np.einsum("ij,kl->ijkl", 1e-4 * np.eye(p), np.eye(K)))
    vf = VarianceFactors(np.ones((p, p)))
    rule = ThresholdRule(family="soft", C_dot=1.0)
    assert np.all(apply_aft(S, vf, rule, 50, p, threshold_diagonal=True).blocks == 0)
    np.testing.assert_array_equal(apply_aft(S, vf, rule, 50, p).blocks, S.blocks)


def test_zero_scale_gives_zero_block():
    assert np.all(threshold_block(np.ones((2, 2)), 0.1, ThresholdRule(), scale=0.0) == 0)


def test_universal_thresholding_ignores_variance_factors(rng):
    residuals = _residual_panel(rng)
    S = sample_cov(residuals)
    vf = variance_factors(residuals, S)
    universal = ThresholdRule(adaptive=False)
    expected = apply_aft(S, VarianceFactors(np.ones_like(vf.theta_iint)), ThresholdRule(), residuals.n, residuals.p)
    np.testing.assert_allclose(apply_aft(S, vf, universal, residuals.n, residuals.p).blocks, expected.blocks)


def test_variance_factors_match_grid_quadrature(rng, basis):
    for _ in range(50):
        p = int(rng.integers(1, 4))
        n = 8
        residuals = FunctionalPanel(rng.standard_normal((n, p, basis.K)), basis)
        S = sample_cov(residuals)
        theta = variance_factors(residuals, S).theta_iint

        a = residuals.coeffs @ basis.values.T                   # (n, p, G)
        w = basis.quad_weights
        second = np.einsum("tiu,tjv->ijuv", a**2, a**2) / n
        cov = np.einsum("tiu,tjv->ijuv", a, a) / n
        oracle = np.einsum("u,v,ijuv->ij", w, w, second - cov**2)
        np.testing.assert_allclose(theta, oracle, atol=1e-6)


def test_threshold_residuals_returns_raw_and_thresholded(rng):
    residuals = _residual_panel(rng)
    raw, thresholded = threshold_residuals(residuals, ThresholdRule(C_dot=1.0))
    np.testing.assert_allclose(raw.blocks, sample_cov(residuals).blocks)
    assert np.all(thresholded.hs_norms() <= raw.hs_norms() + 1e-12)


def test_cv_select_C_returns_grid_point(rng):
    residuals = _residual_panel(rng, n=60)
    grid = [0.0, 0.5, 1.0, 2.0]
    assert cv_select_C(residuals, "soft", folds=3, C_grid=grid) in grid
    assert cv_select_C(residuals, "soft", folds=3, C_grid=[0.7]) == 0.7


def test_cv_select_C_validates_folds(rng):
    residuals = _residual_panel(rng, n=10)
    with pytest.raises(InvalidArgumentError):
        cv_select_C(residuals, "soft", folds=1, C_grid=[0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        cv_select_C(residuals, "soft", folds=6, C_grid=[0.0, 1.0])


def test_functional_sparsity_of_block_diagonal():
    K = 3
    M = KernelMatrix.identity(4, K)
    assert functional_sparsity(M, 0.0) == pytest.approx(K)


def test_functional_sparsity_counts_nonzero_off_diagonals():
    K = 2
    blocks = np.einsum("ij,kl->ijkl", np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]]), np.eye(K))
    # traces are all K, so each nonzero block contributes K
    assert functional_sparsity(KernelMatrix(blocks), 0.0) == pytest.approx(2 * K)
    with pytest.raises(InvalidArgumentError):
        functional_sparsity(KernelMatrix(blocks), 1.0)


def test_single_series_is_returned_untouched(rng):
    residuals = _residual_panel(rng, n=30, p=1)
    S = sample_cov(residuals)
    vf = variance_factors(residuals, S)
    np.testing.assert_array_equal(apply_aft(S, vf, ThresholdRule(), residuals.n, 1).blocks, S.blocks)
    with pytest.raises(InvalidArgumentError):
        apply_aft(S, vf, ThresholdRule(), residuals.n, 1, threshold_diagonal=True)


def _paired_panel(rng, n=80, p=8, K=3):
    coeffs = rng.standard_normal((n, p, K))
    coeffs[:, 1] += 0.9 * coeffs[:, 0]
    coeffs[:, 3] += 0.4 * coeffs[:, 2]
    return FunctionalPanel(coeffs)


@pytest.mark.parametrize("family", FAMILIES)
def test_surviving_blocks_shrink_as_the_level_grows(family, rng):
    residuals = _paired_panel(rng)
    S = sample_cov(residuals)
    vf = variance_factors(residuals, S)
    off = ~np.eye(residuals.p, dtype=bool)
    kept = []
    for C in (0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0):
        out = apply_aft(S, vf, ThresholdRule(family=family, C_dot=C), residuals.n, residuals.p)
        kept.append(int(np.count_nonzero(out.hs_norms()[off])))
    assert kept == sorted(kept, reverse=True)
    assert kept[0] == off.sum()
    assert kept[-1] == 0


@pytest.mark.parametrize("family", FAMILIES)
def test_thresholding_keeps_symmetry(family, rng):
    residuals = _paired_panel(rng)
    S = sample_cov(residuals)
    out = apply_aft(S, variance_factors(residuals, S), ThresholdRule(family=family, C_dot=0.5), residuals.n, residuals.p)
    np.testing.assert_allclose(out.blocks, out.blocks.transpose(1, 0, 3, 2), atol=1e-12)


def test_cv_select_C_takes_first_of_tied_candidates(rng):
    residuals = _residual_panel(rng, n=60)
    # every candidate this large kills all off-diagonal blocks, so the losses tie
    assert cv_select_C(residuals, "soft", folds=3, C_grid=[50.0, 60.0, 70.0]) == 50.0
    with_duplicates = cv_select_C(residuals, "soft", folds=3, C_grid=[0.0, 0.5, 0.5, 1.0, 1.0])
    assert with_duplicates == cv_select_C(residuals, "soft", folds=3, C_grid=[0.0, 0.5, 1.0])


def test_cv_select_C_thresholds_a_sparse_truth(rng):
    n, p, K = 200, 15, 3
    coeffs = rng.standard_normal((n, p, K))
    coeffs[:, 1] += 2.0 * coeffs[:, 0]
    residuals = FunctionalPanel(coeffs)
    assert cv_select_C(residuals, "hard", folds=5, C_grid=[0.0, 0.5, 1.0, 2.0]) > 0
