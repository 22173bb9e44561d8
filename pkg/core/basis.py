"""Orthonormal-basis representation of curves and operator-valued matrices.

All functional objects live in the coefficient space of one ``BasisSpec``.
Because the basis is orthonormal under the stored quadrature, inner products,
Hilbert-Schmidt norms and kernel actions reduce to finite linear algebra; the
quadrature itself is only used when projecting grid samples or evaluating
coefficients back on the grid.
"""

import logging

import numpy as np
from scipy import linalg
from scipy.interpolate import BSpline

from core.config import ORTHONORMALITY_TOL, SYMMETRY_TOL
from core.errors import InvalidArgumentError, NumericalError
from core.models import (
    BasisKind,
    BasisSpec,
    Curve,
    FunctionalPanel,
    KernelMatrix,
    MercerDecomposition,
    NormKind,
)

logger = logging.getLogger(__name__)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    """Composite trapezoid weights on a strictly increasing grid."""
    widths = np.diff(grid)
    weights = np.zeros(len(grid))
    weights[:-1] += widths / 2
    weights[1:] += widths / 2
    return weights


def _fourier_values(grid: np.ndarray, K: int) -> np.ndarray:
    values = np.empty((len(grid), K))
    values[:, 0] = 1.0
    for j in range(1, K):
        k = (j + 1) // 2
        trig = np.cos if j % 2 == 1 else np.sin
        values[:, j] = np.sqrt(2.0) * trig(2 * np.pi * k * grid)
    return values


def _bspline_values(grid: np.ndarray, K: int) -> np.ndarray:
    degree = min(3, K - 1)
    interior = np.linspace(0.0, 1.0, K - degree + 1)[1:-1]
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    spline = BSpline(knots, np.eye(K), degree, extrapolate=True)
    return spline(grid)


def _orthonormalize(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Gram-Schmidt against the quadrature, done through a Cholesky factor."""
    gram = values.T @ (weights[:, None] * values)
    try:
        chol = linalg.cholesky(gram, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"basis Gram matrix is not positive definite: {exc}", "basis") from exc
    return linalg.solve_triangular(chol, values.T, lower=True).T


def basis_from_grid(kind: BasisKind | str, K: int, grid) -> BasisSpec:
    """Build an orthonormal basis on an explicit grid spanning [0, 1]."""
    try:
        kind = BasisKind(kind)
    except ValueError as exc:
        raise InvalidArgumentError(f"unknown basis kind: {kind!r}", "basis") from exc
    grid = np.asarray(grid, dtype=float)
    if K <= 0:
        raise InvalidArgumentError(f"basis dimension must be positive, got K={K}", "basis")
    if grid.ndim != 1 or len(grid) < 2 * K + 1:
        raise InvalidArgumentError(
            f"grid of {grid.size} points is too coarse for K={K} (need at least {2 * K + 1})", "basis"
        )
    if np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("grid must be strictly increasing", "basis")
    if not (np.isclose(grid[0], 0.0) and np.isclose(grid[-1], 1.0)):
        raise InvalidArgumentError("grid must span [0, 1]", "basis")

    weights = trapezoid_weights(grid)
    if kind is BasisKind.FOURIER:
        values = _fourier_values(grid, K)
    else:
        values = _orthonormalize(_bspline_values(grid, K), weights)

    spec = BasisSpec(kind=kind, K=K, grid=grid, quad_weights=weights, values=values)
    gap = np.abs(spec.gram() - np.eye(K)).max()
    if gap > ORTHONORMALITY_TOL:
        raise NumericalError(f"basis is not orthonormal on the grid (max |Gram - I| = {gap:.2e})", "basis")
    return spec


def make_basis(kind: BasisKind | str, K: int, G: int) -> BasisSpec:
    """Orthonormal basis of dimension K on an equispaced grid of G points in [0, 1]."""
    if K <= 0:
        raise InvalidArgumentError(f"basis dimension must be positive, got K={K}", "basis")
    if G < 2 * K + 1:
        raise InvalidArgumentError(f"G={G} is too small for K={K} (need G >= {2 * K + 1})", "basis")
    return basis_from_grid(kind, K, np.linspace(0.0, 1.0, G))


def basis_from_dict(payload: dict) -> BasisSpec:
    """Inverse of ``BasisSpec.to_dict``: {kind, K, grid} or {kind, K, G}."""
    try:
        kind, K = payload["kind"], int(payload["K"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"basis spec needs 'kind' and 'K': {exc}", "basis") from exc
    if "grid" in payload:
        return basis_from_grid(kind, K, payload["grid"])
    return make_basis(kind, K, int(payload.get("G", 2 * K + 1)))


def project(grid_samples: np.ndarray, spec: BasisSpec, grid: np.ndarray | None = None) -> FunctionalPanel:
    """Project (n, p, G) grid samples onto the basis.

    The root mean integrated squared reconstruction error is stored on the
    returned panel as ``projection_error``.
    """
    samples = np.asarray(grid_samples, dtype=float)
    if samples.ndim != 3 or samples.shape[2] != spec.G:
        raise InvalidArgumentError(
            f"samples of shape {samples.shape} do not match a grid of {spec.G} points", "basis"
        )
    if grid is not None and (len(grid) != spec.G or not np.allclose(grid, spec.grid)):
        raise InvalidArgumentError("sample grid does not match the basis grid", "basis")

    coeffs = samples @ (spec.quad_weights[:, None] * spec.values)
    residual = samples - coeffs @ spec.values.T
    error = float(np.sqrt(np.mean(residual**2 @ spec.quad_weights))) if samples.size else 0.0
    logger.debug("projected %s samples onto %s K=%d (rmise %.3e)", samples.shape, spec.kind.value, spec.K, error)
    return FunctionalPanel(coeffs, spec, projection_error=error)


def evaluate(coeffs: np.ndarray, spec: BasisSpec) -> np.ndarray:
    """Evaluate coefficient arrays (..., K) on the basis grid, giving (..., G)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != spec.K:
        raise InvalidArgumentError(f"coefficients end in {coeffs.shape[-1]}, basis has K={spec.K}", "basis")
    return coeffs @ spec.values.T


def transfer_matrix(source: BasisSpec, target: BasisSpec) -> np.ndarray:
    """(K_target, K_source) coefficients of each source function in the target basis."""
    if source.G != target.G or not np.allclose(source.grid, target.grid):
        raise InvalidArgumentError("bases must share the quadrature grid", "basis")
    return target.values.T @ (target.quad_weights[:, None] * source.values)


def inner_product(f: Curve | np.ndarray, g: Curve | np.ndarray) -> float:
    """L2 inner product of two curves (or p x K vector functions)."""
    if isinstance(f, Curve) and isinstance(g, Curve):
        if f.basis is not None and g.basis is not None and not f.basis.same_as(g.basis):
            raise InvalidArgumentError("curves are expressed in different bases", "basis")
        f, g = f.coeffs, g.coeffs
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise InvalidArgumentError(f"dimension mismatch: {f.shape} vs {g.shape}", "basis")
    return float(np.vdot(f, g))


def kernel_norm(M: KernelMatrix, which: NormKind | str) -> float | np.ndarray:
    """Functional matrix norms; ``trace-diag`` returns the vector of trace norms."""
    try:
        which = NormKind(which)
    except ValueError as exc:
        raise InvalidArgumentError(f"unknown norm tag: {which!r}", "basis") from exc

    if which is NormKind.TRACE_DIAG:
        if not M.is_square:
            raise InvalidArgumentError("trace-diag needs a square kernel matrix", "basis")
        idx = np.arange(M.p_rows)
        return np.trace(M.blocks[idx, idx], axis1=1, axis2=2)
    if which is NormKind.L:
        if M.blocks.size == 0:
            return 0.0
        return float(np.linalg.norm(M.flat(), 2))

    hs = M.hs_norms()
    if hs.size == 0:
        return 0.0
    if which is NormKind.S1:
        return float(hs.sum(axis=0).max())
    if which is NormKind.SINF:
        return float(hs.sum(axis=1).max())
    if which is NormKind.SF:
        return float(np.sqrt((hs**2).sum()))
    return float(hs.max())


def sign_fix(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    vectors = np.array(vectors, dtype=float)
    if vectors.size == 0:
        return vectors
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def symmetric_eigh(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix, descending, sign-fixed."""
    values, vectors = linalg.eigh(0.5 * (mat + mat.T))
    order = np.argsort(values)[::-1]
    return values[order], sign_fix(vectors[:, order])


def mercer_eigen(M: KernelMatrix, m: int) -> MercerDecomposition:
    """Leading m eigenpairs of the pK x pK flattening of a symmetric kernel matrix."""
    if not M.is_symmetric(SYMMETRY_TOL):
        raise InvalidArgumentError("Mercer decomposition needs a symmetric kernel matrix", "basis")
    size = M.p_rows * M.K
    if not 0 <= m <= size:
        raise InvalidArgumentError(f"m={m} must lie in [0, {size}]", "basis")
    values, vectors = symmetric_eigh(M.flat())
    functions = vectors[:, :m].T.reshape(m, M.p_rows, M.K)
    return MercerDecomposition(eigenvalues=values[:m], eigenfunctions=functions)


def apply_kernel(M: KernelMatrix, x: np.ndarray) -> np.ndarray:
    """Action of the integral operator on a (p_cols, K) vector function."""
    x = np.asarray(x, dtype=float)
    if x.shape != (M.p_cols, M.K):
        raise InvalidArgumentError(f"argument of shape {x.shape} does not match ({M.p_cols}, {M.K})", "basis")
    return np.einsum("ijkl,jl->ik", M.blocks, x)
