"""Data models shared across the estimators.

Curves and kernels are stored as coefficients in one orthonormal basis, so a
kernel block's Hilbert-Schmidt norm is the Frobenius norm of its K x K
coefficient matrix and every functional matrix norm is a finite matrix norm.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.errors import InvalidArgumentError


def _frozen_array(values, name: str, ndim: int) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != ndim:
        raise InvalidArgumentError(f"{name} must have {ndim} dimensions, got shape {array.shape}")
    array.setflags(write=False)
    return array


class BasisKind(str, Enum):
    """Orthonormal basis families."""
    FOURIER = "fourier"
    BSPLINE = "bspline"


class NormKind(str, Enum):
    """Functional matrix norms of a KernelMatrix."""
    S1 = "S1"
    SINF = "Sinf"
    SF = "SF"
    SMAX = "Smax"
    L = "L"
    TRACE_DIAG = "trace-diag"


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Orthonormal basis of dimension K on [0, 1] with its quadrature grid.

    ``values[g, k]`` is the k-th basis function at ``grid[g]``; the columns are
    orthonormal under ``quad_weights``.
    """
    kind: BasisKind
    K: int
    grid: np.ndarray
    quad_weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", _frozen_array(self.grid, "grid", 1))
        object.__setattr__(self, "quad_weights", _frozen_array(self.quad_weights, "quad_weights", 1))
        object.__setattr__(self, "values", _frozen_array(self.values, "values", 2))

    @property
    def G(self) -> int:
        return len(self.grid)

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.quad_weights[:, None] * self.values)

    def same_as(self, other: "BasisSpec") -> bool:
        return (
            self.kind == other.kind
            and self.K == other.K
            and self.G == other.G
            and np.allclose(self.grid, other.grid)
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "K": self.K, "grid": self.grid.tolist()}


@dataclass(frozen=True, eq=False)
class Curve:
    """A single curve: K basis coefficients."""
    coeffs: np.ndarray
    basis: BasisSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen_array(self.coeffs, "coeffs", 1))
        if self.basis is not None and len(self.coeffs) != self.basis.K:
            raise InvalidArgumentError(
                f"curve has {len(self.coeffs)} coefficients but the basis has K={self.basis.K}"
            )


@dataclass(frozen=True, eq=False)
class FunctionalPanel:
    """n x p panel of curves stored as an (n, p, K) coefficient array."""
    coeffs: np.ndarray
    basis: BasisSpec | None = None
    projection_error: float = 0.0

    def __post_init__(self):
        coeffs = _frozen_array(self.coeffs, "coeffs", 3)
        if not np.all(np.isfinite(coeffs)):
            raise InvalidArgumentError("panel contains non-finite coefficients")
        if self.basis is not None and coeffs.shape[2] != self.basis.K:
            raise InvalidArgumentError(
                f"panel has K={coeffs.shape[2]} but the basis has K={self.basis.K}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def p(self) -> int:
        return self.coeffs.shape[1]

    @property
    def K(self) -> int:
        return self.coeffs.shape[2]

    def flat(self) -> np.ndarray:
        """(n, pK) matrix whose rows are the stacked coefficient vectors of y_t."""
        return self.coeffs.reshape(self.n, self.p * self.K)

    def window(self, start: int, stop: int) -> "FunctionalPanel":
        return FunctionalPanel(self.coeffs[start:stop], self.basis)

    def with_coeffs(self, coeffs: np.ndarray) -> "FunctionalPanel":
        return FunctionalPanel(coeffs, self.basis)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Operator-valued matrix: a (p_rows, p_cols, K, K) array of kernel blocks.

    ``blocks[i, j]`` holds the coefficients of Sigma_ij(u, v) in the tensor
    basis. The flattening maps row index (i, k) to i*K + k.
    """
    blocks: np.ndarray

    def __post_init__(self):
        blocks = _frozen_array(self.blocks, "blocks", 4)
        if blocks.shape[2] != blocks.shape[3]:
            raise InvalidArgumentError(f"kernel blocks must be square, got {blocks.shape[2:]}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def p_rows(self) -> int:
        return self.blocks.shape[0]

    @property
    def p_cols(self) -> int:
        return self.blocks.shape[1]

    @property
    def K(self) -> int:
        return self.blocks.shape[2]

    @property
    def is_square(self) -> bool:
        return self.p_rows == self.p_cols

    @classmethod
    def zeros(cls, p_rows: int, p_cols: int, K: int) -> "KernelMatrix":
        return cls(np.zeros((p_rows, p_cols, K, K)))

    @classmethod
    def identity(cls, p: int, K: int) -> "KernelMatrix":
        return cls.from_flat(np.eye(p * K), p, p, K)

    @classmethod
    def from_flat(cls, mat: np.ndarray, p_rows: int, p_cols: int, K: int) -> "KernelMatrix":
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (p_rows * K, p_cols * K):
            raise InvalidArgumentError(
                f"flat matrix of shape {mat.shape} does not match ({p_rows}x{K}, {p_cols}x{K})"
            )
        return cls(mat.reshape(p_rows, K, p_cols, K).transpose(0, 2, 1, 3))

    def flat(self) -> np.ndarray:
        return self.blocks.transpose(0, 2, 1, 3).reshape(self.p_rows * self.K, self.p_cols * self.K)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.blocks[i, j]

    def hs_norms(self) -> np.ndarray:
        """(p_rows, p_cols) table of block Hilbert-Schmidt norms."""
        return np.sqrt(np.einsum("ijkl,ijkl->ij", self.blocks, self.blocks))

    def transpose(self) -> "KernelMatrix":
        return KernelMatrix(self.blocks.transpose(1, 0, 3, 2))

    def symmetrized(self) -> "KernelMatrix":
        return KernelMatrix(0.5 * (self.blocks + self.blocks.transpose(1, 0, 3, 2)))

    def is_symmetric(self, tol: float = 1e-8) -> bool:
        if not self.is_square:
            return False
        scale = max(1.0, float(np.abs(self.blocks).max(initial=0.0)))
        gap = np.abs(self.blocks - self.blocks.transpose(1, 0, 3, 2)).max(initial=0.0)
        return bool(gap <= tol * scale)

    def diagonal(self) -> "KernelMatrix":
        """Block-diagonal part (off-diagonal blocks set to zero)."""
        out = np.zeros_like(self.blocks)
        idx = np.arange(min(self.p_rows, self.p_cols))
        out[idx, idx] = self.blocks[idx, idx]
        return KernelMatrix(out)

    def _check_shape(self, other: "KernelMatrix") -> None:
        if self.blocks.shape != other.blocks.shape:
            raise InvalidArgumentError(
                f"kernel shapes differ: {self.blocks.shape} vs {other.blocks.shape}"
            )

    def __add__(self, other: "KernelMatrix") -> "KernelMatrix":
        self._check_shape(other)
        return KernelMatrix(self.blocks + other.blocks)

    def __sub__(self, other: "KernelMatrix") -> "KernelMatrix":
        self._check_shape(other)
        return KernelMatrix(self.blocks - other.blocks)

    def __mul__(self, scalar: float) -> "KernelMatrix":
        return KernelMatrix(self.blocks * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "KernelMatrix":
        return KernelMatrix(-self.blocks)


@dataclass(frozen=True, eq=False)
class MercerDecomposition:
    """Leading eigenpairs of a covariance-role KernelMatrix."""
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # (m, p, K)

    def reconstruct(self) -> KernelMatrix:
        m, p, K = self.eigenfunctions.shape
        vectors = self.eigenfunctions.reshape(m, p * K)
        flat = (vectors.T * self.eigenvalues) @ vectors
        return KernelMatrix.from_flat(flat, p, p, K)


@dataclass
class LongPanel:
    """Grid samples read from a long-format CSV (t, series, u, value)."""
    samples: np.ndarray  # (n, p, G)
    grid: np.ndarray
    times: list = field(default_factory=list)
    series: list = field(default_factory=list)
