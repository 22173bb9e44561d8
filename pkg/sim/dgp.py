"""Data-generating processes with analytic covariance matrix functions.

Curves are generated in a 50-dimensional Fourier basis and re-expressed in the
estimation basis through the shared quadrature. The true covariance matrix
functions are assembled in closed form from the stationary VAR covariances,
then projected the same way; ``GroundTruth.projection_remainder`` records the
part of the truth the estimation basis cannot represent.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from core.basis import kernel_norm, make_basis, transfer_matrix
from core.config import BASIS_CONFIG, SIM_CONFIG
from core.errors import DegenerateConfigError, InvalidArgumentError
from core.models import BasisKind, BasisSpec, FunctionalPanel, KernelMatrix
from estimators.aft import functional_sparsity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DgpConfig:
    """Simulation settings; ``K``, ``basis_kind`` and ``G`` describe the estimation basis."""
    dgp: int = 1
    p: int = 50
    n: int = 100
    r: int = 3
    alpha: float = 0.5
    seed: int = 0
    burn_in: int = SIM_CONFIG["burn_in"]
    n_factor_basis: int = SIM_CONFIG["n_factor_basis"]
    n_eps_basis: int = SIM_CONFIG["n_eps_basis"]
    K: int = BASIS_CONFIG["K"]
    basis_kind: str = BASIS_CONFIG["kind"]
    G: int = BASIS_CONFIG["G"]

    def __post_init__(self):
        if self.dgp not in (1, 2):
            raise InvalidArgumentError(f"dgp must be 1 or 2, got {self.dgp}", "sim")
        if self.r < 1:
            raise InvalidArgumentError(f"r must be at least 1, got {self.r}", "sim")
        if not 0 <= self.alpha <= 1:
            raise InvalidArgumentError(f"alpha must lie in [0, 1], got {self.alpha}", "sim")
        if self.p < 2 or self.n < 2:
            raise InvalidArgumentError(f"need p >= 2 and n >= 2, got p={self.p}, n={self.n}", "sim")
        if self.burn_in < 0:
            raise InvalidArgumentError("burn_in must be nonnegative", "sim")
        if not 1 <= self.n_eps_basis <= self.n_factor_basis:
            raise InvalidArgumentError("n_eps_basis must lie in [1, n_factor_basis]", "sim")
        if self.G < 2 * self.n_factor_basis + 1:
            raise InvalidArgumentError(
                f"G={self.G} cannot resolve the {self.n_factor_basis}-function generation basis", "sim"
            )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Analytic covariance matrix functions in the estimation basis."""
    Sigma_y_true: KernelMatrix
    Sigma_eps_true: KernelMatrix
    C_zeta: np.ndarray
    s_p_true: float
    projection_remainder: float
    B: np.ndarray | None = None             # DGP1 scalar loadings, p x r
    Sigma_f_true: KernelMatrix | None = None
    Q: np.ndarray | None = None             # DGP2 functional loadings, p x r x K
    Sigma_gamma: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def var_matrix(r: int, decay: float = SIM_CONFIG["var_decay"]) -> np.ndarray:
    """A_jk = decay^{|j-k|+1}."""
    idx = np.arange(r)
    A = decay ** (np.abs(idx[:, None] - idx[None, :]) + 1.0)
    radius = float(np.abs(np.linalg.eigvals(A)).max())
    if radius >= 1:
        raise DegenerateConfigError(f"VAR(1) is not stationary (spectral radius {radius:.3f})", "sim")
    return A


def simulate_var(A: np.ndarray, n: int, burn_in: int, innovation_sd: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent VAR(1) chains started at zero, one per column of ``innovation_sd``.

    Returns an (n, r, chains) array after dropping the burn-in.
    """
    r, chains = A.shape[0], len(innovation_sd)
    state = np.zeros((r, chains))
    out = np.empty((n, r, chains))
    for t in range(burn_in + n):
        state = A @ state + rng.standard_normal((r, chains)) * innovation_sd
        if t >= burn_in:
            out[t - burn_in] = state
    return out


def build_c0(
    p: int,
    alpha: float,
    rng: np.random.Generator,
    high: float = SIM_CONFIG["offdiag_high"],
    margin: float = SIM_CONFIG["pd_margin"],
) -> np.ndarray:
    """Sparse positive-definite correlation skeleton.

    Off-diagonals are Uniform[0, high], hard-thresholded at the smallest level
    that leaves at most p^{1-alpha} nonzeros per row (diagonal included), then
    the diagonal is shifted so the smallest eigenvalue is at least ``margin``.
    """
    upper = np.triu(rng.uniform(0.0, high, size=(p, p)), k=1)
    C = upper + upper.T + np.eye(p)

    allowed = int(np.floor(p ** (1.0 - alpha) + 1e-12)) - 1
    off = C - np.eye(p)
    if allowed < p - 1:
        ranked = -np.sort(-off, axis=1)           # row-wise descending, diagonal zero sorts last
        level = float(ranked[:, allowed].max())
        off = np.where(off > level, off, 0.0)
        if allowed >= 1 and not off.any():
            raise DegenerateConfigError(f"alpha={alpha} leaves no off-diagonal support for p={p}", "sim")
    C_thr = off + np.eye(p)

    delta = max(-float(np.linalg.eigvalsh(C_thr)[0]), 0.0) + margin
    return C_thr + delta * np.eye(p)


def _fourier_source(config: DgpConfig) -> tuple[BasisSpec, BasisSpec, np.ndarray]:
    source = make_basis(BasisKind.FOURIER, config.n_factor_basis, config.G)
    target = make_basis(config.basis_kind, config.K, config.G)
    return source, target, transfer_matrix(source, target)


def _kron_kernel(outer: np.ndarray, inner: np.ndarray) -> KernelMatrix:
    """Kernel matrix whose (i, j) block is outer[i, j] * inner."""
    return KernelMatrix(np.einsum("ij,kl->ijkl", outer, inner))


def generate(config: DgpConfig, rng: np.random.Generator | None = None) -> tuple[FunctionalPanel, GroundTruth]:
    """Simulate a panel from DGP1 or DGP2 together with its analytic truth.

    Args:
        config: Simulation settings.
        rng: Random generator; defaults to ``default_rng(config.seed)``.

    Returns:
        (panel in the estimation basis, ground truth in the same basis)
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    p, n, r, M, L = config.p, config.n, config.r, config.n_factor_basis, config.n_eps_basis
    _, target, P = _fourier_source(config)
    A = var_matrix(r)
    index = np.arange(1, M + 1, dtype=float)

    # idiosyncratic part, shared by both processes
    C0 = build_c0(p, config.alpha, rng)
    D = rng.gamma(SIM_CONFIG["gamma_shape"], SIM_CONFIG["gamma_scale"], size=p)
    root = SIM_CONFIG["eps_scale"] * np.sqrt(D)             # D_i are the relative idiosyncratic variances
    C_zeta = root[:, None] * C0 * root[None, :]
    eps_decay = np.zeros(M)
    eps_decay[:L] = 2.0 ** (-index[:L])
    chol = linalg.cholesky(C_zeta, lower=True)
    psi = np.einsum("ij,tjl->til", chol, rng.standard_normal((n, p, L)))
    eps = np.zeros((n, p, M))
    eps[:, :, :L] = psi * np.sqrt(eps_decay[:L])

    Sigma_eps = _kron_kernel(C_zeta, (P * eps_decay) @ P.T)
    eps_sq = np.sum(C_zeta**2) * np.sum(eps_decay**2)

    if config.dgp == 1:
        B = rng.uniform(-SIM_CONFIG["loading_bound"], SIM_CONFIG["loading_bound"], size=(p, r))
        xi = simulate_var(A, n, config.burn_in, 1.0 / index, rng)        # (n, r, M)
        common = np.einsum("ia,tam->tim", B, xi)

        Sigma_1 = linalg.solve_discrete_lyapunov(A, np.eye(r))
        f_decay = index**-2.0
        F_proj = (P * f_decay) @ P.T
        G1 = B @ Sigma_1 @ B.T
        common_kernel = _kron_kernel(G1, F_proj)
        common_sq = np.sum(G1**2) * np.sum(f_decay**2)
        cross = np.sum(G1 * C_zeta) * np.sum(f_decay * eps_decay)
        extras = {"B": B, "Sigma_f_true": _kron_kernel(Sigma_1, F_proj)}
    else:
        Qc = rng.normal(0.0, SIM_CONFIG["q_sd"], size=(p, r, M)) / index     # (p, r, M)
        gamma = simulate_var(A, n, config.burn_in, np.ones(1), rng)[:, :, 0]
        common = np.einsum("iam,ta->tim", Qc, gamma)

        Sigma_gamma = linalg.solve_discrete_lyapunov(A, np.eye(r))
        Q_proj = Qc @ P.T                                                   # (p, r, K)
        common_kernel = KernelMatrix(np.einsum("ab,iak,jbl->ijkl", Sigma_gamma, Q_proj, Q_proj))
        gram = np.einsum("iak,ibk->ab", Qc, Qc)
        common_sq = np.trace(Sigma_gamma @ gram @ Sigma_gamma @ gram)
        eps_on_q = np.einsum("ij,k,jbk->ibk", C_zeta, eps_decay, Qc)
        cross = np.einsum("ab,iak,ibk->", Sigma_gamma, Qc, eps_on_q)
        extras = {"Q": Q_proj, "Sigma_gamma": Sigma_gamma}

    panel = FunctionalPanel((common + eps) @ P.T, target)
    Sigma_y = (common_kernel + Sigma_eps).symmetrized()
    full_sq = common_sq + 2.0 * cross + eps_sq
    remainder = float(np.sqrt(max(full_sq - kernel_norm(Sigma_y, "SF") ** 2, 0.0)))

    truth = GroundTruth(
        Sigma_y_true=Sigma_y,
        Sigma_eps_true=Sigma_eps,
        C_zeta=C_zeta,
        s_p_true=functional_sparsity(Sigma_eps, 0.0),
        projection_remainder=remainder,
        extra={"C0": C0},
        **extras,
    )
    logger.debug(
        "generated DGP%d p=%d n=%d r=%d alpha=%.2f (projection remainder %.3e)",
        config.dgp, p, n, r, config.alpha, remainder,
    )
    return panel, truth


def loss(estimate: KernelMatrix, truth: KernelMatrix, which: str = "SF") -> float:
    """Functional matrix norm of estimate - truth; ``which`` is Smax, SF or S1."""
    if which not in ("Smax", "SF", "S1"):
        raise InvalidArgumentError(f"loss norm must be Smax, SF or S1, got {which!r}", "sim")
    if estimate.blocks.shape != truth.blocks.shape:
        raise InvalidArgumentError(
            f"estimate {estimate.blocks.shape} and truth {truth.blocks.shape} differ in shape", "sim"
        )
    return float(kernel_norm(estimate - truth, which))
