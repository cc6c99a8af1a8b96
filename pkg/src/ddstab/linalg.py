"""Dense matrix numerics shared by every other module.

Rank decisions, row compression, spectra, subspace inclusion, and the
system-theoretic predicates (Schur / controllable / stabilizable). All
functions are pure and operate on plain 2-D numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class NumericalConfig:
    """Tolerances that turn exact-arithmetic statements into float decisions.

    rank_rel_tol is scaled internally by max(rows, cols) of the matrix under
    test, so the effective singular-value cutoff is
    ``rank_rel_tol * max(shape) * sigma_max``.
    """

    rank_rel_tol: float = 1e-9
    subspace_tol: float = 1e-8
    schur_margin: float = 1e-6
    psd_margin: float = 1e-7
    equality_tol: float = 1e-8

    def __post_init__(self):
        for name in ("rank_rel_tol", "subspace_tol", "schur_margin",
                     "psd_margin", "equality_tol"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.schur_margin < 1.0:
            raise ValueError("schur_margin must be < 1")


DEFAULT_CONFIG = NumericalConfig()


@dataclass(frozen=True)
class RowCompression:
    """Orthogonal change of coordinates S sending X_minus to [X_hat_minus; 0].

    ``S`` is n x n orthogonal, ``r`` the numerical rank of X_minus,
    ``x_hat_minus`` the full-row-rank top block of S @ X_minus and
    ``x_hat_plus`` the first r rows of S @ X_plus.
    """

    S: np.ndarray
    r: int
    x_hat_minus: np.ndarray
    x_hat_plus: np.ndarray


def _rank_cutoff(sv: np.ndarray, shape: tuple[int, int], cfg: NumericalConfig) -> float:
    if sv.size == 0 or sv[0] == 0.0:
        return np.inf
    return cfg.rank_rel_tol * max(shape) * sv[0]


def numerical_rank(M: np.ndarray, cfg: NumericalConfig = DEFAULT_CONFIG) -> int:
    """Number of singular values above the relative cutoff (0 for a zero matrix)."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.count_nonzero(sv > _rank_cutoff(sv, M.shape, cfg)))


def row_compress(x_minus: np.ndarray, x_plus: np.ndarray,
                 cfg: NumericalConfig = DEFAULT_CONFIG) -> RowCompression:
    """Compress the state data: S @ x_minus = [x_hat_minus; ~0] with S orthogonal.

    Any nonsingular S satisfying the identity would do; an orthogonal one
    (left singular vectors of x_minus) keeps downstream products well
    conditioned. x_minus and x_plus must have equal shape.
    """
    x_minus = np.atleast_2d(np.asarray(x_minus, dtype=float))
    x_plus = np.atleast_2d(np.asarray(x_plus, dtype=float))
    if x_minus.shape != x_plus.shape:
        raise ValueError(f"shape mismatch: {x_minus.shape} vs {x_plus.shape}")
    n = x_minus.shape[0]
    if x_minus.size == 0 or not x_minus.any():
        return RowCompression(S=np.eye(n), r=0,
                              x_hat_minus=x_minus[:0],
                              x_hat_plus=x_plus[:0])
    U, sv, _ = np.linalg.svd(x_minus)
    r = int(np.count_nonzero(sv > _rank_cutoff(sv, x_minus.shape, cfg)))
    S = U.T.copy()
    # fix the sign ambiguity of the singular vectors so results are
    # deterministic: leading entry of each compressed row made positive
    compressed = S @ x_minus
    for i in range(n):
        row = compressed[i] if i < r else S[i]
        if row[np.argmax(np.abs(row))] < 0:
            S[i] = -S[i]
    return RowCompression(S=S, r=r,
                          x_hat_minus=S[:r] @ x_minus,
                          x_hat_plus=S[:r] @ x_plus)


def spectral_radius(M: np.ndarray) -> float:
    """max |eigenvalue|; 0.0 for the empty 0 x 0 matrix."""
    M = np.atleast_2d(M)
    if M.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def is_schur(M: np.ndarray, cfg: NumericalConfig = DEFAULT_CONFIG) -> bool:
    return spectral_radius(M) <= 1.0 - cfg.schur_margin


def controllability_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """[B, AB, ..., A^(n-1) B]."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    n = A.shape[0]
    blocks = []
    col = B
    for _ in range(n):
        blocks.append(col)
        col = A @ col
    if not blocks:
        return np.zeros((0, 0))
    return np.hstack(blocks)


def is_controllable(A: np.ndarray, B: np.ndarray,
                    cfg: NumericalConfig = DEFAULT_CONFIG) -> bool:
    n = np.atleast_2d(A).shape[0]
    if n == 0:
        return True
    return numerical_rank(controllability_matrix(A, B), cfg) == n


def is_stabilizable(A: np.ndarray, B: np.ndarray,
                    cfg: NumericalConfig = DEFAULT_CONFIG) -> bool:
    """Eigenvalue test: rank [A - lambda*I, B] = n at every |lambda| >= 1 - margin."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    if n == 0:
        return True
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - cfg.schur_margin:
            pencil = np.hstack([A - lam * np.eye(n), B.astype(complex)])
            if numerical_rank(pencil, cfg) < n:
                return False
    return True


def subspace_contained(M: np.ndarray, N: np.ndarray,
                       cfg: NumericalConfig = DEFAULT_CONFIG) -> bool:
    """True iff the column space of M lies in the column space of N.

    Decided by projecting M onto an orthonormal basis of col(N):
    ||(I - P_N) M|| <= subspace_tol * max(1, ||M||) in the spectral norm.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if M.shape[0] != N.shape[0]:
        raise ValueError("M and N must have the same number of rows")
    if M.size == 0 or not M.any():
        return True
    if N.size == 0 or not N.any():
        return False
    U, sv, _ = np.linalg.svd(N)
    r = int(np.count_nonzero(sv > _rank_cutoff(sv, N.shape, cfg)))
    Q = U[:, :r]
    resid = M - Q @ (Q.T @ M)
    return bool(np.linalg.norm(resid, 2) <= cfg.subspace_tol * max(1.0, np.linalg.norm(M, 2)))


def pinv(M: np.ndarray, cfg: NumericalConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Moore-Penrose pseudoinverse with the shared rank cutoff."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return M.T.copy()
    return np.linalg.pinv(M, rcond=cfg.rank_rel_tol * max(M.shape))


def matrix_exponential(M: np.ndarray) -> np.ndarray:
    """e^M (scaling-and-squaring Pade, via scipy)."""
    return scipy.linalg.expm(np.atleast_2d(np.asarray(M, dtype=float)))
