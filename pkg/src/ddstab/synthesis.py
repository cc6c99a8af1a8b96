"""Structured LMI feasibility problems and the feedback gains they certify.

Both synthesis routes share one template: find Theta (T x k) such that

    L @ Theta is symmetric  and  [[L Theta, P Theta], [(P Theta)^T, L Theta]] > 0,

where (L, P) = (X_minus, X_plus) for the no-prior route (k = n) and
(x_hat_minus, x_hat_plus) for the stabilizability-prior route (k = r).
Feasibility yields K = U_minus Theta (L Theta)^{-1} on the corresponding
coordinates.

The solve reduces the T*k unknowns to the image of V = [L; P]: the block
depends on Theta only through (G, H) = (L Theta, P Theta), whose columns
range over col(V). Working in an orthonormal basis of col(V) intersected
with the symmetry constraint keeps the problem at most 2k^2-dimensional
regardless of T and makes the maximized slack a scale-free margin.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import DataMatrices
from .errors import PreconditionError, SolverFailure
from .linalg import (DEFAULT_CONFIG, NumericalConfig, RowCompression,
                     numerical_rank, pinv, row_compress, subspace_contained)
from .sdp import AffineLmiFeasibility, BarrierBackend


class SolveStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    SOLVER_FAILURE = "solver_failure"


class GainProvenance(enum.Enum):
    PLAIN = "plain"
    STAB_PRIOR = "stabilizability_prior"


@dataclass(frozen=True)
class LmiFeasibilityProblem:
    """Solver-neutral statement of the block-PSD feasibility problem.

    ``diag_coeff`` (k x T) multiplies Theta into the diagonal blocks and
    carries the symmetry constraint; ``offdiag_coeff`` (k x T) fills the
    off-diagonal blocks. Objective: maximize the slack t with the assembled
    block >= t*I.
    """

    diag_coeff: np.ndarray
    offdiag_coeff: np.ndarray

    def __post_init__(self):
        if self.diag_coeff.shape != self.offdiag_coeff.shape:
            raise ValueError("coefficient matrices must have equal shapes")

    @property
    def var_rows(self) -> int:
        return self.diag_coeff.shape[1]

    @property
    def var_cols(self) -> int:
        return self.diag_coeff.shape[0]

    def assemble_block(self, theta: np.ndarray) -> np.ndarray:
        G = self.diag_coeff @ theta
        H = self.offdiag_coeff @ theta
        return np.block([[G, H], [H.T, G]])

    def symmetry_residual(self, theta: np.ndarray) -> float:
        G = self.diag_coeff @ theta
        return float(np.abs(G - G.T).max()) if G.size else 0.0


@dataclass(frozen=True)
class LmiSolution:
    theta: np.ndarray | None
    slack: float
    status: SolveStatus

    @property
    def feasible(self) -> bool:
        return self.status is SolveStatus.FEASIBLE


@dataclass(frozen=True)
class FeedbackGain:
    K: np.ndarray
    provenance: GainProvenance
    k2: np.ndarray | None = None
    k2_policy: str | None = None


def _symmetry_nullspace(QG: np.ndarray, k: int, rho: int) -> np.ndarray:
    """Orthonormal basis of {Z in R^(rho x k) : QG @ Z symmetric}, row-major vec."""
    n_constraints = k * (k - 1) // 2
    if n_constraints == 0:
        return np.eye(rho * k)
    C = np.zeros((n_constraints, rho * k))
    row = 0
    for i in range(k):
        for j in range(i + 1, k):
            for a in range(rho):
                C[row, a * k + j] += QG[i, a]
                C[row, a * k + i] -= QG[j, a]
            row += 1
    return scipy.linalg.null_space(C)


def sdp_solve(problem: LmiFeasibilityProblem,
              cfg: NumericalConfig = DEFAULT_CONFIG,
              backend=None) -> LmiSolution:
    """Maximize the block slack; Feasible iff the margin reaches psd_margin.

    A feasible Theta is returned scaled so the assembled block has minimum
    eigenvalue ~1 (the problem is homogeneous in Theta, so any positive
    scaling of a witness is a witness). ``slack`` reports the scale-free
    optimum on the normalized image ball, a conditioning measure in
    (0, sqrt(2)].
    """
    backend = backend or BarrierBackend()
    L, P = problem.diag_coeff, problem.offdiag_coeff
    k, T = L.shape
    if k == 0:
        return LmiSolution(theta=np.zeros((T, 0)), slack=np.inf, status=SolveStatus.FEASIBLE)
    V = np.vstack([L, P])
    U, sv, _ = np.linalg.svd(V)
    cutoff = cfg.rank_rel_tol * max(V.shape) * (sv[0] if sv.size else 0.0)
    rho = int(np.count_nonzero(sv > cutoff))
    if rho == 0:
        return LmiSolution(theta=None, slack=0.0, status=SolveStatus.INFEASIBLE)
    Qv = U[:, :rho]
    QG, QH = Qv[:k, :], Qv[k:, :]
    N = _symmetry_nullspace(QG, k, rho)
    d = N.shape[1]
    if d == 0:
        return LmiSolution(theta=None, slack=0.0, status=SolveStatus.INFEASIBLE)
    coeffs = np.zeros((d, 2 * k, 2 * k))
    for i in range(d):
        Z = N[:, i].reshape(rho, k)
        G, H = QG @ Z, QH @ Z
        blk = np.block([[G, H], [H.T, G]])
        coeffs[i] = 0.5 * (blk + blk.T)
    try:
        result = backend.solve(AffineLmiFeasibility(
            dim=d, blocks=((np.zeros((2 * k, 2 * k)), coeffs),)))
    except SolverFailure:
        return LmiSolution(theta=None, slack=float("nan"),
                           status=SolveStatus.SOLVER_FAILURE)
    if not np.isfinite(result.t):
        return LmiSolution(theta=None, slack=float("nan"),
                           status=SolveStatus.SOLVER_FAILURE)
    if result.t < cfg.psd_margin:
        return LmiSolution(theta=None, slack=max(result.t, 0.0),
                           status=SolveStatus.INFEASIBLE)
    Z = (N @ result.x).reshape(rho, k)
    theta = pinv(V, cfg) @ (Qv @ Z)
    # squeeze out the pinv round-off so L @ theta is symmetric to working precision
    G = L @ theta
    theta = theta - pinv(L, cfg) @ (0.5 * (G - G.T))
    theta = theta / result.t
    return LmiSolution(theta=theta, slack=result.t, status=SolveStatus.FEASIBLE)


def solve_plain_lmi(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG,
                    backend=None) -> LmiSolution:
    """Feasibility of the no-prior synthesis LMI on (X_minus, X_plus).

    Rank-deficient X_minus forces X_minus @ Theta singular, so the block can
    never be positive definite; that case short-circuits to Infeasible.
    """
    if numerical_rank(D.x_minus, cfg) < D.n:
        return LmiSolution(theta=None, slack=0.0, status=SolveStatus.INFEASIBLE)
    return sdp_solve(LmiFeasibilityProblem(diag_coeff=D.x_minus,
                                           offdiag_coeff=D.x_plus), cfg, backend)


def gain_from_plain(D: DataMatrices, sol: LmiSolution,
                    cfg: NumericalConfig = DEFAULT_CONFIG) -> FeedbackGain:
    """K = U_minus Theta (X_minus Theta)^{-1} from a feasible no-prior solve."""
    if not sol.feasible or sol.theta is None:
        raise PreconditionError("gain extraction needs a feasible solution")
    G = D.x_minus @ sol.theta
    if np.linalg.eigvalsh(0.5 * (G + G.T)).min() <= 0.0:
        raise PreconditionError("X_minus @ Theta is not positive definite")
    K = np.linalg.solve(G.T, (D.u_minus @ sol.theta).T).T
    return FeedbackGain(K=K, provenance=GainProvenance.PLAIN)


def solve_stab_lmi(D: DataMatrices, comp: RowCompression,
                   cfg: NumericalConfig = DEFAULT_CONFIG,
                   backend=None) -> LmiSolution:
    """Feasibility of the compressed LMI on (x_hat_minus, x_hat_plus), k = r."""
    return sdp_solve(LmiFeasibilityProblem(diag_coeff=comp.x_hat_minus,
                                           offdiag_coeff=comp.x_hat_plus), cfg, backend)


def synthesize_stab(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG,
                    k2_policy=None, backend=None,
                    comp: RowCompression | None = None) -> tuple[FeedbackGain, LmiSolution, RowCompression]:
    """Gain for the stabilizability-prior route: K = [K1 K2] @ S.

    K1 = U_minus Theta (x_hat_minus Theta)^{-1}; K2 acts only on the
    directions the data leave free and is arbitrary: ``k2_policy(m, n - r)``
    supplies it, default zeros.
    """
    comp = comp if comp is not None else row_compress(D.x_minus, D.x_plus, cfg)
    if comp.r < D.n:
        # the compressed LMI cannot see the discarded rows; the informativity
        # conditions are what make its gain valid for the whole family
        image_ok = subspace_contained(D.x_plus, D.x_minus, cfg)
        rank_ok = numerical_rank(D.stacked(), cfg) == comp.r + D.m
        if not (image_ok and rank_ok):
            raise PreconditionError(
                "data are not informative for stabilization under the "
                "stabilizability prior")
    sol = solve_stab_lmi(D, comp, cfg, backend)
    if sol.status is SolveStatus.SOLVER_FAILURE:
        raise SolverFailure("stabilizability-prior LMI solve broke down")
    if not sol.feasible:
        raise PreconditionError("stabilizability-prior LMI is infeasible for this data")
    r, n, m = comp.r, D.n, D.m
    if r == 0:
        K1 = np.zeros((m, 0))
    else:
        G = comp.x_hat_minus @ sol.theta
        K1 = np.linalg.solve(G.T, (D.u_minus @ sol.theta).T).T
    if k2_policy is None:
        K2, policy_name = np.zeros((m, n - r)), "zero"
    else:
        K2 = np.asarray(k2_policy(m, n - r), dtype=float).reshape(m, n - r)
        policy_name = getattr(k2_policy, "__name__", repr(k2_policy))
    K = np.hstack([K1, K2]) @ comp.S
    return FeedbackGain(K=K, provenance=GainProvenance.STAB_PRIOR,
                        k2=K2, k2_policy=policy_name), sol, comp


def problem_to_json(problem: LmiFeasibilityProblem) -> str:
    """Debug dump; floats use shortest round-trip decimal form."""
    payload = {
        "var_rows": problem.var_rows,
        "var_cols": problem.var_cols,
        "diag_coeff": problem.diag_coeff.tolist(),
        "offdiag_coeff": problem.offdiag_coeff.tolist(),
        "objective": "maximize slack t with assembled block >= t*I",
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def problem_from_json(text: str) -> LmiFeasibilityProblem:
    payload = json.loads(text)
    return LmiFeasibilityProblem(
        diag_coeff=np.array(payload["diag_coeff"], dtype=float),
        offdiag_coeff=np.array(payload["offdiag_coeff"], dtype=float))
