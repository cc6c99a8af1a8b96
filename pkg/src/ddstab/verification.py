"""Certify a candidate gain against the whole consistent family.

Sampling the affine family can only ever falsify ("Schur for all members"
is not decidable from finitely many draws), so a passing report is
evidence while a failing one is proof and carries the offending member.
The structural checks (nullity of the homogeneous directions on the
reachable subspace, block decomposition under the compression) are the
constructive complement: they hold exactly for gains produced by the
synthesis route.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ConsistentSet, DataMatrices, LtiSystem, consistency_residual, \
    reachable_part, sample_consistent
from .errors import PreconditionError, SolverFailure
from .linalg import (DEFAULT_CONFIG, NumericalConfig, RowCompression,
                     controllability_matrix, is_controllable, is_schur,
                     is_stabilizable, numerical_rank, spectral_radius,
                     subspace_contained)
from .sdp import AffineLmiFeasibility, BarrierBackend
from .synthesis import FeedbackGain, GainProvenance


@dataclass(frozen=True)
class VerificationReport:
    samples_tested: int
    rejected_unstabilizable: int
    max_spectral_radius: float
    worst_member: LtiSystem | None
    structural_residuals: list[float]
    passed: bool
    seed: int
    scales: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "samples_tested": self.samples_tested,
            "rejected_unstabilizable": self.rejected_unstabilizable,
            "max_spectral_radius": self.max_spectral_radius,
            "worst_member": None if self.worst_member is None else {
                "A": self.worst_member.A.tolist(),
                "B": self.worst_member.B.tolist(),
            },
            "max_structural_residual": (max(self.structural_residuals)
                                        if self.structural_residuals else 0.0),
            "passed": self.passed,
            "seed": self.seed,
            "scales": list(self.scales),
        }


@dataclass(frozen=True)
class LyapunovCertificate:
    P: np.ndarray
    decrease_margins: list[float]


def verify_gain(cs: ConsistentSet, gain: FeedbackGain, n_samples: int = 200,
                scales: tuple[float, ...] = (0.1, 1.0, 10.0), seed: int = 0,
                cfg: NumericalConfig = DEFAULT_CONFIG,
                compute_structural: bool = True) -> VerificationReport:
    """Spectral radii of A + B K over Gaussian draws from the consistent family.

    Gains carrying the stabilizability prior are only required to stabilize
    the stabilizable members, so non-stabilizable draws are rejected (and
    counted); plain gains face every member. Each draw owns its own RNG
    stream keyed by (seed, scale index, draw index), so the report is
    reproducible under any evaluation order.
    """
    filter_stabilizable = gain.provenance is GainProvenance.STAB_PRIOR
    n, d = cs.particular.n, cs.d
    tested = rejected = 0
    worst_rho, worst = -1.0, None
    structural: list[float] = []
    for i_scale, scale in enumerate(scales):
        for i_draw in range(n_samples):
            rng = np.random.default_rng((seed, i_scale, i_draw))
            W = scale * rng.normal(size=(n, d))
            member = sample_consistent(cs, W, filter_stabilizable, cfg)
            if member is None:
                rejected += 1
                continue
            tested += 1
            rho = spectral_radius(member.A + member.B @ gain.K)
            if rho > worst_rho:
                worst_rho, worst = rho, member
            if compute_structural:
                structural.append(structural_nullity(cs, gain, member, cfg))
    passed = worst_rho <= 1.0 - cfg.schur_margin
    return VerificationReport(samples_tested=tested,
                              rejected_unstabilizable=rejected,
                              max_spectral_radius=worst_rho,
                              worst_member=worst,
                              structural_residuals=structural,
                              passed=passed, seed=seed, scales=tuple(scales))


def structural_nullity(cs: ConsistentSet, gain: FeedbackGain, system: LtiSystem,
                       cfg: NumericalConfig = DEFAULT_CONFIG) -> float:
    """How far the homogeneous directions are from vanishing on the reachable span.

    For each basis column q = [a; b] of the homogeneous space, every
    direction (A0, B0) = (y a^T, y b^T) gives (A0 + B0 K) C = y (a^T + b^T K) C
    with C the controllability matrix of ``system``; the max row residual
    over basis columns, normalized by ||C||, is returned (0 means the
    whole family acts trivially on the reachable subspace).
    """
    C = controllability_matrix(system.A, system.B)
    c_norm = np.linalg.norm(C, 2)
    if c_norm == 0.0 or cs.d == 0:
        return 0.0
    n = cs.particular.n
    worst = 0.0
    for j in range(cs.d):
        q = cs.basis.Q[:, j]
        row = q[:n] + q[n:] @ gain.K
        worst = max(worst, float(np.linalg.norm(row @ C) / c_norm))
    return worst


@dataclass(frozen=True)
class DecompositionDiagnostics:
    a21_norm: float
    b2_norm: float
    a22_spectral_radius: float
    a22_schur: bool
    a11_b1_stabilizable: bool
    reachable_match_error: float
    ok: bool


def decomposition_check(D: DataMatrices, comp: RowCompression, system: LtiSystem,
                        cfg: NumericalConfig = DEFAULT_CONFIG) -> DecompositionDiagnostics:
    """Block-triangular structure of a stabilizable member under the compression.

    In the compressed coordinates a consistent stabilizable member must
    split into (A11, B1) shared with `reachable_part`, zero lower-left
    blocks, and a Schur autonomous block A22. Preconditions: the member is
    consistent and stabilizable, and (for rank-deficient data) the image
    inclusion and input-rank conditions hold.
    """
    if consistency_residual(D, system) > cfg.equality_tol * 10.0:
        raise PreconditionError("system is not consistent with the data")
    if not is_stabilizable(system.A, system.B, cfg):
        raise PreconditionError("system is not stabilizable")
    r, n = comp.r, D.n
    if r < n:
        if not subspace_contained(D.x_plus, D.x_minus, cfg):
            raise PreconditionError("image inclusion condition fails for this data")
        if numerical_rank(D.stacked(), cfg) != r + D.m:
            raise PreconditionError("input-rank condition fails for this data")
    A_c = comp.S @ system.A @ np.linalg.inv(comp.S)
    B_c = comp.S @ system.B
    A21, A22, B2 = A_c[r:, :r], A_c[r:, r:], B_c[r:, :]
    A11, B1 = A_c[:r, :r], B_c[:r, :]
    scale = max(1.0, np.linalg.norm(A_c, 2), np.linalg.norm(B_c, 2))
    tol = cfg.equality_tol * 10.0 * scale
    a21_norm = float(np.linalg.norm(A21, 2)) if A21.size else 0.0
    b2_norm = float(np.linalg.norm(B2, 2)) if B2.size else 0.0
    a22_schur = is_schur(A22, cfg)
    stab = is_stabilizable(A11, B1, cfg)
    if r < n:
        A11_data, B1_data = reachable_part(D, comp, cfg)
        match = float(np.linalg.norm(np.hstack([A11 - A11_data, B1 - B1_data]), 2)) \
            if r > 0 else 0.0
    else:
        match = 0.0
    ok = a21_norm <= tol and b2_norm <= tol and a22_schur and stab and match <= tol
    return DecompositionDiagnostics(a21_norm=a21_norm, b2_norm=b2_norm,
                                    a22_spectral_radius=spectral_radius(A22),
                                    a22_schur=a22_schur,
                                    a11_b1_stabilizable=stab,
                                    reachable_match_error=match, ok=ok)


def _symmetric_basis(n: int) -> np.ndarray:
    """Frobenius-orthonormal basis of symmetric n x n matrices, shape (d, n, n)."""
    basis = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        basis.append(E)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(E)
    return np.array(basis)


def common_lyapunov(systems: list[np.ndarray], cfg: NumericalConfig = DEFAULT_CONFIG,
                    backend=None) -> LyapunovCertificate | None:
    """One P > 0 with P - M P M^T > 0 for every closed-loop matrix M.

    Returns None when the joint feasibility problem has no solution at the
    configured margin. Raises SolverFailure on numerical breakdown.
    """
    backend = backend or BarrierBackend()
    mats = [np.atleast_2d(np.asarray(M, dtype=float)) for M in systems]
    if not mats:
        raise PreconditionError("need at least one closed-loop matrix")
    n = mats[0].shape[0]
    if any(M.shape != (n, n) for M in mats):
        raise PreconditionError("all closed-loop matrices must share one square shape")
    basis = _symmetric_basis(n)
    d = len(basis)
    blocks = [(np.zeros((n, n)), basis)]
    for M in mats:
        coeffs = np.array([E - M @ E @ M.T for E in basis])
        coeffs = 0.5 * (coeffs + np.transpose(coeffs, (0, 2, 1)))
        blocks.append((np.zeros((n, n)), coeffs))
    result = backend.solve(AffineLmiFeasibility(dim=d, blocks=tuple(blocks)))
    if not np.isfinite(result.t):
        raise SolverFailure("common Lyapunov solve returned a non-finite slack")
    if result.t < cfg.psd_margin:
        return None
    P = np.tensordot(result.x, basis, axes=1)
    P = 0.5 * (P + P.T)
    margins = [float(np.linalg.eigvalsh(P - M @ P @ M.T).min()) for M in mats]
    return LyapunovCertificate(P=P, decrease_margins=margins)


def genericity_probe(M: np.ndarray, N: np.ndarray, M0: np.ndarray, N0: np.ndarray,
                     alphas, cfg: NumericalConfig = DEFAULT_CONFIG) -> int:
    """Count alphas where (M + a*M0, N + a*N0) loses controllability.

    Along any line through a controllable pair the uncontrollable set is
    finite (at most n^2 points), so for generic probe values the count is 0.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if not is_controllable(M, N, cfg):
        raise PreconditionError("base pair must be controllable")
    return sum(1 for a in alphas
               if not is_controllable(M + a * np.asarray(M0), N + a * np.asarray(N0), cfg))
