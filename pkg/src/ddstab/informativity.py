"""Decision procedures: what do the data license us to conclude?

Four questions about one dataset, each decided exactly (rank / subspace
tests) or via an LMI feasibility solve:

  * identification: is the consistent set a single system?
  * stabilization: does one gain stabilize every consistent system?
  * with a controllability prior: the same question restricted to
    controllable members; provably the same verdict as plain stabilization.
  * with a stabilizability prior: restricted to stabilizable members; on
    full-rank state data this again equals the plain verdict, on
    rank-deficient data it reduces to two checkable subspace conditions.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .data import DataMatrices, consistent_set, sample_consistent
from .errors import PreconditionError, SolverFailure
from .linalg import (DEFAULT_CONFIG, NumericalConfig, RowCompression,
                     numerical_rank, row_compress, subspace_contained)
from .synthesis import SolveStatus, solve_plain_lmi


class Branch(enum.Enum):
    FULL_RANK = "full_rank"
    RANK_DEFICIENT = "rank_deficient"


@dataclass(frozen=True)
class InformativityReport:
    rank_x_minus: int
    identification: bool
    stabilization: bool
    stabilization_controllability_prior: bool
    stabilization_stabilizability_prior: bool
    branch: Branch
    image_inclusion: bool
    input_rank_condition: bool
    diagnostics: dict = field(default_factory=dict)
    plain_theta: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "rank_x_minus": self.rank_x_minus,
            "identification": self.identification,
            "stabilization": self.stabilization,
            "stabilization_controllability_prior":
                self.stabilization_controllability_prior,
            "stabilization_stabilizability_prior":
                self.stabilization_stabilizability_prior,
            "branch": self.branch.value,
            "image_inclusion": self.image_inclusion,
            "input_rank_condition": self.input_rank_condition,
            "diagnostics": self.diagnostics,
        }


def check_identification(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG) -> bool:
    """True iff [X_minus; U_minus] has full row rank n+m (unique (A, B))."""
    return numerical_rank(D.stacked(), cfg) == D.n + D.m


def check_plain_stabilization(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG,
                              backend=None) -> tuple[bool, np.ndarray | None]:
    """LMI feasibility on the raw data; returns the witness Theta when feasible."""
    sol = solve_plain_lmi(D, cfg, backend)
    if sol.status is SolveStatus.SOLVER_FAILURE:
        raise SolverFailure("plain stabilization LMI solve broke down")
    return sol.feasible, sol.theta


def check_controllability_prior(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG,
                                backend=None) -> bool:
    """Controllability prior knowledge never changes the verdict; delegate."""
    verdict, _ = check_plain_stabilization(D, cfg, backend)
    return verdict


def check_image_inclusion(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG) -> bool:
    """col(X_plus) inside col(X_minus)."""
    return subspace_contained(D.x_plus, D.x_minus, cfg)


def check_input_rank(D: DataMatrices, comp: RowCompression,
                     cfg: NumericalConfig = DEFAULT_CONFIG) -> bool:
    """rank [X_minus; U_minus] = r + m.

    The stacked image always sits inside col(X_minus) x R^m, so equality of
    the two sets is just this dimension count. Only meaningful on
    rank-deficient state data.
    """
    if comp.r >= D.n:
        raise PreconditionError("input-rank condition applies only when rank X_minus < n")
    return numerical_rank(D.stacked(), cfg) == comp.r + D.m


def _rank_margin_diagnostics(M: np.ndarray, cfg: NumericalConfig) -> dict:
    """Flag singular values within two decades of the rank cutoff."""
    if M.size == 0 or not M.any():
        return {"marginal_rank": False, "singular_values": []}
    sv = np.linalg.svd(M, compute_uv=False)
    cutoff = cfg.rank_rel_tol * max(M.shape) * sv[0]
    marginal = bool(np.any((sv > cutoff / 100.0) & (sv < cutoff * 100.0)))
    return {"marginal_rank": marginal, "singular_values": sv.tolist()}


def check_stabilizability_prior(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG,
                                backend=None) -> InformativityReport:
    """Full report with the stabilizability-prior verdict and its ingredients.

    Verdicts presume the generating system actually satisfies the assumed
    prior knowledge, as prior knowledge must.
    """
    comp = row_compress(D.x_minus, D.x_plus, cfg)
    ident = check_identification(D, cfg)
    diagnostics: dict = {
        "n": D.n, "m": D.m, "T": D.T,
        "rank_stacked": numerical_rank(D.stacked(), cfg),
        "x_minus_rank_margin": _rank_margin_diagnostics(D.x_minus, cfg),
    }
    if comp.r == D.n:
        plain, theta = check_plain_stabilization(D, cfg, backend)
        image_ok = check_image_inclusion(D, cfg)  # trivially true at full rank
        input_ok = diagnostics["rank_stacked"] == D.n + D.m
        report = InformativityReport(
            rank_x_minus=comp.r,
            identification=ident,
            stabilization=plain,
            stabilization_controllability_prior=plain,
            stabilization_stabilizability_prior=plain,
            branch=Branch.FULL_RANK,
            image_inclusion=image_ok,
            input_rank_condition=input_ok,
            diagnostics=diagnostics,
            plain_theta=theta,
        )
    else:
        image_ok = check_image_inclusion(D, cfg)
        input_ok = check_input_rank(D, comp, cfg)
        proj_resid = _image_inclusion_residual(D)
        diagnostics["image_inclusion_residual"] = proj_resid
        report = InformativityReport(
            rank_x_minus=comp.r,
            identification=ident,
            stabilization=False,
            stabilization_controllability_prior=False,
            stabilization_stabilizability_prior=image_ok and input_ok,
            branch=Branch.RANK_DEFICIENT,
            image_inclusion=image_ok,
            input_rank_condition=input_ok,
            diagnostics=diagnostics,
        )
    return report


def _image_inclusion_residual(D: DataMatrices) -> float:
    if not D.x_plus.any():
        return 0.0
    if not D.x_minus.any():
        return float(np.linalg.norm(D.x_plus, 2))
    U, sv, _ = np.linalg.svd(D.x_minus)
    r = int(np.count_nonzero(sv > 1e-12 * sv[0] * max(D.x_minus.shape)))
    Q = U[:, :r]
    return float(np.linalg.norm(D.x_plus - Q @ (Q.T @ D.x_plus), 2))


def necessary_conditions_report(D: DataMatrices, cfg: NumericalConfig = DEFAULT_CONFIG,
                                n_samples: int = 10, seed: int = 0) -> dict:
    """Structural conditions any stabilizability-prior-informative dataset obeys.

    Checks the image inclusion and input-rank conditions, then invariance of
    col(X_minus) under A and containment of col(B), on the minimum-norm
    member and on ``n_samples`` random consistent members.
    """
    comp = row_compress(D.x_minus, D.x_plus, cfg)
    cs = consistent_set(D, cfg)
    rng = np.random.default_rng(seed)
    members = [cs.particular]
    for _ in range(n_samples):
        member = sample_consistent(cs, rng.normal(size=(D.n, cs.d)), False, cfg)
        members.append(member)
    invariance = [bool(subspace_contained(mem.A @ D.x_minus, D.x_minus, cfg))
                  for mem in members]
    containment = [bool(subspace_contained(mem.B, D.x_minus, cfg)) for mem in members]
    return {
        "image_inclusion": check_image_inclusion(D, cfg),
        "input_rank_condition": (check_input_rank(D, comp, cfg)
                                 if comp.r < D.n else True),
        "x_minus_invariant_under_A": invariance,
        "x_minus_contains_B_image": containment,
        "members_checked": len(members),
    }
