"""Small dense semidefinite feasibility solves behind a pluggable backend.

The shared problem shape is

    maximize  t
    s.t.      F_j(x) = C_j + sum_i x_i G_{j,i}  >=  t * I   for every block j,
              ||x|| <= 1,

with symmetric C_j, G_{j,i}. The norm ball makes the value finite: the
feasibility questions handled here are homogeneous in x (all C_j = 0), so
without it the slack could be scaled arbitrarily. With coefficient matrices
built from orthonormal bases the optimal ``t`` is a scale-free margin in
[0, sqrt(2)] and the verdict "t >= psd_margin" does not depend on the
scaling of the raw data.

The built-in backend is a log-det barrier path-following method. Problems
here are tiny (a few dozen unknowns, blocks of order <= 2n), so a dense
Newton iteration is both faster and lighter than an external conic solver;
a cvxpy-based backend is provided for cross-checking when cvxpy is
installed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SolverFailure


@dataclass(frozen=True)
class AffineLmiFeasibility:
    """One PSD block per entry: (constant C, coefficients G of shape (d, s, s))."""

    dim: int
    blocks: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        for C, G in self.blocks:
            if G.shape[0] != self.dim or C.shape != G.shape[1:]:
                raise ValueError("inconsistent block shapes")


@dataclass(frozen=True)
class BackendResult:
    """Certified slack lower bound and the maximizing point."""

    t: float
    x: np.ndarray


class BarrierBackend:
    """Interior-point solve of the slack-maximization problem.

    Follows the central path of
        -mu*t - sum_j logdet(F_j(x) - t I) - log(1 - x.x)
    with damped Newton steps, tightening mu until the barrier duality gap
    is below ``gap_tol``. Deterministic: no randomness, fixed schedule.
    """

    def __init__(self, gap_tol: float = 1e-9, mu0: float = 1.0,
                 mu_factor: float = 100.0, max_newton: int = 400):
        self.gap_tol = gap_tol
        self.mu0 = mu0
        self.mu_factor = mu_factor
        self.max_newton = max_newton

    @staticmethod
    def _newton_step(H: np.ndarray, g: np.ndarray, d: int) -> tuple[np.ndarray, float]:
        """Descent direction for the (mathematically PD) Newton system.

        Near the central path's endgame the Hessian condition number can
        exceed 1/eps; escalating Tikhonov jitter keeps the factorization
        alive and every jittered step is still descent.
        """
        Hs = 0.5 * (H + H.T)
        scale = max(np.trace(Hs) / (d + 1), 1.0)
        for jitter in (0.0, 1e-14, 1e-11, 1e-8, 1e-5):
            try:
                factor = scipy.linalg.cho_factor(Hs + jitter * scale * np.eye(d + 1))
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                continue
            step = -scipy.linalg.cho_solve(factor, g)
            decrement = float(-g @ step)
            if np.isfinite(decrement) and (decrement >= 0 or jitter > 0):
                return step, decrement
        raise SolverFailure("could not factor the Newton system")

    def solve(self, problem: AffineLmiFeasibility) -> BackendResult:
        d = problem.dim
        blocks = [(np.asarray(C, dtype=float), np.asarray(G, dtype=float))
                  for C, G in problem.blocks]
        if not blocks:
            return BackendResult(t=np.inf, x=np.zeros(d))
        t0 = min(np.linalg.eigvalsh(C).min() for C, _ in blocks) - 1.0
        if d == 0:
            return BackendResult(t=t0 + 1.0, x=np.zeros(0))

        flats = [(C, G.reshape(d, -1)) for C, G in blocks]

        def chol_all(x, t):
            """Cholesky factors of every block, or None outside the domain."""
            if x @ x >= 1.0:
                return None
            chs = []
            for C, Gf in flats:
                s = C.shape[0]
                M = C + (x @ Gf).reshape(s, s)
                M.flat[:: s + 1] -= t
                try:
                    chs.append(np.linalg.cholesky(M))
                except np.linalg.LinAlgError:
                    return None
            return chs

        def barrier_value(x, t, mu, chs):
            val = -mu * t - np.log(1.0 - x @ x)
            for L in chs:
                val -= 2.0 * np.log(L.diagonal()).sum()
            return val

        nu = sum(C.shape[0] for C, _ in blocks) + 2.0
        x, t = np.zeros(d), t0
        chs = chol_all(x, t)
        if chs is None:
            raise SolverFailure("could not construct a strictly feasible start")
        mu = self.mu0
        newton_left = self.max_newton
        last_stage = nu / mu < self.gap_tol
        while True:
            # center for the current mu; loose tolerance except on the last stage
            inner_tol = 1e-9 if last_stage else 0.25
            while newton_left > 0:
                newton_left -= 1
                val = barrier_value(x, t, mu, chs)
                g = np.zeros(d + 1)
                H = np.zeros((d + 1, d + 1))
                g[d] -= mu
                for (C, G), L in zip(blocks, chs):
                    s = C.shape[0]
                    Minv = scipy.linalg.cho_solve((L, True), np.eye(s))
                    V = G @ Minv
                    W = Minv @ Minv
                    g[:d] -= np.einsum("iaa->i", V)
                    g[d] += np.trace(Minv)
                    Vm = V.reshape(d, s * s)
                    VTm = np.transpose(V, (0, 2, 1)).reshape(d, s * s)
                    H[:d, :d] += Vm @ VTm.T
                    H[:d, d] -= G.reshape(d, s * s) @ W.T.ravel()
                    H[d, d] += np.trace(W)
                H[d, :d] = H[:d, d]
                q = 1.0 - x @ x
                g[:d] += 2.0 * x / q
                H[:d, :d] += 2.0 * np.eye(d) / q + 4.0 * np.outer(x, x) / q**2
                step, decrement = self._newton_step(H, g, d)
                if not np.isfinite(decrement):
                    raise SolverFailure("non-finite Newton step")
                if decrement / 2.0 <= inner_tol:
                    # includes tiny negative values: centered to rounding noise
                    break
                # full step when it works, else the short step 1/(1+lambda)
                # that self-concordance guarantees feasible, then halve
                alpha, moved = 1.0, False
                short = 1.0 / (1.0 + np.sqrt(max(decrement, 0.0)))
                while alpha > 1e-14:
                    xn, tn = x + alpha * step[:d], t + alpha * step[d]
                    chn = chol_all(xn, tn)
                    if chn is not None and \
                            barrier_value(xn, tn, mu, chn) <= val + 0.01 * alpha * (g @ step):
                        x, t, chs = xn, tn, chn
                        moved = True
                        break
                    alpha = short if alpha > short else alpha * 0.5
                if not moved:
                    break  # at numerical precision for this stage
            if last_stage:
                break
            if newton_left <= 0:
                raise SolverFailure("Newton iteration budget exhausted")
            mu *= self.mu_factor
            last_stage = nu / mu < self.gap_tol
        # report the slack actually achieved at the final iterate
        achieved = min(
            float(np.linalg.eigvalsh(C + (x @ Gf).reshape(C.shape)).min())
            for C, Gf in flats)
        return BackendResult(t=achieved, x=x)


class CvxpyBackend:
    """Same contract, modeled through cvxpy (for cross-checks and larger sizes).

    The reported slack is recomputed at the returned point rather than taken
    from the solver objective, so it is a certified lower bound exactly like
    the built-in backend's (solver feasibility tolerances can otherwise
    overstate the objective on marginal problems).
    """

    def __init__(self, solver: str = "CLARABEL"):
        self.solver = solver

    def solve(self, problem: AffineLmiFeasibility) -> BackendResult:
        try:
            import cvxpy as cp
        except ImportError as exc:  # pragma: no cover
            raise SolverFailure("cvxpy is not installed") from exc
        d = problem.dim
        if not problem.blocks:
            return BackendResult(t=np.inf, x=np.zeros(d))
        if d == 0:
            t0 = min(float(np.linalg.eigvalsh(C).min()) for C, _ in problem.blocks)
            return BackendResult(t=t0, x=np.zeros(0))
        x = cp.Variable(d)
        t = cp.Variable()
        cons = [cp.norm(x) <= 1]
        for C, G in problem.blocks:
            s = C.shape[0]
            expr = cp.Constant(C) + cp.sum([x[i] * G[i] for i in range(d)])
            cons.append(expr >> t * np.eye(s))
        prob = cp.Problem(cp.Maximize(t), cons)
        try:
            prob.solve(solver=self.solver)
        except cp.SolverError as exc:
            raise SolverFailure(str(exc)) from exc
        if prob.status not in ("optimal", "optimal_inaccurate"):
            raise SolverFailure(f"cvxpy status {prob.status}")
        x_val = np.asarray(x.value).reshape(d)
        norm = np.linalg.norm(x_val)
        if norm > 1.0:
            x_val = x_val / norm
        achieved = min(
            float(np.linalg.eigvalsh(C + np.tensordot(x_val, G, axes=1)).min())
            for C, G in problem.blocks)
        return BackendResult(t=achieved, x=x_val)


def get_backend(name: str = "builtin"):
    if name in ("builtin", "barrier"):
        return BarrierBackend()
    if name == "cvxpy":
        return CvxpyBackend()
    raise ValueError(f"unknown backend {name!r} (want 'builtin' or 'cvxpy')")
