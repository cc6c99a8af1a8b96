"""Simulation, the three-tank benchmark, demo scenarios, and the Monte Carlo study."""
from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import LtiSystem, TrajectoryData, build_data_matrices, consistent_set
from .errors import SolverFailure
from .informativity import check_identification, check_stabilizability_prior
from .linalg import (DEFAULT_CONFIG, NumericalConfig, is_controllable,
                     matrix_exponential, spectral_radius)
from .synthesis import synthesize_stab
from .verification import verify_gain


@dataclass(frozen=True)
class ContinuousSystem:
    """xdot = A x + B u, sampled every ``sample_time`` time units."""

    A: np.ndarray
    B: np.ndarray
    sample_time: float

    def __post_init__(self):
        if not self.sample_time > 0:
            raise ValueError("sample_time must be positive")


@dataclass(frozen=True)
class ThreeTankParams:
    """Cascade of three tanks draining to a basin, inflow actuated at tank 2."""

    a1: float = 1.0
    a2: float = 1.0
    a3: float = 1.0
    k01: float = 0.1
    k12: float = 0.5
    k23: float = 0.5

    def __post_init__(self):
        if min(self.a1, self.a2, self.a3, self.k01, self.k12, self.k23) <= 0:
            raise ValueError("areas and flow coefficients must be positive")


def simulate(system: LtiSystem, x0: np.ndarray, inputs: np.ndarray) -> TrajectoryData:
    """Iterate x(t+1) = A x(t) + B u(t) over the given input sequence."""
    x0 = np.asarray(x0, dtype=float).reshape(system.n)
    inputs = np.asarray(inputs, dtype=float).reshape(-1, system.m)
    states = np.empty((len(inputs) + 1, system.n))
    states[0] = x0
    for t in range(len(inputs)):
        states[t + 1] = system.A @ states[t] + system.B @ inputs[t]
    return TrajectoryData(inputs=inputs, states=states)


def zoh_discretize(cs: ContinuousSystem) -> LtiSystem:
    """Exact sampling under piecewise-constant input, via the augmented exponential."""
    n, m = cs.A.shape[0], cs.B.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = cs.A
    aug[:n, n:] = cs.B
    E = matrix_exponential(cs.sample_time * aug)
    return LtiSystem(A=E[:n, :n], B=E[:n, n:])


def three_tank_model(p: ThreeTankParams = ThreeTankParams(),
                     sample_time: float = 0.1) -> ContinuousSystem:
    """Mass balance of the cascade; tank 3 only feeds forward, so it is
    unreachable from the input."""
    A = np.array([
        [-(p.k01 + p.k12) / p.a1, p.k12 / p.a1, 0.0],
        [p.k12 / p.a2, -p.k12 / p.a2, p.k23 / p.a2],
        [0.0, 0.0, -p.k23 / p.a3],
    ])
    B = np.array([[0.0], [1.0 / p.a2], [0.0]])
    return ContinuousSystem(A=A, B=B, sample_time=sample_time)


# ---------------------------------------------------------------------------
# Monte Carlo study

@dataclass(frozen=True)
class MonteCarloConfig:
    system: LtiSystem
    scenarios: int = 1000
    horizon: int = 100
    t_list: tuple[int, ...] = (3, 4, 5, 10, 100)
    poisson_lambda: float = 1.0
    seed: int = 3
    workers: int = 1

    def __post_init__(self):
        if any(T > self.horizon for T in self.t_list):
            raise ValueError("every T must be <= horizon")


@dataclass(frozen=True)
class ScenarioVerdict:
    scenario: int
    T: int
    identification: bool
    stabilization: bool
    stabilization_stabilizability_prior: bool


@dataclass(frozen=True)
class MonteCarloResult:
    config: MonteCarloConfig
    verdicts: list[ScenarioVerdict]
    solver_failures: int

    def percentages(self) -> dict[int, dict[str, float]]:
        out: dict[int, dict[str, float]] = {}
        for T in self.config.t_list:
            rows = [v for v in self.verdicts if v.T == T]
            total = max(len(rows), 1)
            out[T] = {
                "identification_pct": 100.0 * sum(v.identification for v in rows) / total,
                "stabilization_pct": 100.0 * sum(v.stabilization for v in rows) / total,
                "stabilizability_prior_pct":
                    100.0 * sum(v.stabilization_stabilizability_prior for v in rows) / total,
            }
        return out


def _scenario_trajectory(mc: MonteCarloConfig, index: int) -> TrajectoryData:
    # per-scenario counter-based stream: bitwise reproducible regardless of
    # scheduling; x0 entries are drawn first, then the whole input sequence
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((mc.seed, index))))
    n, m = mc.system.n, mc.system.m
    x0 = rng.poisson(mc.poisson_lambda, size=n).astype(float)
    inputs = rng.poisson(mc.poisson_lambda, size=(mc.horizon, m)).astype(float)
    return simulate(mc.system, x0, inputs)


def _evaluate_scenario(mc: MonteCarloConfig, index: int,
                       cfg: NumericalConfig) -> tuple[list[ScenarioVerdict], int]:
    traj = _scenario_trajectory(mc, index)
    verdicts, failures = [], 0
    for T in mc.t_list:
        window = TrajectoryData(inputs=traj.inputs[:T], states=traj.states[:T + 1])
        D = build_data_matrices(window)
        ident = check_identification(D, cfg)
        try:
            report = check_stabilizability_prior(D, cfg)
            plain = report.stabilization
            prior = report.stabilization_stabilizability_prior
        except SolverFailure:
            failures += 1
            plain = prior = False
        verdicts.append(ScenarioVerdict(scenario=index, T=T, identification=ident,
                                        stabilization=plain,
                                        stabilization_stabilizability_prior=prior))
    return verdicts, failures


def _scenario_worker(args) -> tuple[list[ScenarioVerdict], int]:
    mc, index, cfg = args
    return _evaluate_scenario(mc, index, cfg)


def run_monte_carlo(mc: MonteCarloConfig,
                    cfg: NumericalConfig = DEFAULT_CONFIG) -> MonteCarloResult:
    """Informativity rates over randomly excited runs of ``mc.system``.

    Deterministic given ``mc.seed``; scenarios are independent, so workers
    only change wall time, never the result (aggregation is ordered by
    scenario index).
    """
    all_verdicts: list[ScenarioVerdict] = []
    failures = 0
    if mc.workers > 1:
        # spawn, not fork: forked children can inherit held BLAS locks
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=mc.workers, mp_context=ctx) as pool:
            jobs = ((mc, i, cfg) for i in range(mc.scenarios))
            for verdicts, fail in pool.map(_scenario_worker, jobs, chunksize=16):
                all_verdicts.extend(verdicts)
                failures += fail
    else:
        for i in range(mc.scenarios):
            verdicts, fail = _evaluate_scenario(mc, i, cfg)
            all_verdicts.extend(verdicts)
            failures += fail
    return MonteCarloResult(config=mc, verdicts=all_verdicts, solver_failures=failures)


# ---------------------------------------------------------------------------
# demo scenarios

def example1_trajectory() -> TrajectoryData:
    """Two-state experiment whose second state never moves."""
    return TrajectoryData(
        inputs=np.array([[1.0], [2.0], [-1.0]]),
        states=np.array([[1.0, 0.0], [2.0, 0.0], [4.0, 0.0], [3.0, 0.0]]))


def demo_example1(cfg: NumericalConfig = DEFAULT_CONFIG, seed: int = 0,
                  n_samples: int = 200, backend=None) -> dict:
    """Dataset where no gain covers every consistent system, yet one covers
    all stabilizable ones."""
    traj = example1_trajectory()
    D = build_data_matrices(traj)
    report = check_stabilizability_prior(D, cfg, backend)
    gain, sol, comp = synthesize_stab(D, cfg, backend=backend)
    verification = verify_gain(consistent_set(D, cfg), gain, n_samples=n_samples,
                               seed=seed, cfg=cfg)
    return {
        "trajectory": traj,
        "data": D,
        "informativity": report,
        "compression": comp,
        "solution": sol,
        "gain": gain,
        "verification": verification,
    }


def demo_example2(a_range: tuple[float, float] = (-1.0, 3.0),
                  b1_range: tuple[float, float] = (-2.0, 2.0),
                  points_per_axis: int = 41,
                  cfg: NumericalConfig = DEFAULT_CONFIG) -> dict:
    """Grid over the plane of scalar systems consistent with one sample.

    The experiment x(1) = a x(0) + b1 u1 + b2 u2 with x(0) = -1,
    u = (1, -1), x(1) = -1 pins b2 = b1 - a + 1. Exactly one grid point is
    uncontrollable (zero input matrix, which forces a = 1); the emitted rows
    are (a, b1, b2, controllable).
    """
    traj = TrajectoryData(inputs=np.array([[1.0, -1.0]]),
                          states=np.array([[-1.0], [-1.0]]))
    # integer-step grids so the uncontrollable point is hit exactly
    a_vals = np.round(np.linspace(*a_range, points_per_axis), 12)
    b1_vals = np.round(np.linspace(*b1_range, points_per_axis), 12)
    rows = []
    flagged = []
    for a in a_vals:
        for b1 in b1_vals:
            b2 = b1 - a + 1.0
            ctrb = is_controllable(np.array([[a]]), np.array([[b1, b2]]), cfg)
            rows.append((float(a), float(b1), float(b2), bool(ctrb)))
            if not ctrb:
                flagged.append((float(a), float(b1), float(b2)))
    return {"trajectory": traj, "grid": rows, "uncontrollable_points": flagged}


THREE_TANK_X0 = np.array([1.0, 2.0, 0.0])
THREE_TANK_INPUTS = np.array([[1.0], [0.0], [-1.0], [0.0], [1.0]])


def demo_three_tank(cfg: NumericalConfig = DEFAULT_CONFIG, seed: int = 0,
                    n_samples: int = 200, backend=None) -> dict:
    """Discretize the cascade, run the length-5 experiment, synthesize and verify."""
    continuous = three_tank_model()
    system = zoh_discretize(continuous)
    traj = simulate(system, THREE_TANK_X0, THREE_TANK_INPUTS)
    D = build_data_matrices(traj)
    report = check_stabilizability_prior(D, cfg, backend)
    gain, sol, comp = synthesize_stab(D, cfg, backend=backend)
    verification = verify_gain(consistent_set(D, cfg), gain, n_samples=n_samples,
                               seed=seed, cfg=cfg)
    closed_loop = system.A + system.B @ gain.K
    return {
        "continuous": continuous,
        "system": system,
        "trajectory": traj,
        "data": D,
        "informativity": report,
        "compression": comp,
        "solution": sol,
        "gain": gain,
        "verification": verification,
        "closed_loop_eigenvalues": np.linalg.eigvals(closed_loop),
        "closed_loop_spectral_radius": spectral_radius(closed_loop),
    }
