"""Shared fixtures: canned datasets and the random dataset generator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from ddstab import (DataMatrices, LtiSystem, NumericalConfig, TrajectoryData,
                    build_data_matrices, simulate)


@dataclass(frozen=True)
class Dataset:
    traj: TrajectoryData
    D: DataMatrices
    true_system: LtiSystem
    true_stabilizable: bool


@pytest.fixture
def cfg() -> NumericalConfig:
    return NumericalConfig()


def example1_matrices() -> DataMatrices:
    traj = TrajectoryData(
        inputs=np.array([[1.0], [2.0], [-1.0]]),
        states=np.array([[1.0, 0.0], [2.0, 0.0], [4.0, 0.0], [3.0, 0.0]]))
    return build_data_matrices(traj)


@pytest.fixture
def example1() -> DataMatrices:
    return example1_matrices()


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return Q


def random_system(rng: np.random.Generator, n: int, m: int,
                  uncontrollable: bool, stable_tail: bool) -> tuple[LtiSystem, np.ndarray]:
    """Random system plus a basis change T with A = T^-1 [blocks] T.

    ``uncontrollable`` forces an unreachable block of positive dimension;
    ``stable_tail`` makes that block Schur (so the pair stays stabilizable).
    Returns the system and the matrix T (identity for the dense case).
    """
    if not uncontrollable or n == 1:
        A = rng.normal(size=(n, n))
        radius = max(np.abs(np.linalg.eigvals(A)).max(), 1e-3)
        A *= rng.uniform(0.3, 1.4) / radius
        return LtiSystem(A=A, B=rng.normal(size=(n, m))), np.eye(n)
    n2 = int(rng.integers(1, n))
    n1 = n - n2
    A11 = rng.normal(size=(n1, n1))
    if n1:
        radius = max(np.abs(np.linalg.eigvals(A11)).max(), 1e-3)
        A11 *= rng.uniform(0.3, 1.4) / radius
    A22 = rng.normal(size=(n2, n2))
    radius = max(np.abs(np.linalg.eigvals(A22)).max(), 1e-3)
    A22 *= (rng.uniform(0.2, 0.9) if stable_tail else rng.uniform(1.05, 1.5)) / radius
    blocks = np.zeros((n, n))
    blocks[:n1, :n1] = A11
    blocks[:n1, n1:] = rng.normal(size=(n1, n2))
    blocks[n1:, n1:] = A22
    B = np.vstack([rng.normal(size=(n1, m)), np.zeros((n2, m))])
    T = random_orthogonal(rng, n)
    return LtiSystem(A=T.T @ blocks @ T, B=T.T @ B), T


def random_dataset(rng: np.random.Generator, n_max: int = 5, m_max: int = 2,
                   stabilizable_only: bool = False) -> Dataset:
    """Mixed draw: dense and uncontrollable systems, varied horizons and starts."""
    from ddstab import is_stabilizable

    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    uncontrollable = bool(rng.random() < 0.5)
    stable_tail = stabilizable_only or bool(rng.random() < 0.7)
    system, T = random_system(rng, n, m, uncontrollable, stable_tail)
    T_len = int(rng.integers(1, 2 * (n + m) + 3))
    start_kind = rng.random()
    if start_kind < 0.25:
        x0 = np.zeros(n)
    elif start_kind < 0.6 and uncontrollable and n > 1:
        # start inside the reachable block so the state data stay rank deficient
        lifted = rng.normal(size=n)
        lifted[-1] = 0.0
        x0 = T.T @ lifted
    else:
        x0 = rng.normal(size=n)
    inputs = rng.normal(size=(T_len, m))
    if rng.random() < 0.1:
        inputs[:] = 0.0
    traj = simulate(system, x0, inputs)
    return Dataset(traj=traj, D=build_data_matrices(traj), true_system=system,
                   true_stabilizable=is_stabilizable(system.A, system.B))


# reference values for the three-tank benchmark, rounded to 4 decimals:
# discretized matrices, the length-5 run from x0 = (1, 2, 0), a known
# stabilizing gain, and one feasible certificate for the compressed solve
THREE_TANK_A_REF = np.array([
    [0.9429, 0.0473, 0.0012],
    [0.0473, 0.9524, 0.0476],
    [0.0, 0.0, 0.9512],
])
THREE_TANK_B_REF = np.array([[0.0024], [0.0976], [0.0]])
THREE_TANK_TRAJ_REF = np.array([
    [1.0, 1.04, 1.0778, 1.1086, 1.1334, 1.1575],
    [2.0, 2.0498, 2.0015, 1.8597, 1.8237, 1.8881],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
])
THREE_TANK_U = np.array([1.0, 0.0, -1.0, 0.0, 1.0])
THREE_TANK_K_REF = np.array([[-2.7728, -9.7123, 0.0]])
THREE_TANK_THETA_REF = np.array([
    [-47.4426, -0.9001],
    [-30.3733, 17.7153],
    [-1.5964, 32.3315],
    [49.2034, 20.4120],
    [36.0139, -68.9591],
])
