"""Benchmark systems and their known Lyapunov functions."""
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from polylyap.polyhedral import PolyhedralFunction
from polylyap.system import PwlSystem


def running_example() -> PwlSystem:
    """Two spirals glued along the horizontal axis; the lower one slowly expands."""
    A1 = [[-0.2, 1.0], [-1.0, -0.2]]
    A2 = [[0.01, 1.0], [-1.0, 0.01]]
    return PwlSystem.from_matrices([A1, A2], [[[0.0, 1.0]], [[0.0, -1.0]]])


def zelentsovsky(alpha: float) -> PwlSystem:
    """``x' = A_p x`` with ``p`` switching arbitrarily in ``{0, alpha}``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    mats = [np.array([[0.0, 1.0], [-2.0 - p, -1.0]]) for p in (0.0, float(alpha))]
    return PwlSystem.from_matrices(mats)


MASS = 0.1
SPRING = 2.0
K_I, K_P, K_D = 44.0, 24.0, 3.2


def mass_spring() -> PwlSystem:
    """PID-controlled mass-spring with a nonnegative force and anti-windup.

    State ordering is ``(y, x, x')`` with ``y`` the integrated position error.
    """
    m, k = MASS, SPRING
    switch = np.array([K_I, K_P, K_D])
    # force would be negative: saturated controller, integrator leaks
    A_active = np.array([[0.0, 1.0, 0.0],
                         [0.0, 0.0, 1.0],
                         [-K_I / m, -(k + K_P) / m, -K_D / m]])
    A_saturated = np.array([[-1.0, 1.0, 0.0],
                            [0.0, 0.0, 1.0],
                            [0.0, -k / m, 0.0]])
    return PwlSystem.from_matrices([A_active, A_saturated], [[-switch], [switch]])


def random_orthogonal(d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def pi_matrix(d: int, gamma: float, U: Optional[np.ndarray] = None) -> np.ndarray:
    U = np.eye(d) if U is None else U
    return U @ (np.ones((d, d)) - (d + gamma) * np.eye(d)) @ U.T


def pi_gamma(d: int, gamma: float, u_seed: Optional[int] = None) -> Tuple[PwlSystem, PolyhedralFunction]:
    """Two half-spaces split on ``x_1``; stable iff ``gamma > 0``.

    Returns the system and the 2d-piece function ``x -> |U^T x|_inf``,
    rescaled to unit largest dual norm.  ``u_seed=None`` uses ``U = I``.
    """
    if d < 2:
        raise ValueError(f"pi_gamma needs d >= 2, got {d}")
    U = np.eye(d) if u_seed is None else random_orthogonal(d, u_seed)
    e1 = np.zeros(d)
    e1[0] = 1.0
    system = PwlSystem.from_matrices([pi_matrix(d, 1.0, U), pi_matrix(d, gamma, U)], [[e1], [-e1]])
    oracle = PolyhedralFunction(np.vstack([U.T, -U.T]), d).normalized()
    return system, oracle


def linf_function(d: int) -> PolyhedralFunction:
    """The L-infinity norm as a 2d-piece function."""
    return PolyhedralFunction(np.vstack([np.eye(d), -np.eye(d)]), d)
