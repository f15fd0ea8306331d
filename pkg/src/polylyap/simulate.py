"""Fixed-step trajectories and random perturbations of the mode matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from polylyap.polyhedral import EmptyFunction, PolyhedralFunction
from polylyap.system import DimensionMismatch, Mode, PwlSystem, TOL_REGION, matrix_norm

TOL_DECREASE_SLACK = 1e-6


class CoverageGap(RuntimeError):
    """No mode admits the current state."""

    def __init__(self, state: np.ndarray, step: int):
        super().__init__(f"no mode admits state {state.tolist()} at step {step}")
        self.state = state
        self.step = step


class RegionNotFullSpace(ValueError):
    pass


@dataclass
class Trajectory:
    h: float
    times: np.ndarray
    states: np.ndarray
    mode_choices: List[int]

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def rk4_step(A: np.ndarray, x: np.ndarray, h: float) -> np.ndarray:
    k1 = A @ x
    k2 = A @ (x + 0.5 * h * k1)
    k3 = A @ (x + 0.5 * h * k2)
    k4 = A @ (x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(system: PwlSystem, x0, h: float, steps: int,
              policy: Union[str, int] = "first", seed: Optional[int] = None,
              tol: float = TOL_REGION) -> Trajectory:
    """RK4 with the mode frozen over each step.

    ``policy`` is ``"first"`` (lowest admissible index), ``"random"``
    (uniform among admissible modes, seeded) or an integer mode index that
    is used on every step regardless of its region.
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x = np.asarray(x0, dtype=float)
    if x.shape != (system.dimension,):
        raise DimensionMismatch(f"x0 has shape {x.shape}, system dimension {system.dimension}")
    forced = None
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        if not 0 <= policy < len(system.modes):
            raise ValueError(f"no mode {policy}")
        forced = int(policy)
    elif policy not in ("first", "random"):
        raise ValueError(f"unknown policy {policy!r}")
    rng = np.random.default_rng(seed)
    states = np.empty((steps + 1, system.dimension))
    states[0] = x
    modes = []
    for k in range(steps):
        if forced is not None:
            q = forced
        else:
            admissible = system.admissible_modes(x, tol)
            if not admissible:
                raise CoverageGap(x.copy(), k)
            q = admissible[0] if policy == "first" else int(rng.choice(admissible))
        x = rk4_step(system.modes[q].matrix, x, h)
        states[k + 1] = x
        modes.append(q)
    return Trajectory(h, h * np.arange(steps + 1), states, modes)


@dataclass(frozen=True)
class DecreaseReport:
    max_increase: float
    worst_step: int
    increases: np.ndarray

    def within(self, slack: float) -> bool:
        return self.max_increase <= slack


def check_decrease_along(V: PolyhedralFunction, traj: Trajectory) -> DecreaseReport:
    """Largest one-step change ``V(x_{k+1}) - V(x_k)`` along the trajectory."""
    if V.is_empty:
        raise EmptyFunction("cannot evaluate a function without pieces")
    values = V.evaluate_many(traj.states)
    inc = np.diff(values)
    if inc.size == 0:
        return DecreaseReport(-np.inf, -1, inc)
    k = int(np.argmax(inc))
    return DecreaseReport(float(inc[k]), k, inc)


@dataclass(frozen=True)
class PerturbedSystem:
    base: PwlSystem
    gamma: float
    matrices: tuple

    @property
    def system(self) -> PwlSystem:
        return PwlSystem([Mode(m.region, A) for m, A in zip(self.base.modes, self.matrices)])

    def deviations(self) -> List[float]:
        return [matrix_norm(A - m.matrix) for m, A in zip(self.base.modes, self.matrices)]


def sample_perturbation(system: PwlSystem, gamma: float, seed: Optional[int] = None) -> PerturbedSystem:
    """Add to each ``A_q`` a Gaussian matrix rescaled to norm exactly ``gamma * a_max``."""
    if not system.all_regions_full():
        raise RegionNotFullSpace("perturbation sampling needs every region to be the whole space")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    rng = np.random.default_rng(seed)
    radius = gamma * system.a_max()
    d = system.dimension
    out = []
    for m in system.modes:
        D = rng.standard_normal((d, d))
        out.append(m.matrix + D * (radius / matrix_norm(D)) if radius > 0 else m.matrix.copy())
    return PerturbedSystem(system, float(gamma), tuple(out))
