"""Global check of a candidate over all of R^d, one small LP at a time."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from polylyap import lp
from polylyap.polyhedral import EmptyFunction, PolyhedralFunction
from polylyap.system import DimensionMismatch, PwlSystem

TOL_VIOLATION = 1e-9
# only used to extract a witness point when a facet LP is unbounded
_UNBOUNDED_BOX = 1e6


class ViolationKind(enum.Enum):
    POSITIVITY = "positivity"
    DECREASE = "decrease"


@dataclass(frozen=True)
class Counterexample:
    state: np.ndarray
    kind: ViolationKind
    magnitude: float
    mode: Optional[int] = None
    piece: Optional[int] = None

    def as_dict(self):
        return {"vector": self.state.tolist(), "kind": self.kind.value,
                "magnitude": self.magnitude, "mode": self.mode, "piece": self.piece}


def _require(V: PolyhedralFunction):
    if V.is_empty:
        raise EmptyFunction("cannot verify a function without pieces")


def check_positivity(V: PolyhedralFunction, tol_violation: float = TOL_VIOLATION,
                     backend: str = "auto") -> Optional[Counterexample]:
    """Look for a unit-sphere state where ``V <= 0``.

    Each of the 2d faces of the L-infinity sphere gets one LP minimising V on
    that face; the lowest face minimum is reported if it is not positive.
    """
    _require(V)
    best = None
    for value, x, _, _ in V.sphere_face_minima(backend):
        if value <= tol_violation and (best is None or value < best[0]):
            best = (value, x)
    if best is None:
        return None
    return Counterexample(best[1], ViolationKind.POSITIVITY, -best[0])


def decrease_lp(system: PwlSystem, V: PolyhedralFunction, piece: int, mode: int,
                box: Optional[float] = None) -> lp.LinearProgram:
    """max ``c.A_q x`` over ``x in H_q`` with ``c.x = 1`` and ``b.x <= 1`` for all pieces ``b``."""
    c = V.pieces[piece]
    m = system.modes[mode]
    A_ub = np.vstack([V.pieces, -m.region.normals])
    b_ub = np.concatenate([np.ones(len(V)), np.zeros(m.region.normals.shape[0])])
    lower = upper = None
    if box is not None:
        lower = np.full(V.dimension, -box)
        upper = np.full(V.dimension, box)
    return lp.LinearProgram(m.matrix.T @ c, A_ub, b_ub, c[None, :], np.ones(1), lower, upper)


def check_decrease(system: PwlSystem, V: PolyhedralFunction, tol_violation: float = TOL_VIOLATION,
                   backend: str = "auto") -> Optional[Counterexample]:
    """Worst state where an active piece fails to decrease along some mode.

    Scans every (piece, mode) pair; ties go to the lowest (piece, mode).
    """
    _require(V)
    if V.dimension != system.dimension:
        raise DimensionMismatch("candidate and system dimensions differ")
    best = None
    for j in range(len(V)):
        for q in range(len(system.modes)):
            res = lp.solve(decrease_lp(system, V, j, q), backend=backend)
            if res.status is lp.LpStatus.INFEASIBLE:
                continue
            if res.status is lp.LpStatus.UNBOUNDED:
                res = lp.solve(decrease_lp(system, V, j, q, _UNBOUNDED_BOX), backend=backend)
                if not res.optimal:
                    continue
            value = res.objective_value
            if value >= tol_violation and (best is None or value > best.magnitude):
                best = Counterexample(res.solution, ViolationKind.DECREASE, value, q, j)
    return best


def find_counterexample(system: PwlSystem, V: PolyhedralFunction,
                        tol_violation: float = TOL_VIOLATION,
                        backend: str = "auto") -> Optional[Counterexample]:
    """A state refuting ``V`` as a Lyapunov function, or None if ``V`` is one."""
    if V.dimension != system.dimension:
        raise DimensionMismatch("candidate and system dimensions differ")
    cex = check_positivity(V, tol_violation, backend)
    if cex is not None:
        return cex
    return check_decrease(system, V, tol_violation, backend)
