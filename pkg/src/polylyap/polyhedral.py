"""Convex piecewise-linear functions ``V(x) = max_c c.x``."""
from __future__ import annotations

import math
from typing import Iterator, List, Tuple

import numpy as np

from polylyap import lp
from polylyap.system import DimensionMismatch

TOL_ACTIVE = 1e-9
DEDUP_TOL = 1e-12


class EmptyFunction(ValueError):
    """Raised when an operation needs at least one piece."""


class PolyhedralFunction:
    """Pointwise maximum of finitely many linear pieces.

    Pieces closer than ``DEDUP_TOL`` in L1 distance are merged on construction.
    A function with no pieces is valid: it is what the learner returns for an
    empty witness set.
    """

    def __init__(self, pieces, dimension: int | None = None):
        P = np.asarray(pieces, dtype=float)
        if P.size == 0:
            if dimension is None:
                raise ValueError("dimension is required for a function without pieces")
            P = np.zeros((0, int(dimension)))
        elif P.ndim != 2:
            raise ValueError("pieces must be a 2-d array")
        if dimension is not None and P.shape[1] != dimension:
            raise DimensionMismatch(f"pieces have dimension {P.shape[1]}, expected {dimension}")
        if not np.all(np.isfinite(P)):
            raise ValueError("pieces must be finite")
        self.pieces = _dedup(P)
        self.pieces.setflags(write=False)
        self.dimension = self.pieces.shape[1]

    def __len__(self):
        return self.pieces.shape[0]

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.pieces)

    def __repr__(self):
        return f"PolyhedralFunction({len(self)} pieces, dimension={self.dimension})"

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @property
    def vmax(self) -> float:
        """Largest dual (L1) norm among the pieces."""
        return float(np.abs(self.pieces).sum(axis=1).max()) if len(self) else 0.0

    def normalized(self) -> "PolyhedralFunction":
        """The same function scaled so that ``vmax == 1``."""
        vm = self.vmax
        if vm == 0:
            return self
        return PolyhedralFunction(self.pieces / vm, self.dimension)

    def _require(self, x):
        if self.is_empty:
            raise EmptyFunction("polyhedral function has no pieces")
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise DimensionMismatch(f"state dimension {x.shape[-1]} != {self.dimension}")
        return x

    def evaluate(self, x) -> float:
        x = self._require(x)
        return float(np.max(self.pieces @ x))

    __call__ = evaluate

    def evaluate_many(self, X) -> np.ndarray:
        """Row-wise evaluation of an ``(n, d)`` array of states."""
        X = self._require(X)
        return (X @ self.pieces.T).max(axis=1)

    def active_set(self, x, tol_active: float = TOL_ACTIVE) -> List[int]:
        x = self._require(x)
        vals = self.pieces @ x
        return [int(i) for i in np.flatnonzero(vals >= vals.max() - tol_active)]

    def dini_derivative(self, x, v, tol_active: float = TOL_ACTIVE) -> float:
        """Upper-right directional derivative of V at ``x`` along ``v``."""
        idx = self.active_set(x, tol_active)
        return float(np.max(self.pieces[idx] @ np.asarray(v, dtype=float)))

    def sphere_face_minima(self, backend: str = "auto") -> List[Tuple[float, np.ndarray, int, int]]:
        """Minimum of V on each face ``{x_i = s, |x| <= 1}`` of the L-infinity sphere.

        Returns ``(value, minimizer, i, s)`` for the 2d faces, ordered by
        coordinate and then sign (+1 before -1).
        """
        if self.is_empty:
            raise EmptyFunction("polyhedral function has no pieces")
        d = self.dimension
        k = len(self)
        # variables (x, t): minimize t subject to c.x - t <= 0
        A_ub = np.hstack([self.pieces, -np.ones((k, 1))])
        objective = np.zeros(d + 1)
        objective[-1] = -1.0
        out = []
        for i in range(d):
            for s in (1.0, -1.0):
                lower = np.concatenate([-np.ones(d), [-np.inf]])
                upper = np.concatenate([np.ones(d), [np.inf]])
                lower[i] = upper[i] = s
                res = lp.solve(lp.LinearProgram(objective, A_ub, np.zeros(k), lower=lower, upper=upper),
                               backend=backend)
                if not res.optimal:
                    raise RuntimeError(f"face minimisation LP returned {res.status.value}")
                x = res.solution[:d].copy()
                x[i] = s
                out.append((self.evaluate(x), x, i, int(s)))
        return out

    def sphere_minimum(self, backend: str = "auto") -> Tuple[float, np.ndarray]:
        best = min(self.sphere_face_minima(backend), key=lambda r: r[0])
        return best[0], best[1]

    def eccentricity(self, backend: str = "auto") -> float:
        """Ratio of the largest to smallest L-infinity norm on the 1-level set.

        Infinite when V is not positive away from the origin.
        """
        m, _ = self.sphere_minimum(backend)
        if m <= 0:
            return math.inf
        return self.vmax / m


    def sublevel_polygon(self, tol: float = 1e-9) -> np.ndarray:
        """Vertices of ``{x : V(x) <= 1}`` in counterclockwise order (d = 2 only).

        Every pair of pieces gives a candidate vertex where both equal 1; the
        candidates with ``V <= 1 + tol`` are kept and sorted by angle.
        Raises ValueError when the set is unbounded.
        """
        if self.is_empty:
            raise EmptyFunction("polyhedral function has no pieces")
        if self.dimension != 2:
            raise DimensionMismatch("sublevel polygons are only defined for d = 2")
        if self.sphere_minimum()[0] <= tol:
            raise ValueError("sublevel set is unbounded")
        P = self.pieces
        verts = []
        for i in range(len(P)):
            for j in range(i + 1, len(P)):
                M = P[[i, j]]
                if abs(np.linalg.det(M)) <= 1e-14 * np.abs(M).sum() ** 2:
                    continue
                x = np.linalg.solve(M, np.ones(2))
                if np.max(P @ x) <= 1.0 + tol:
                    verts.append(x)
        V = np.array(verts).reshape(-1, 2)
        V = V[np.argsort(np.arctan2(V[:, 1], V[:, 0]), kind="stable")]
        keep = [k for k in range(len(V)) if k == 0 or np.abs(V[k] - V[k - 1]).max() > 1e-12]
        V = V[keep]
        if len(V) > 1 and np.abs(V[0] - V[-1]).max() <= 1e-12:
            V = V[:-1]
        return V


def _dedup(P: np.ndarray) -> np.ndarray:
    keep: List[int] = []
    for i in range(P.shape[0]):
        if keep and np.min(np.abs(P[keep] - P[i]).sum(axis=1)) <= DEDUP_TOL:
            continue
        keep.append(i)
    return P[keep].copy()
