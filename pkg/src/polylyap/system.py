"""Uncertain piecewise-linear systems over closed polyhedral cones."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

TOL_REGION = 1e-12


class DimensionMismatch(ValueError):
    pass


class NormChoice(enum.Enum):
    """Primal L-infinity norm with its dual, the L1 norm."""

    LINF = "linf"


def primal_norm(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def dual_norm(c) -> float:
    return float(np.sum(np.abs(c)))


def matrix_norm(A) -> float:
    """Induced L-infinity norm: largest absolute row sum."""
    A = np.asarray(A, dtype=float)
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


class ConicRegion:
    """The cone ``{x : n.x >= 0 for every normal n}``; no normals means the whole space."""

    def __init__(self, normals, dimension: int):
        self.dimension = int(dimension)
        N = np.asarray(normals, dtype=float).reshape(-1, self.dimension) if len(normals) else \
            np.zeros((0, self.dimension))
        if not np.all(np.isfinite(N)):
            raise ValueError("region normals must be finite")
        norms = np.linalg.norm(N, axis=1)
        if np.any(norms == 0):
            raise ValueError("region normal must be nonzero")
        self.normals = N / norms[:, None]
        self.normals.setflags(write=False)

    @classmethod
    def full(cls, dimension: int) -> "ConicRegion":
        return cls([], dimension)

    @property
    def is_full(self) -> bool:
        return self.normals.shape[0] == 0

    def contains(self, x, tol: float = TOL_REGION) -> bool:
        if self.is_full:
            return True
        return bool(np.all(self.normals @ np.asarray(x, dtype=float) >= -tol))

    def __repr__(self):
        return f"ConicRegion({self.normals.tolist()})"


@dataclass(frozen=True)
class Mode:
    region: ConicRegion
    matrix: np.ndarray

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch("mode matrix must be square")
        if A.shape[0] != self.region.dimension:
            raise DimensionMismatch("mode matrix and region dimensions differ")
        if not np.all(np.isfinite(A)):
            raise ValueError("mode matrix must be finite")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)


class PwlSystem:
    """Differential inclusion ``x' in F(x) = {A_q x : x in H_q}``."""

    def __init__(self, modes: Sequence[Mode], check_cover: bool = False):
        modes = list(modes)
        if not modes:
            raise ValueError("a system needs at least one mode")
        d = modes[0].region.dimension
        if any(m.region.dimension != d for m in modes):
            raise DimensionMismatch("all modes must share the state dimension")
        self.dimension = d
        self.modes: Tuple[Mode, ...] = tuple(modes)
        if check_cover:
            gaps = self.coverage_gaps()
            if gaps:
                warnings.warn(f"regions do not cover R^{d}: {len(gaps)} sampled states uncovered",
                              stacklevel=2)

    @classmethod
    def from_matrices(cls, matrices, regions=None) -> "PwlSystem":
        """``regions[q]`` is a list of normals for mode ``q``; omitted regions are the full space."""
        matrices = [np.asarray(A, dtype=float) for A in matrices]
        d = matrices[0].shape[0]
        if regions is None:
            regions = [[] for _ in matrices]
        return cls([Mode(ConicRegion(r, d), A) for A, r in zip(matrices, regions, strict=True)])

    def __len__(self):
        return len(self.modes)

    @property
    def matrices(self) -> List[np.ndarray]:
        return [m.matrix for m in self.modes]

    def admissible_modes(self, x, tol: float = TOL_REGION) -> List[int]:
        x = self._check(x)
        return [q for q, m in enumerate(self.modes) if m.region.contains(x, tol)]

    def flow_directions(self, x, tol: float = TOL_REGION) -> List[Tuple[int, np.ndarray]]:
        """Pairs ``(q, A_q x)`` for every mode whose region contains ``x``."""
        x = self._check(x)
        return [(q, self.modes[q].matrix @ x) for q in self.admissible_modes(x, tol)]

    def a_max(self) -> float:
        return max(matrix_norm(m.matrix) for m in self.modes)

    def all_regions_full(self) -> bool:
        return all(m.region.is_full for m in self.modes)

    def coverage_gaps(self, samples: int = 2000, seed: int = 0) -> List[np.ndarray]:
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((samples, self.dimension))
        return [x for x in pts if not self.admissible_modes(x)]

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise DimensionMismatch(f"state has shape {x.shape}, expected ({self.dimension},)")
        return x

    def __repr__(self):
        return f"PwlSystem(dimension={self.dimension}, modes={len(self.modes)})"
