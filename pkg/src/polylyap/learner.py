"""Candidate synthesis from a finite set of witness states."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from polylyap import lp
from polylyap.polyhedral import PolyhedralFunction
from polylyap.system import DimensionMismatch, PwlSystem, primal_norm

# witnesses come out of LPs and may sit a hair outside a region they bound
WITNESS_REGION_TOL = 1e-9
WITNESS_DUP_TOL = 1e-12


@dataclass(frozen=True)
class SynthesisParams:
    """Eccentricity bound ``epsilon`` and robustness parameters ``theta``, ``delta``."""

    epsilon: float
    theta: float
    delta: float

    def __post_init__(self):
        if not self.epsilon >= 1:
            raise ValueError(f"epsilon must be >= 1, got {self.epsilon}")
        if not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")

    def as_dict(self):
        return {"epsilon": self.epsilon, "theta": self.theta, "delta": self.delta}


class DuplicateWitness(ValueError):
    pass


class WitnessSet:
    """Unit-sphere states, each with the velocities ``(q, A_q x)`` the system allows there."""

    def __init__(self, system: PwlSystem, states: Sequence = (), normalize: bool = True):
        self.system = system
        self._states: List[np.ndarray] = []
        self._flows: List[List[Tuple[int, np.ndarray]]] = []
        for x in states:
            self._append(x, normalize)

    def _append(self, x, normalize: bool):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.system.dimension,):
            raise DimensionMismatch(f"witness has shape {x.shape}")
        n = primal_norm(x)
        if normalize:
            if n == 0:
                raise ValueError("witness must be nonzero")
            x = x / n
        elif abs(n - 1.0) > 1e-12:
            raise ValueError("witness is not on the unit sphere")
        if self._states and np.min(np.abs(np.array(self._states) - x).max(axis=1)) <= WITNESS_DUP_TOL:
            raise DuplicateWitness("witness already present")
        self._states.append(x)
        self._flows.append(self.system.flow_directions(x, WITNESS_REGION_TOL))

    def extended(self, x) -> "WitnessSet":
        """Copy with ``x`` (normalised) appended."""
        new = WitnessSet.__new__(WitnessSet)
        new.system = self.system
        new._states = list(self._states)
        new._flows = list(self._flows)
        new._append(x, True)
        return new

    def __len__(self):
        return len(self._states)

    def __iter__(self):
        return iter(self._states)

    def __getitem__(self, i):
        return self._states[i]

    @property
    def states(self) -> np.ndarray:
        if not self._states:
            return np.zeros((0, self.system.dimension))
        return np.array(self._states)

    def flows(self, i) -> List[Tuple[int, np.ndarray]]:
        return self._flows[i]

    def contains(self, x, tol: float = WITNESS_DUP_TOL) -> bool:
        if not self._states:
            return False
        return bool(np.min(np.abs(self.states - np.asarray(x)).max(axis=1)) <= tol)


@dataclass(frozen=True)
class LearnResult:
    function: Optional[PolyhedralFunction]
    slack: Optional[float]
    piece_for_witness: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.function is not None


def learn(system: PwlSystem, witnesses: WitnessSet, params: SynthesisParams,
          backend: str = "auto", tol_feas: float = lp.TOL_FEAS,
          row_generation: bool = False,
          warm_start: Optional[LearnResult] = None) -> LearnResult:
    """Find one piece per witness satisfying the robust conditions at every witness.

    The LP maximises a uniform slack ``s`` added to every eccentricity and
    decrease constraint; the witness set is declared infeasible when the
    optimal slack is negative.

    With ``row_generation`` the decrease rows coupling a witness to other
    witnesses' pieces are added lazily: the LP is re-solved with every
    violated row until none is left out, which yields an optimum of the full
    program. Started cold it pays off only on some systems, so it is off by
    default. ``warm_start`` is the result for a prefix of the same witness
    set; it turns row generation on, seeded with the rows that were nearly
    tight under that result plus every row touching the new witnesses.
    """
    if witnesses.system.dimension != system.dimension:
        raise DimensionMismatch("witness set and system dimensions differ")
    d = system.dimension
    N = len(witnesses)
    if N == 0:
        return LearnResult(PolyhedralFunction([], d), None)
    flows = _flow_table(witnesses)
    P = flows[0].size
    warm = (warm_start is not None and warm_start.piece_for_witness is not None
            and 0 < len(warm_start.piece_for_witness) <= N)
    if P * N <= _FULL_PROGRAM_ROWS or not (row_generation or warm):
        mask = np.ones((P, N), dtype=bool)
    elif warm:
        mask = _warm_rows(witnesses, params, flows, warm_start)
    else:
        mask = _initial_rows(witnesses, flows)
    for _ in range(_MAX_ROUNDS):
        prog = _learner_program(witnesses, params, flows, mask)
        res = lp.solve(prog, backend=backend, tol_feas=tol_feas)
        if not res.optimal:
            # the slack formulation is always feasible and bounded
            raise RuntimeError(f"learner LP returned {res.status.value}")
        slack = float(res.solution[-1])
        if slack < -tol_feas:
            # dropping rows only raises the optimum, so the full program is infeasible too
            return LearnResult(None, slack)
        C = res.solution[:N * d].reshape(N, d)
        viol = _row_violations(witnesses, params, flows, C, slack)
        if not (viol[~mask] > tol_feas).any():
            return LearnResult(PolyhedralFunction(C, d), slack, C)
        # nearly tight rows too, or the next rounds keep adding a handful each
        mask |= viol > -_WARM_MARGIN
    raise RuntimeError("learner row generation did not converge")


# below this many decrease rows the full program is solved directly
_FULL_PROGRAM_ROWS = 20_000
_MAX_ROUNDS = 200
_NEIGHBOURS = 6
# rows with a scaled violation above -_WARM_MARGIN join the program
_WARM_MARGIN = 1e-2


def _flow_table(witnesses: WitnessSet):
    """Parallel arrays (witness index, velocity) over all admissible (witness, mode) pairs."""
    pw, pv = [], []
    for i in range(len(witnesses)):
        for _, v in witnesses.flows(i):
            pw.append(i)
            pv.append(v)
    d = witnesses.system.dimension
    return np.array(pw, dtype=int), np.array(pv, dtype=float).reshape(-1, d)


def _initial_rows(witnesses: WitnessSet, flows) -> np.ndarray:
    # own piece plus the pieces of the nearest witnesses
    X = witnesses.states
    pw = flows[0]
    dist = np.abs(X[pw][:, None, :] - X[None, :, :]).max(axis=2)
    k = min(_NEIGHBOURS + 1, X.shape[0])
    near = np.argpartition(dist, k - 1, axis=1)[:, :k]
    mask = np.zeros(dist.shape, dtype=bool)
    np.put_along_axis(mask, near, True, axis=1)
    mask[np.arange(pw.size), pw] = True
    return mask


def _warm_rows(witnesses: WitnessSet, params: SynthesisParams, flows, warm: LearnResult) -> np.ndarray:
    C_old = warm.piece_for_witness
    n_old = C_old.shape[0]
    N = len(witnesses)
    C = np.vstack([C_old, np.zeros((N - n_old, C_old.shape[1]))])
    mask = _row_violations(witnesses, params, flows, C, warm.slack) > -_WARM_MARGIN
    pw = flows[0]
    mask[:, n_old:] = True
    mask[pw >= n_old, :] = True
    mask[np.arange(pw.size), pw] = True
    return mask


def _row_violations(witnesses: WitnessSet, params: SynthesisParams, flows, C, slack) -> np.ndarray:
    """Scaled violation of every decrease row, shape ``(flows, pieces)``."""
    X = witnesses.states
    pw, pv = flows
    px = X[pw]
    norms = np.abs(px).max(axis=1)
    inv = 1.0 / params.theta
    own = np.einsum("pd,pd->p", C[pw], px)
    lhs = (pv + inv * px) @ C.T - inv * own[:, None] + slack
    same = np.arange(C.shape[0])[None, :] == pw[:, None]
    lhs[same] = np.einsum("pd,pd->p", C[pw], pv) + slack
    viol = lhs + params.delta * norms[:, None]
    # same row scaling as the LP layer
    scale = np.maximum(np.abs(pv + inv * px).max(axis=1), inv * norms)
    scale = np.maximum(scale, 1.0)[:, None] * np.ones_like(viol)
    scale[same] = np.maximum(np.abs(pv).max(axis=1), 1.0)
    return viol / scale


def _learner_program(witnesses: WitnessSet, params: SynthesisParams, flows=None,
                     mask: Optional[np.ndarray] = None) -> lp.LinearProgram:
    d = witnesses.system.dimension
    N = len(witnesses)
    X = witnesses.states
    norms = np.abs(X).max(axis=1)
    n_vars = 2 * N * d + 1
    s_col = n_vars - 1
    inv_theta = 1.0 / params.theta
    if flows is None:
        flows = _flow_table(witnesses)

    rows, cols, vals, rhs = [], [], [], []
    n_rows = 0

    def add(r, c, v):
        rows.append(np.asarray(r).ravel())
        cols.append(np.asarray(c).ravel())
        vals.append(np.asarray(v, dtype=float).ravel())

    # eccentricity: -c_i.x_i + s <= -|x_i| / epsilon
    idx = np.arange(N)
    add(np.repeat(idx, d), (idx[:, None] * d + np.arange(d)).ravel(), -X.ravel())
    add(idx, np.full(N, s_col), np.ones(N))
    rhs.append(-norms / params.epsilon)
    n_rows += N

    # decrease: c_j.v - (c_i.x_i - c_j.x_i) / theta + s <= -delta |x_i|
    pw_all, pv_all = flows
    if pw_all.size:
        if mask is None:
            mask = np.ones((pw_all.size, N), dtype=bool)
        p_idx, j = np.nonzero(mask)
        pw = pw_all[p_idx]
        pv = pv_all[p_idx]
        px = X[pw]
        R = p_idx.size
        r = n_rows + np.arange(R)
        same = j == pw
        # coefficients on c_j
        cj = pv + np.where(same[:, None], 0.0, inv_theta * px)
        add(np.repeat(r, d), (j[:, None] * d + np.arange(d)).ravel(), cj.ravel())
        # coefficients on c_i for j != i
        off = ~same
        add(np.repeat(r[off], d), (pw[off][:, None] * d + np.arange(d)).ravel(),
            (-inv_theta * px[off]).ravel())
        add(r, np.full(R, s_col), np.ones(R))
        rhs.append(-params.delta * norms[pw])
        n_rows += R

    # dual-norm ball: |c_i| <= u_i componentwise, sum(u_i) <= 1
    k = np.arange(N * d)
    for sign in (1.0, -1.0):
        add(n_rows + k, k, np.full(N * d, sign))
        add(n_rows + k, N * d + k, -np.ones(N * d))
        rhs.append(np.zeros(N * d))
        n_rows += N * d
    add(np.repeat(n_rows + idx, d), N * d + k, np.ones(N * d))
    rhs.append(np.ones(N))
    n_rows += N

    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_rows, n_vars))
    objective = np.zeros(n_vars)
    objective[s_col] = 1.0
    upper = np.full(n_vars, np.inf)
    upper[s_col] = 1.0
    return lp.LinearProgram(objective, A, np.concatenate(rhs), upper=upper)


def witness_residuals(system: PwlSystem, witnesses: WitnessSet, params: SynthesisParams,
                      pieces: np.ndarray) -> float:
    """Smallest margin of the learner constraints for a per-witness piece assignment.

    Negative values mean a constraint is violated by that amount.
    """
    worst = np.inf
    X = witnesses.states
    for i, x in enumerate(X):
        nx = primal_norm(x)
        cx = pieces[i]
        worst = min(worst, cx @ x - nx / params.epsilon)
        for _, v in witnesses.flows(i):
            bound = (cx @ x - pieces @ x) / params.theta - params.delta * nx
            worst = min(worst, float(np.min(bound - pieces @ v)))
    worst = min(worst, float(1.0 - np.abs(pieces).sum(axis=1).max()))
    return float(worst)
