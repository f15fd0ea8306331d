"""Small dense linear programming layer.

Every LP built by the learner and the verifier has few variables and many
inequality rows, so the in-house simplex works on the LP dual: the tableau
has one row per primal variable and one column per primal constraint.
Large learner programs are routed to HiGHS (through scipy) instead; both
routes share the same input validation, row scaling and feasibility check.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

TOL_FEAS = 1e-9
TOL_OBJ = 1e-8

# above this many dual-tableau entries the "auto" backend hands off to HiGHS;
# in practice verifier programs stay below it and learner programs go above
AUTO_DENSE_LIMIT = 20_000

_PIVOT_TOL = 1e-9
_HARRIS_TOL = 1e-11
_REDUCED_COST_TOL = 1e-11
_UNBOUNDED_RC_TOL = 1e-7
_PHASE1_TOL = 1e-9
_REINVERT_EVERY = 200
_STALL_LIMIT = 30
_MAX_PIVOTS = 200_000


class MalformedProgram(ValueError):
    """Raised for dimension mismatches or non-finite data."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    solution: Optional[np.ndarray] = None
    objective_value: Optional[float] = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


_RELATIONS = {"<=": "<=", "≤": "<=", "le": "<=", "=": "=", "==": "=", "eq": "=",
              ">=": ">=", "≥": ">=", "ge": ">="}


class LinearProgram:
    """maximize ``objective @ x`` s.t. ``A_ub x <= b_ub``, ``A_eq x == b_eq``, ``lower <= x <= upper``.

    Constraint matrices may be dense arrays or scipy sparse matrices.  Missing
    bounds mean the variable is free.
    """

    def __init__(self, objective, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
                 lower=None, upper=None):
        c = np.asarray(objective, dtype=float)
        if c.ndim != 1:
            raise MalformedProgram("objective must be a vector")
        n = c.size
        self.objective = c
        self.A_ub, self.b_ub = _check_block(A_ub, b_ub, n, "A_ub")
        self.A_eq, self.b_eq = _check_block(A_eq, b_eq, n, "A_eq")
        self.lower = _check_bound(lower, n, -np.inf, "lower")
        self.upper = _check_bound(upper, n, np.inf, "upper")
        if not np.all(np.isfinite(c)):
            raise MalformedProgram("objective has non-finite entries")

    @classmethod
    def from_rows(cls, objective, constraints: Sequence, bounds=None) -> "LinearProgram":
        """Build from ``(row, relation, rhs)`` triples; relation is one of ``<=``, ``=``, ``>=``.

        ``bounds`` is an optional list of ``(lower, upper)`` pairs, ``None`` meaning unbounded.
        """
        c = np.asarray(objective, dtype=float)
        n = c.size
        ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
        for row, rel, rhs in constraints:
            row = np.asarray(row, dtype=float)
            if row.shape != (n,):
                raise MalformedProgram(f"constraint row has length {row.size}, expected {n}")
            try:
                rel = _RELATIONS[rel]
            except KeyError:
                raise MalformedProgram(f"unknown relation {rel!r}") from None
            if rel == "<=":
                ub_rows.append(row)
                ub_rhs.append(rhs)
            elif rel == ">=":
                ub_rows.append(-row)
                ub_rhs.append(-float(rhs))
            else:
                eq_rows.append(row)
                eq_rhs.append(rhs)
        lower = upper = None
        if bounds is not None:
            if len(bounds) != n:
                raise MalformedProgram("bounds must have one entry per variable")
            lower = [-np.inf if lo is None else lo for lo, _ in bounds]
            upper = [np.inf if hi is None else hi for _, hi in bounds]
        return cls(c,
                   np.array(ub_rows).reshape(-1, n) if ub_rows else None,
                   np.array(ub_rhs, dtype=float) if ub_rows else None,
                   np.array(eq_rows).reshape(-1, n) if eq_rows else None,
                   np.array(eq_rhs, dtype=float) if eq_rows else None,
                   lower, upper)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def inequality_form(self, sparse: bool = False):
        """All constraints as ``G x <= h``: equalities doubled, finite bounds as rows."""
        n = self.n_vars
        eye = sp.identity(n, format="csr")
        lo_idx = np.flatnonzero(np.isfinite(self.lower))
        hi_idx = np.flatnonzero(np.isfinite(self.upper))
        blocks = [self.A_ub, self.A_eq, -self.A_eq, eye[hi_idx], -eye[lo_idx]]
        h = np.concatenate([self.b_ub, self.b_eq, -self.b_eq,
                            self.upper[hi_idx], -self.lower[lo_idx]])
        if sparse:
            G = sp.vstack([sp.csr_matrix(b) for b in blocks], format="csr")
        else:
            G = np.vstack([b.toarray() if sp.issparse(b) else np.asarray(b) for b in blocks])
        return G, h

    def max_violation(self, x) -> float:
        """Largest constraint violation of ``x`` after scaling rows to unit max-abs coefficient."""
        G, h = self.inequality_form(sparse=True)
        if G.shape[0] == 0:
            return 0.0
        scale = _row_scale(G)
        viol = (G @ x - h) * scale
        return float(max(viol.max(), 0.0))


def _check_block(A, b, n, name):
    if A is None:
        if b is not None and np.size(b) > 0:
            raise MalformedProgram(f"{name} missing but right-hand side given")
        return np.zeros((0, n)), np.zeros(0)
    if not sp.issparse(A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise MalformedProgram(f"{name} must be two-dimensional")
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != n:
        raise MalformedProgram(f"{name} has {A.shape[1]} columns, expected {n}")
    if A.shape[0] != b.size:
        raise MalformedProgram(f"{name} has {A.shape[0]} rows but rhs has {b.size}")
    data = A.data if sp.issparse(A) else A
    if not (np.all(np.isfinite(data)) and np.all(np.isfinite(b))):
        raise MalformedProgram(f"{name} or its rhs has non-finite entries")
    return A, b


def _check_bound(bound, n, default, name):
    if bound is None:
        return np.full(n, default)
    bound = np.asarray(bound, dtype=float).ravel()
    if bound.size != n:
        raise MalformedProgram(f"{name} bounds have length {bound.size}, expected {n}")
    if np.any(np.isnan(bound)):
        raise MalformedProgram(f"{name} bounds contain NaN")
    return bound


def _row_scale(G) -> np.ndarray:
    if sp.issparse(G):
        mx = abs(G).max(axis=1).toarray().ravel()
    else:
        mx = np.abs(G).max(axis=1) if G.shape[1] else np.zeros(G.shape[0])
    scale = np.ones_like(mx)
    nz = mx > 0
    scale[nz] = 1.0 / mx[nz]
    return scale


def solve(lp: LinearProgram, backend: str = "auto", tol_feas: float = TOL_FEAS) -> LpOutcome:
    """Solve ``lp``; ``backend`` is ``"simplex"``, ``"highs"`` or ``"auto"``."""
    if backend not in ("auto", "simplex", "highs"):
        raise ValueError(f"unknown backend {backend!r}")
    if np.any(lp.lower > lp.upper):
        return LpOutcome(LpStatus.INFEASIBLE)
    if backend == "auto":
        rows = lp.b_ub.size + 2 * lp.b_eq.size + np.isfinite(lp.lower).sum() + np.isfinite(lp.upper).sum()
        backend = "simplex" if lp.n_vars * rows <= AUTO_DENSE_LIMIT else "highs"
    if backend == "highs":
        return _solve_highs(lp, tol_feas)
    G, h = lp.inequality_form()
    return _solve_dense(lp.objective, G, h, tol_feas)


# --------------------------------------------------------------------------
# dense simplex on the dual


def _solve_dense(c, G, h, tol_feas) -> LpOutcome:
    n = c.size
    if n == 0:
        if np.all(h >= -tol_feas):
            return LpOutcome(LpStatus.OPTIMAL, np.zeros(0), 0.0)
        return LpOutcome(LpStatus.INFEASIBLE)
    scale = _row_scale(G)
    G = G * scale[:, None]
    h = h * scale
    zero = ~np.any(G != 0.0, axis=1)
    if np.any(h[zero] < -tol_feas):
        return LpOutcome(LpStatus.INFEASIBLE)
    G, h = G[~zero], h[~zero]

    cmax = np.abs(c).max()
    cs = c / cmax if cmax > 0 else c
    status, basis = _dual_simplex(cs, G, h)
    if status == "dual_unbounded":
        return LpOutcome(LpStatus.INFEASIBLE)
    if status == "dual_infeasible":
        if cmax == 0:
            # the zero objective always has a feasible dual
            raise RuntimeError("simplex phase 1 failed on a zero objective")
        feas = _solve_dense(np.zeros(n), G, h, tol_feas)
        return LpOutcome(LpStatus.UNBOUNDED if feas.optimal else LpStatus.INFEASIBLE)
    if basis:
        x, *_ = np.linalg.lstsq(G[basis], h[basis], rcond=None)
    else:
        x = np.zeros(n)
    return LpOutcome(LpStatus.OPTIMAL, x, float(c @ x))


def _dual_simplex(c, G, h):
    """Primal simplex on  min h.w  s.t.  G^T w = c,  w >= 0.

    Returns ``(status, basis)`` where basis holds the indices of primal rows
    that are tight at the recovered primal solution.
    """
    n, p = c.size, G.shape[0]
    M = G.T.copy()
    rhs = c.copy()
    neg = rhs < 0
    M[neg] *= -1.0
    rhs[neg] *= -1.0
    # columns: p structural, n artificial, then the right-hand side
    full = np.zeros((n, p + n + 1))
    full[:, :p] = M
    full[:, p:p + n] = np.eye(n)
    full[:, -1] = rhs
    cost1 = np.concatenate([np.zeros(p), np.ones(n)])
    cost2 = np.concatenate([h, np.zeros(n)])

    tab = _Tableau(full, list(range(p, p + n)), cost1)
    allowed = np.ones(p + n, dtype=bool)
    if tab.run(allowed) != "optimal":
        raise RuntimeError("simplex phase 1 reported unbounded")
    if -tab.T[-1, -1] > _PHASE1_TOL * max(1.0, rhs.sum()):
        return "dual_infeasible", None
    tab.drive_out_artificials(p)

    allowed[p:] = False
    tab.set_cost(cost2)
    status = tab.run(allowed)
    if status == "unbounded":
        return "dual_unbounded", None
    return "optimal", sorted(int(b) for b in tab.basis)


class _Tableau:
    """Dense tableau; last row holds reduced costs and minus the objective."""

    def __init__(self, full, basis, cost):
        self.full = full
        self.rows = list(range(full.shape[0]))
        self.basis = list(basis)
        self.cost = cost
        self.since_reinvert = 0
        self.T = np.vstack([full, np.zeros(full.shape[1])])
        self._price()

    def _price(self):
        body = self.T[:-1]
        cb = self.cost[self.basis]
        self.T[-1, :-1] = self.cost - cb @ body[:, :-1]
        self.T[-1, -1] = -(cb @ body[:, -1])

    def set_cost(self, cost):
        self.cost = cost
        self._price()

    def reinvert(self):
        B = self.full[np.ix_(self.rows, self.basis)]
        try:
            body = np.linalg.solve(B, self.full[self.rows])
        except np.linalg.LinAlgError:
            # keep the updated tableau; it is still a valid (if noisier) basis
            self.since_reinvert = 0
            return
        body[:, -1] = np.maximum(body[:, -1], 0.0)
        self.T = np.vstack([body, np.zeros(body.shape[1])])
        self._price()
        self.since_reinvert = 0

    def pivot(self, r, col):
        T = self.T
        T[r] /= T[r, col]
        f = T[:, col].copy()
        f[r] = 0.0
        T -= np.outer(f, T[r])
        T[:, col] = 0.0
        T[r, col] = 1.0
        self.basis[r] = col
        self.since_reinvert += 1
        if self.since_reinvert >= _REINVERT_EVERY:
            self.reinvert()

    def run(self, allowed) -> str:
        bland = False
        stall = 0
        best = self.T[-1, -1]
        skip = np.zeros_like(allowed)
        for _ in range(_MAX_PIVOTS):
            d = self.T[-1, :-1]
            cand = allowed & ~skip & (d < -_REDUCED_COST_TOL)
            if not cand.any():
                if self.since_reinvert:
                    self.reinvert()
                    skip[:] = False
                    d = self.T[-1, :-1]
                    cand = allowed & (d < -_REDUCED_COST_TOL)
                if not cand.any():
                    return "optimal"
            if bland:
                col = int(np.flatnonzero(cand)[0])
            else:
                col = int(np.argmin(np.where(cand, d, np.inf)))
            column = self.T[:-1, col]
            pos = column > _PIVOT_TOL
            if not pos.any():
                if d[col] < -_UNBOUNDED_RC_TOL:
                    return "unbounded"
                # reduced cost is rounding noise on a column with no usable pivot
                skip[col] = True
                continue
            skip[:] = False
            # Harris two-pass ratio test: bound the step with a small feasibility
            # tolerance, then take the largest pivot among rows within that bound
            b = np.maximum(self.T[:-1, -1], 0.0)
            step = np.min((b[pos] + _HARRIS_TOL) / column[pos])
            ratios = np.full(column.size, np.inf)
            ratios[pos] = b[pos] / column[pos]
            ties = np.flatnonzero(pos & (ratios <= step))
            ties = ties[column[ties] >= 1e-3 * column[ties].max()]
            if bland:
                r = int(min(ties, key=lambda i: self.basis[i]))
            else:
                r = int(ties[np.argmax(column[ties])])
            self.pivot(r, col)
            obj = self.T[-1, -1]
            # objective row stores -value, so progress means it increases
            if obj > best + 1e-13 * max(1.0, abs(best)):
                best = obj
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= _STALL_LIMIT:
                    bland = True
        raise RuntimeError("simplex pivot limit reached")

    def drive_out_artificials(self, p):
        i = 0
        while i < len(self.basis):
            if self.basis[i] < p:
                i += 1
                continue
            row = self.T[i, :p]
            j = int(np.argmax(np.abs(row))) if p else 0
            if p and abs(row[j]) > 1e-9:
                self.pivot(i, j)
                i += 1
            else:
                # redundant equality row of the dual
                self.T = np.delete(self.T, i, axis=0)
                del self.basis[i]
                del self.rows[i]
        self.reinvert()


# --------------------------------------------------------------------------
# HiGHS


# HiGHS occasionally stops with an unset status on badly scaled learner
# programs; the next configuration in this list is tried when that happens
# IPM with crossover first: dual simplex can stall for minutes on badly scaled
# learner programs that IPM finishes in seconds
_HIGHS_ATTEMPTS = (("highs-ipm", 1e-10, True), ("highs-ds", 1e-10, True),
                   ("highs-ds", 1e-10, False), ("highs-ds", 1e-9, True))


def _solve_highs(lp: LinearProgram, tol_feas) -> LpOutcome:
    A_ub = _scaled(lp.A_ub, lp.b_ub)
    A_eq = _scaled(lp.A_eq, lp.b_eq)
    bounds = np.column_stack([lp.lower, lp.upper])
    bounds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
              for lo, hi in bounds]
    messages = []
    for method, tol, presolve in _HIGHS_ATTEMPTS:
        res = linprog(-lp.objective,
                      A_ub=A_ub[0] if A_ub[1].size else None, b_ub=A_ub[1] if A_ub[1].size else None,
                      A_eq=A_eq[0] if A_eq[1].size else None, b_eq=A_eq[1] if A_eq[1].size else None,
                      bounds=bounds, method=method,
                      options={"primal_feasibility_tolerance": tol,
                               "dual_feasibility_tolerance": tol,
                               "presolve": presolve})
        if res.status == 0:
            x = np.asarray(res.x, dtype=float)
            if lp.max_violation(x) <= tol_feas:
                return LpOutcome(LpStatus.OPTIMAL, x, float(lp.objective @ x))
            messages.append(f"{method}: solution violates constraints")
            continue
        if res.status == 2:
            return LpOutcome(LpStatus.INFEASIBLE)
        if res.status == 3:
            return LpOutcome(LpStatus.UNBOUNDED)
        messages.append(f"{method}: {res.message}")
    raise RuntimeError("HiGHS failed: " + "; ".join(messages))


def _scaled(A, b):
    if b.size == 0:
        return A, b
    scale = _row_scale(A)
    if sp.issparse(A):
        return sp.diags(scale) @ A, b * scale
    return A * scale[:, None], b * scale
