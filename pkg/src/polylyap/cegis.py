"""Learner/verifier loop and its termination diagnostics."""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from polylyap.learner import (WITNESS_DUP_TOL, WITNESS_REGION_TOL, LearnResult,
                              SynthesisParams, WitnessSet, learn)
from polylyap.polyhedral import PolyhedralFunction
from polylyap.system import PwlSystem, primal_norm
from polylyap.verifier import Counterexample, ViolationKind, find_counterexample

log = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 10_000


class StalledLoop(RuntimeError):
    """The verifier returned a state that is already a witness."""


class OutcomeStatus(enum.Enum):
    SUCCESS = "success"
    REFUTED = "refuted"
    BUDGET = "budget"


@dataclass
class IterationRecord:
    k: int
    witness_count: int
    learner_status: str
    learner_slack: Optional[float]
    counterexample: Optional[Counterexample]
    candidate: Optional[PolyhedralFunction] = field(default=None, repr=False)

    def as_dict(self):
        return {"k": self.k, "witness_count": self.witness_count,
                "learner_status": self.learner_status, "learner_slack": self.learner_slack,
                "counterexample": None if self.counterexample is None
                else self.counterexample.as_dict()}


@dataclass
class SynthesisOutcome:
    status: OutcomeStatus
    iterations: int
    witnesses: np.ndarray
    n_initial: int
    certificate: Optional[PolyhedralFunction] = None
    log: List[IterationRecord] = field(default_factory=list, repr=False)
    elapsed: float = 0.0

    @property
    def success(self) -> bool:
        return self.status is OutcomeStatus.SUCCESS


def axis_witnesses(d: int) -> List[np.ndarray]:
    """The 2d points ``+-e_i``."""
    out = []
    for i in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[i] = s
            out.append(e)
    return out


def synthesize(system: PwlSystem, params: SynthesisParams,
               max_iterations: int = DEFAULT_MAX_ITERATIONS,
               initial_witnesses: Sequence = (),
               backend: str = "auto",
               callback: Optional[Callable[[IterationRecord, WitnessSet], None]] = None,
               seed: Optional[int] = None) -> SynthesisOutcome:
    """Alternate learning and verification until success, refutation or budget.

    ``callback`` sees every iteration record (with its candidate) together
    with the witness set the candidate was learned from.  ``seed`` is
    accepted for interface stability; the loop itself is deterministic.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    start = time.perf_counter()
    X = WitnessSet(system, initial_witnesses)
    n_initial = len(X)
    records: List[IterationRecord] = []

    def finish(status, k, cert=None):
        return SynthesisOutcome(status, k, X.states, n_initial, cert, records,
                                time.perf_counter() - start)

    res: Optional[LearnResult] = None
    for k in range(max_iterations):
        res = learn(system, X, params, backend=backend, warm_start=res)
        if not res.feasible:
            rec = IterationRecord(k, len(X), "infeasible", res.slack, None)
            records.append(rec)
            if callback:
                callback(rec, X)
            log.info("iteration %d: learner infeasible (slack %.3g)", k, res.slack)
            return finish(OutcomeStatus.REFUTED, k + 1)
        V = res.function
        if V.is_empty:
            cex = Counterexample(np.eye(system.dimension)[0], ViolationKind.POSITIVITY, 0.0)
        else:
            cex = find_counterexample(system, V, backend=backend)
        rec = IterationRecord(k, len(X), "feasible", res.slack, cex, V)
        records.append(rec)
        if callback:
            callback(rec, X)
        if cex is None:
            log.info("iteration %d: certificate with %d pieces", k, len(V))
            return finish(OutcomeStatus.SUCCESS, k + 1, V)
        xbar = cex.state / primal_norm(cex.state)
        if X.contains(xbar, WITNESS_DUP_TOL):
            raise StalledLoop(f"counterexample {xbar} duplicates a witness at iteration {k}")
        log.debug("iteration %d: %s violation %.3g at %s", k, cex.kind.value, cex.magnitude, xbar)
        X = X.extended(xbar)
    return finish(OutcomeStatus.BUDGET, max_iterations)


@dataclass(frozen=True)
class TerminationDiagnostics:
    rbar: float
    pack_bound: float
    modes_count: int

    @property
    def pack_bound_is_upper_estimate(self) -> bool:
        # volumetric estimate of the packing number, never the exact value
        return True


def separation_radius(params: SynthesisParams, a_max: float) -> float:
    return min(1.0 / params.epsilon, params.theta * params.delta / (2.0 + params.theta * a_max))


def termination_bound(system: PwlSystem, params: SynthesisParams) -> TerminationDiagnostics:
    """Separation radius and the iteration bound ``|Q| (1 + 2/rbar)^d``."""
    rbar = separation_radius(params, system.a_max())
    q = len(system.modes)
    try:
        bound = q * math.pow(1.0 + 2.0 / rbar, system.dimension)
    except OverflowError:
        bound = math.inf
    return TerminationDiagnostics(rbar, bound, q)


@dataclass
class TraceReport:
    checked: int
    violations: List[int]

    @property
    def ok(self) -> bool:
        return not self.violations


def run_trace_check(system: PwlSystem, params: SynthesisParams, witnesses,
                    n_initial: int = 0, tol: float = 1e-9) -> TraceReport:
    """Check that each added witness is ``rbar``-separated from its predecessors.

    For witness ``k`` there must be a mode whose region contains it and in
    which every earlier witness is at L-infinity distance ``>= rbar - tol``.
    Returns the indices of witnesses breaking this.
    """
    W = np.asarray(witnesses, dtype=float).reshape(-1, system.dimension)
    rbar = separation_radius(params, system.a_max())
    violations = []
    start = n_initial
    for k in range(start, W.shape[0]):
        x = W[k]
        prior = W[:k]
        separated = False
        for q in system.admissible_modes(x, WITNESS_REGION_TOL):
            region = system.modes[q].region
            same = [y for y in prior if region.contains(y, WITNESS_REGION_TOL)]
            if not same or min(primal_norm(x - y) for y in same) >= rbar - tol:
                separated = True
                break
        if not separated:
            violations.append(k)
    return TraceReport(max(W.shape[0] - start, 0), violations)
