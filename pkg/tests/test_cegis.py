import math

import numpy as np
import pytest

from polylyap.benchmarks import pi_gamma, running_example
from polylyap.cegis import (OutcomeStatus, StalledLoop, TerminationDiagnostics, axis_witnesses,
                            run_trace_check, separation_radius, synthesize, termination_bound)
from polylyap.learner import SynthesisParams, WitnessSet, learn
from polylyap.system import PwlSystem
from polylyap.verifier import find_counterexample


def test_axis_witnesses():
    np.testing.assert_array_equal(axis_witnesses(2), [[1, 0], [-1, 0], [0, 1], [0, -1]])


def test_stable_identity_succeeds():
    sys_ = PwlSystem.from_matrices([-np.eye(2)])
    p = SynthesisParams(2, 0.5, 0.1)
    out = synthesize(sys_, p, 50)
    assert out.status is OutcomeStatus.SUCCESS and out.success
    assert out.iterations <= 10
    assert find_counterexample(sys_, out.certificate) is None
    assert run_trace_check(sys_, p, out.witnesses, out.n_initial).ok


def test_bootstrap_adds_e1():
    sys_ = PwlSystem.from_matrices([-np.eye(3)])
    out = synthesize(sys_, SynthesisParams(2, 0.5, 0.1), 1)
    assert out.status is OutcomeStatus.BUDGET and out.iterations == 1
    np.testing.assert_array_equal(out.witnesses, [[1.0, 0.0, 0.0]])
    assert out.log[0].learner_slack is None


def test_unstable_system_refuted():
    sys_ = PwlSystem.from_matrices([np.eye(2)])
    out = synthesize(sys_, SynthesisParams(2, 0.5, 0.1), 50)
    assert out.status is OutcomeStatus.REFUTED
    assert out.log[-1].learner_status == "infeasible"


def test_refutation_is_monotone():
    sys_ = running_example()
    p = SynthesisParams(10, 0.25, 0.1)
    out = synthesize(sys_, p, 200, axis_witnesses(2))
    assert out.status is OutcomeStatus.REFUTED
    rng = np.random.default_rng(0)
    X = WitnessSet(sys_, out.witnesses)
    for _ in range(3):
        X = X.extended(rng.normal(size=2))
        assert not learn(sys_, X, p).feasible


def test_budget_and_validation():
    with pytest.raises(ValueError):
        synthesize(running_example(), SynthesisParams(10, 0.25, 0.05), 0)
    out = synthesize(running_example(), SynthesisParams(10, 0.25, 0.05), 3, axis_witnesses(2))
    assert out.status is OutcomeStatus.BUDGET and out.iterations == 3
    assert len(out.witnesses) == 4 + 3


def test_witnesses_grow_by_one_and_are_normalised():
    out = synthesize(running_example(), SynthesisParams(10, 0.25, 0.1), 200)
    counts = [r.witness_count for r in out.log]
    assert counts == list(range(len(counts)))
    assert np.allclose(np.abs(out.witnesses).max(axis=1), 1.0, atol=1e-15)


def test_stalled_loop(monkeypatch):
    import polylyap.cegis as cegis
    from polylyap.verifier import Counterexample, ViolationKind

    monkeypatch.setattr(cegis, "find_counterexample",
                        lambda *a, **k: Counterexample(np.array([2.0, 0.0]), ViolationKind.DECREASE, 1.0, 0, 0))
    with pytest.raises(StalledLoop):
        synthesize(running_example(), SynthesisParams(10, 0.25, 0.05), 5, [[1.0, 0.0]])


def test_termination_bound_values():
    diag = termination_bound(running_example(), SynthesisParams(10, 0.25, 0.05))
    assert diag.rbar == pytest.approx(0.0125 / 2.3, rel=1e-14)
    assert diag.rbar == pytest.approx(5.435e-3, abs=5e-7)
    assert diag.modes_count == 2
    assert separation_radius(SynthesisParams(1, 1e6, 1e6), 1.2) == 1.0
    two = PwlSystem.from_matrices([np.eye(2), np.eye(2)])
    assert termination_bound(two, SynthesisParams(1, 1e6, 1e6)).pack_bound == pytest.approx(18.0)


def test_termination_bound_overflow():
    sys_, _ = pi_gamma(400, 0.1)
    diag = termination_bound(sys_, SynthesisParams(1e6, 1e-6, 1e-6))
    assert isinstance(diag, TerminationDiagnostics) and math.isinf(diag.pack_bound)


def test_iterations_below_pack_bound():
    sys_ = PwlSystem.from_matrices([-np.eye(2)])
    p = SynthesisParams(1.5, 0.5, 0.5)
    bound = termination_bound(sys_, p).pack_bound
    assert bound < 1e6
    assert synthesize(sys_, p, 100).iterations <= bound


def test_trace_check():
    sys_ = running_example()
    p = SynthesisParams(10, 0.25, 0.05)
    assert run_trace_check(sys_, p, [[1.0, 0.0]]).ok
    out = synthesize(sys_, p, 200, axis_witnesses(2))
    assert run_trace_check(sys_, p, out.witnesses, out.n_initial).ok
    W = np.vstack([out.witnesses, out.witnesses[-1] + [1e-4, 0.0]])
    report = run_trace_check(sys_, p, W, out.n_initial)
    assert report.violations == [len(W) - 1]


def test_callback_sees_every_iteration():
    seen = []
    out = synthesize(running_example(), SynthesisParams(10, 0.25, 0.1), 200, axis_witnesses(2),
                     callback=lambda rec, X: seen.append((rec.k, len(X))))
    assert [k for k, _ in seen] == list(range(out.iterations))
    assert all(n == r.witness_count for (_, n), r in zip(seen, out.log))
