import numpy as np
import pytest

from polylyap import lp
from polylyap.benchmarks import linf_function, pi_gamma, running_example
from polylyap.learner import SynthesisParams, WitnessSet, learn
from polylyap.polyhedral import EmptyFunction, PolyhedralFunction
from polylyap.system import ConicRegion, Mode, PwlSystem
from polylyap.verifier import (TOL_VIOLATION, ViolationKind, check_decrease, check_positivity,
                               decrease_lp, find_counterexample)

from oracles import grid_worst_violation


def is_violation(system, V, cex, tol=1e-7):
    """Re-check a counterexample from its state alone."""
    x = cex.state
    if cex.kind is ViolationKind.POSITIVITY:
        return V(x) <= TOL_VIOLATION and np.abs(x).max() >= 1 - 1e-9
    c = V.pieces[cex.piece]
    return (system.modes[cex.mode].region.contains(x, 1e-9)
            and abs(c @ x - V(x)) <= tol * max(1.0, V(x))
            and c @ system.modes[cex.mode].matrix @ x >= -tol)


def test_positivity():
    assert check_positivity(linf_function(2)) is None
    assert check_positivity(PolyhedralFunction(0.5 * linf_function(3).pieces)) is None
    cex = check_positivity(PolyhedralFunction([[1.0, 0.0]]))
    assert cex is not None and cex.kind is ViolationKind.POSITIVITY
    assert cex.state[0] <= 0 and np.abs(cex.state).max() == 1.0
    with pytest.raises(EmptyFunction):
        check_positivity(PolyhedralFunction([], 2))


def test_decrease_stable_identity():
    sys_ = PwlSystem.from_matrices([-np.eye(2)])
    assert check_decrease(sys_, linf_function(2)) is None
    assert find_counterexample(sys_, linf_function(2)) is None


def test_ten_witness_candidate_violations():
    sys_ = running_example()
    ang = 2 * np.pi * np.arange(10) / 10
    X = WitnessSet(sys_, np.column_stack([np.cos(ang), np.sin(ang)]))
    V = learn(sys_, X, SynthesisParams(10, 0.25, 0.05)).function
    cex = find_counterexample(sys_, V)
    assert cex is not None and cex.kind is ViolationKind.DECREASE and cex.magnitude >= 0
    assert is_violation(sys_, V, cex)
    # the reported region: some lower-half-plane facet fails near this direction
    target = np.array([-0.62, -0.85])
    hits = []
    for j in range(len(V)):
        res = lp.solve(decrease_lp(sys_, V, j, 1))
        if res.optimal and res.objective_value >= 0:
            x = res.solution / np.linalg.norm(res.solution)
            hits.append(np.abs(x - target).max())
    assert min(hits) <= 0.15


@pytest.mark.parametrize("u_seed", [None, 3])
def test_pi_gamma_unstable_direction(u_seed):
    sys_, oracle = pi_gamma(3, -0.5, u_seed)
    cex = check_decrease(sys_, oracle)
    assert cex is not None and cex.magnitude >= 1e-6
    U = np.eye(3) if u_seed is None else None
    if U is not None:
        x = cex.state / np.abs(cex.state).max()
        assert np.allclose(np.abs(x), 1.0, atol=1e-9) and abs(x.sum()) == pytest.approx(3.0)


def test_counterexamples_are_homogeneous():
    sys_, oracle = pi_gamma(2, -0.1)
    cex = find_counterexample(sys_, oracle)
    for lam in (2.0, 0.5):
        scaled = type(cex)(lam * cex.state, cex.kind, cex.magnitude, cex.mode, cex.piece)
        assert is_violation(sys_, oracle, scaled)


def test_infeasible_facet_is_skipped():
    # piece -e1 can never be active for V = max(e1, -e1/10, ...) inside x1 >= 0
    sys_ = PwlSystem([Mode(ConicRegion([[1.0, 0.0]], 2), -np.eye(2))])
    V = PolyhedralFunction([[1.0, 0.0], [-0.1, 0.0], [0.0, 1.0], [0.0, -1.0]])
    assert check_decrease(sys_, V) is None


def random_pair(rng):
    d = int(rng.integers(2, 4))
    n_modes = int(rng.integers(1, 3))
    split = rng.normal(size=d) if n_modes == 2 and rng.random() < 0.7 else None
    modes = []
    for q in range(n_modes):
        A = -rng.uniform(0.2, 2.0) * np.eye(d) + rng.normal(scale=rng.uniform(0.1, 1.5), size=(d, d))
        normals = [] if split is None else [split if q == 0 else -split]
        modes.append(Mode(ConicRegion(normals, d), A))
    k = int(rng.integers(0, 5))
    pieces = [s * rng.uniform(0.3, 1.0) * e for e in np.eye(d) for s in (1.0, -1.0)]
    pieces += list(rng.normal(size=(k, d)) * 0.5)
    if rng.random() < 0.15:
        pieces = pieces[1:]  # usually breaks positivity
    return PwlSystem(modes), PolyhedralFunction(np.array(pieces))


def grid_equivalence(count=50, seed=0, threshold=1e-6):
    """Inconsistencies between the verifier and a 0.01 sphere grid on random pairs."""
    rng = np.random.default_rng(seed)
    bad = []
    verdicts = {"valid": 0, "positivity": 0, "decrease": 0}
    for i in range(count):
        sys_, V = random_pair(rng)
        cex = find_counterexample(sys_, V)
        pos, dec = grid_worst_violation(sys_, V.pieces, 0.01)
        grid_violates = pos > threshold or dec > threshold
        verdicts["valid" if cex is None else cex.kind.value] += 1
        if cex is None and grid_violates:
            bad.append((i, "missed", pos, dec))
        if cex is not None and not is_violation(sys_, V, cex):
            bad.append((i, "spurious", cex.kind.value, cex.magnitude))
    return bad, verdicts


def test_grid_equivalence_small():
    bad, verdicts = grid_equivalence(count=12, seed=11)
    assert bad == []
    assert verdicts["valid"] > 0 and verdicts["decrease"] > 0
