"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 negative result
(refuted, or a counterexample found), 3 iteration budget exhausted.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from typing import List, Optional

import numpy as np

from polylyap import benchmarks, io
from polylyap.cegis import (OutcomeStatus, StalledLoop, axis_witnesses, synthesize,
                            termination_bound)
from polylyap.learner import SynthesisParams
from polylyap.polyhedral import EmptyFunction
from polylyap.simulate import CoverageGap, check_decrease_along, integrate
from polylyap.system import DimensionMismatch
from polylyap.verifier import find_counterexample

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_BUDGET = 0, 1, 2, 3

fmt = io.fmt


class UsageError(Exception):
    pass


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError as e:
        raise UsageError(f"cannot parse vector {text!r}") from e


def _params(args) -> SynthesisParams:
    try:
        return SynthesisParams(args.epsilon, args.theta, args.delta)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _bound_lines(system, params) -> List[str]:
    diag = termination_bound(system, params)
    pack = "inf" if math.isinf(diag.pack_bound) else fmt(diag.pack_bound)
    return [f"rbar: {fmt(diag.rbar)}", f"pack_bound (upper estimate): {pack}"]


def cmd_synth(args) -> int:
    system = io.read_system(args.system)
    params = _params(args)
    init = axis_witnesses(system.dimension) if args.init_witnesses == "axis" else []
    try:
        out = synthesize(system, params, max_iterations=args.max_iter, initial_witnesses=init,
                         backend=args.backend, seed=args.seed)
    except StalledLoop as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.log:
        io.write_lines(io.run_log_lines(out.log), args.log)
    print(f"status: {out.status.value}")
    print(f"iterations: {out.iterations}")
    print(f"witnesses: {len(out.witnesses)}")
    for line in _bound_lines(system, params):
        print(line)
    print(f"wall_time_s: {out.elapsed:.3f}")
    if out.status is OutcomeStatus.SUCCESS:
        V = out.certificate
        print(f"pieces: {len(V)}")
        print(f"eccentricity: {fmt(V.eccentricity(args.backend))}")
        if args.out:
            io.write_certificate(args.out, V, params=params, iterations=out.iterations,
                                 witness_count=len(out.witnesses))
        return EXIT_OK
    if out.status is OutcomeStatus.REFUTED:
        last = out.log[-1]
        print(f"refuted: no polyhedral Lyapunov function with eccentricity {fmt(params.epsilon)}"
              f" and robustness ({fmt(params.theta)}, {fmt(params.delta)}) exists")
        print(f"learner slack: {fmt(last.learner_slack)}")
        return EXIT_NEGATIVE
    return EXIT_BUDGET


def cmd_verify(args) -> int:
    system = io.read_system(args.system)
    V = io.read_certificate(args.certificate)
    if V.dimension != system.dimension:
        raise UsageError(f"certificate dimension {V.dimension} != system dimension {system.dimension}")
    if V.is_empty:
        raise UsageError("certificate has no pieces")
    cex = find_counterexample(system, V, backend=args.backend)
    if cex is None:
        print("valid")
        return EXIT_OK
    print(f"counterexample: {cex.kind.value}")
    print("state: " + " ".join(fmt(v) for v in cex.state))
    print(f"magnitude: {fmt(cex.magnitude)}")
    if cex.mode is not None:
        print(f"mode: {cex.mode} piece: {cex.piece}")
    return EXIT_NEGATIVE


def cmd_levelset(args) -> int:
    V = io.read_certificate(args.certificate)
    if V.dimension != 2:
        raise UsageError("levelset needs a 2-dimensional certificate")
    try:
        verts = V.sublevel_polygon()
    except (EmptyFunction, ValueError) as e:
        raise UsageError(str(e)) from e
    lines = list(io.polygon_lines(verts))
    if args.out:
        io.write_lines(lines, args.out)
    else:
        print("\n".join(lines))
    return EXIT_OK


def cmd_bound(args) -> int:
    system = io.read_system(args.system)
    for line in _bound_lines(system, _params(args)):
        print(line)
    return EXIT_OK


def cmd_simulate(args) -> int:
    system = io.read_system(args.system)
    x0 = _vector(args.x0)
    if x0.shape != (system.dimension,):
        raise UsageError(f"x0 must have {system.dimension} entries")
    if not args.h > 0 or args.steps < 0:
        raise UsageError("need h > 0 and steps >= 0")
    policy = args.mode if args.mode is not None else args.policy
    try:
        traj = integrate(system, x0, args.h, args.steps, policy=policy, seed=args.seed)
    except CoverageGap as e:
        print(f"coverage gap at step {e.step}: " + " ".join(fmt(v) for v in e.state), file=sys.stderr)
        return EXIT_USAGE
    io.write_lines(io.trajectory_lines(traj), args.out)
    print("final: " + " ".join(fmt(v) for v in traj.final))
    if args.cert:
        V = io.read_certificate(args.cert)
        if V.dimension != system.dimension or V.is_empty:
            raise UsageError("certificate is empty or has the wrong dimension")
        print(f"max_increase: {fmt(check_decrease_along(V, traj).max_increase)}")
    return EXIT_OK


def cmd_bench(args) -> int:
    oracle = None
    if args.name == "running":
        system = benchmarks.running_example()
    elif args.name == "zelentsovsky":
        system = benchmarks.zelentsovsky(args.alpha)
    elif args.name == "mass-spring":
        system = benchmarks.mass_spring()
    else:
        system, oracle = benchmarks.pi_gamma(args.d, args.gamma, args.u_seed)
    io.write_system(system, args.out)
    if args.oracle_out:
        if oracle is None:
            raise UsageError(f"benchmark {args.name} has no oracle")
        io.write_certificate(args.oracle_out, oracle)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polylyap", description="Polyhedral Lyapunov function synthesis.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--backend", choices=["auto", "simplex", "highs"], default="auto",
                   help="LP backend")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def params(sp):
        sp.add_argument("--epsilon", type=float, required=True)
        sp.add_argument("--theta", type=float, required=True)
        sp.add_argument("--delta", type=float, required=True)

    sp = sub.add_parser("synth", help="run the learner/verifier loop")
    sp.add_argument("system")
    params(sp)
    sp.add_argument("--max-iter", type=int, default=10_000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--init-witnesses", choices=["axis", "none"], default="axis")
    sp.add_argument("--out", help="certificate file written on success")
    sp.add_argument("--log", help="per-iteration log, one JSON object per line")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("verify", help="check a certificate over the whole state space")
    sp.add_argument("system")
    sp.add_argument("certificate")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("levelset", help="vertices of the 1-sublevel set (d = 2)")
    sp.add_argument("certificate")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_levelset)

    sp = sub.add_parser("bound", help="separation radius and iteration bound")
    sp.add_argument("system")
    params(sp)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("simulate", help="fixed-step RK4 trajectory")
    sp.add_argument("system")
    sp.add_argument("--x0", required=True, help="comma separated initial state")
    sp.add_argument("--h", type=float, required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--policy", choices=["first", "random"], default="first")
    sp.add_argument("--mode", type=int, default=None, help="force one mode on every step")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--cert")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("bench", help="write a built-in benchmark system")
    sp.add_argument("name", choices=["running", "zelentsovsky", "mass-spring", "pi-gamma"])
    sp.add_argument("--alpha", type=float, default=6.0)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--gamma", type=float, default=0.1)
    sp.add_argument("--u-seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.add_argument("--oracle-out")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, io.FormatError, DimensionMismatch, EmptyFunction, OSError,
            ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
