"""File formats: systems and certificates as JSON, trajectories and polygons as text."""
from __future__ import annotations

import json
import math
from typing import IO, Iterable, List, Optional

import numpy as np

from polylyap.learner import SynthesisParams
from polylyap.polyhedral import PolyhedralFunction
from polylyap.simulate import Trajectory
from polylyap.system import ConicRegion, Mode, PwlSystem

FLOAT_FMT = "%.17g"


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return FLOAT_FMT % x


def _matrix(obj, rows: int, cols: int, what: str) -> np.ndarray:
    try:
        A = np.array(obj, dtype=float)
    except (TypeError, ValueError) as e:
        raise FormatError(f"{what}: not a numeric array") from e
    if A.shape != (rows, cols) or not np.all(np.isfinite(A)):
        raise FormatError(f"{what}: expected a finite {rows}x{cols} array, got shape {A.shape}")
    return A


def _dimension(doc) -> int:
    if not isinstance(doc, dict):
        raise FormatError("top-level value must be an object")
    d = doc.get("dimension")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise FormatError("'dimension' must be a positive integer")
    return d


def system_to_dict(system: PwlSystem) -> dict:
    # region normals are stored normalised, which leaves the cone unchanged
    return {"dimension": system.dimension,
            "modes": [{"matrix": m.matrix.tolist(),
                       "region": [{"normal": n.tolist(), "sense": "geq0"} for n in m.region.normals]}
                      for m in system.modes]}


def system_from_dict(doc) -> PwlSystem:
    d = _dimension(doc)
    modes = doc.get("modes")
    if not isinstance(modes, list) or not modes:
        raise FormatError("'modes' must be a nonempty list")
    out = []
    for q, m in enumerate(modes):
        if not isinstance(m, dict) or "matrix" not in m:
            raise FormatError(f"mode {q}: missing 'matrix'")
        A = _matrix(m["matrix"], d, d, f"mode {q} matrix")
        normals = []
        for h in m.get("region", []):
            if not isinstance(h, dict) or "normal" not in h:
                raise FormatError(f"mode {q}: region entries need a 'normal'")
            sense = h.get("sense", "geq0")
            n = _matrix([h["normal"]], 1, d, f"mode {q} normal")[0]
            if sense == "leq0":
                n = -n
            elif sense != "geq0":
                raise FormatError(f"mode {q}: unknown sense {sense!r}")
            if not np.any(n):
                raise FormatError(f"mode {q}: zero normal")
            normals.append(n)
        out.append(Mode(ConicRegion(normals, d), A))
    return PwlSystem(out)


def certificate_to_dict(V: PolyhedralFunction, params: Optional[SynthesisParams] = None,
                        iterations: Optional[int] = None, witness_count: Optional[int] = None) -> dict:
    return {"dimension": V.dimension,
            "pieces": V.pieces.tolist(),
            "params": params.as_dict() if params else None,
            "meta": {"iterations": iterations, "witness_count": witness_count}}


def certificate_from_dict(doc) -> PolyhedralFunction:
    d = _dimension(doc)
    pieces = doc.get("pieces")
    if not isinstance(pieces, list):
        raise FormatError("'pieces' must be a list")
    P = _matrix(pieces, len(pieces), d, "pieces") if pieces else np.zeros((0, d))
    return PolyhedralFunction(P, d)


def certificate_params(doc) -> Optional[SynthesisParams]:
    p = doc.get("params") if isinstance(doc, dict) else None
    if not p:
        return None
    try:
        return SynthesisParams(float(p["epsilon"]), float(p["theta"]), float(p["delta"]))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"bad params: {e}") from e


def load_json(path: str):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e}") from e


def dump_json(doc, path: str):
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, allow_nan=False)
        f.write("\n")


def read_system(path: str) -> PwlSystem:
    return system_from_dict(load_json(path))


def write_system(system: PwlSystem, path: str):
    dump_json(system_to_dict(system), path)


def read_certificate(path: str) -> PolyhedralFunction:
    return certificate_from_dict(load_json(path))


def write_certificate(path: str, V: PolyhedralFunction, **kw):
    dump_json(certificate_to_dict(V, **kw), path)


def run_log_lines(records) -> Iterable[str]:
    """One JSON object per iteration record."""
    for rec in records:
        doc = rec.as_dict()
        slack = doc["learner_slack"]
        if slack is not None and not math.isfinite(slack):
            doc["learner_slack"] = None
        yield json.dumps(doc)


def trajectory_lines(traj: Trajectory) -> Iterable[str]:
    """``t x_1 ... x_d mode`` per state; the last state repeats the last mode (-1 if none)."""
    modes = list(traj.mode_choices)
    modes.append(modes[-1] if modes else -1)
    for t, x, q in zip(traj.times, traj.states, modes):
        yield " ".join([fmt(t), *(fmt(v) for v in x), str(q)])


def polygon_lines(vertices: np.ndarray) -> Iterable[str]:
    for v in vertices:
        yield " ".join(fmt(c) for c in v)


def write_lines(lines: Iterable[str], path: str):
    with open(path, "w") as f:
        for line in lines:
            f.write(line + "\n")


def read_polygon(stream: IO[str]) -> np.ndarray:
    rows: List[List[float]] = [[float(t) for t in line.split()] for line in stream if line.strip()]
    return np.array(rows).reshape(-1, 2)
