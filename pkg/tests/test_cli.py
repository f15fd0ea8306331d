import json
import math
import subprocess
import sys

import numpy as np
import pytest

from polylyap import io
from polylyap.benchmarks import linf_function, mass_spring, pi_gamma, running_example
from polylyap.cli import main
from polylyap.learner import SynthesisParams
from polylyap.polyhedral import PolyhedralFunction
from polylyap.simulate import integrate

from oracles import halfplane_vertices


@pytest.fixture
def files(tmp_path):
    def path(name):
        return str(tmp_path / name)
    return path


def test_system_round_trip(files):
    for sys_ in (running_example(), mass_spring(), pi_gamma(3, 0.1, 2)[0]):
        io.write_system(sys_, files("s.json"))
        back = io.read_system(files("s.json"))
        for a, b in zip(sys_.modes, back.modes):
            np.testing.assert_array_equal(a.matrix, b.matrix)
            np.testing.assert_array_equal(a.region.normals, b.region.normals)


def test_certificate_round_trip_is_exact(files):
    rng = np.random.default_rng(0)
    V = PolyhedralFunction(rng.normal(size=(30, 3)) / 7.0)
    io.write_certificate(files("c.json"), V, params=SynthesisParams(10, 0.25, 0.05),
                         iterations=3, witness_count=9)
    back = io.read_certificate(files("c.json"))
    assert back.pieces.tobytes() == V.pieces.tobytes()
    doc = io.load_json(files("c.json"))
    assert doc["meta"] == {"iterations": 3, "witness_count": 9}
    assert io.certificate_params(doc) == SynthesisParams(10, 0.25, 0.05)


def test_system_parse_errors():
    with pytest.raises(io.FormatError):
        io.system_from_dict({"dimension": 2, "modes": [{"matrix": [[1, 0]]}]})
    with pytest.raises(io.FormatError):
        io.system_from_dict({"dimension": 0, "modes": []})
    with pytest.raises(io.FormatError):
        io.system_from_dict({"dimension": 2, "modes": [{"matrix": [[1, 0], [0, 1]],
                                                       "region": [{"normal": [1, 0], "sense": "gt"}]}]})
    leq = io.system_from_dict({"dimension": 2, "modes": [{"matrix": [[1, 0], [0, 1]],
                                                         "region": [{"normal": [0, 2], "sense": "leq0"}]}]})
    np.testing.assert_array_equal(leq.modes[0].region.normals, [[0, -1]])


def test_trajectory_lines():
    traj = integrate(running_example(), [0.0, 1.0], 0.1, 2)
    lines = list(io.trajectory_lines(traj))
    assert len(lines) == 3
    t, x1, x2, q = lines[1].split()
    assert float(t) == 0.1 and q == "0"
    assert float(x1) == traj.states[1][0]  # 17 significant digits round-trip


def test_bench_and_bound(files, capsys):
    assert main(["bench", "running", "--out", files("r.json")]) == 0
    assert main(["bound", files("r.json"), "--epsilon", "10", "--theta", "0.25", "--delta", "0.05"]) == 0
    out = capsys.readouterr().out
    assert "rbar: 0.0054347826086956" in out
    assert main(["bound", files("r.json"), "--epsilon", "1", "--theta", "1e6", "--delta", "1e6"]) == 0
    assert "rbar: 1\n" in capsys.readouterr().out


def test_bound_overflow(files, capsys):
    sys_, _ = pi_gamma(400, 0.1)
    io.write_system(sys_, files("big.json"))
    assert main(["bound", files("big.json"), "--epsilon", "1e6", "--theta", "1e-6", "--delta", "1e-6"]) == 0
    assert "pack_bound (upper estimate): inf" in capsys.readouterr().out


def test_synth_refuted(files, capsys):
    main(["bench", "running", "--out", files("r.json")])
    code = main(["synth", files("r.json"), "--epsilon", "10", "--theta", "0.25", "--delta", "0.1",
                 "--log", files("log.jsonl"), "--out", files("cert.json")])
    assert code == 2
    assert "status: refuted" in capsys.readouterr().out
    records = [json.loads(line) for line in open(files("log.jsonl"))]
    assert records[-1]["learner_status"] == "infeasible"
    assert set(records[0]) == {"k", "witness_count", "learner_status", "learner_slack", "counterexample"}
    assert set(records[0]["counterexample"]) >= {"vector", "kind", "magnitude"}


def test_synth_success_then_verify(files, capsys):
    main(["bench", "running", "--out", files("r.json")])
    code = main(["synth", files("r.json"), "--epsilon", "10", "--theta", "0.125", "--delta", "0.01",
                 "--max-iter", "300", "--out", files("cert.json")])
    assert code == 0
    assert main(["verify", files("r.json"), files("cert.json")]) == 0
    assert main(["levelset", files("cert.json"), "--out", files("poly.txt")]) == 0
    verts = io.read_polygon(open(files("poly.txt")))
    ref = halfplane_vertices(io.read_certificate(files("cert.json")).pieces)
    assert len(verts) == len(ref)


def test_synth_budget(files):
    main(["bench", "running", "--out", files("r.json")])
    assert main(["synth", files("r.json"), "--epsilon", "10", "--theta", "0.25", "--delta", "0.05",
                 "--max-iter", "2"]) == 3


def test_verify_exit_codes(files, capsys):
    main(["bench", "pi-gamma", "--d", "3", "--gamma", "0.1", "--out", files("p.json"),
          "--oracle-out", files("o.json")])
    assert main(["verify", files("p.json"), files("o.json")]) == 0
    main(["bench", "pi-gamma", "--d", "3", "--gamma", "-0.1", "--out", files("n.json")])
    capsys.readouterr()
    assert main(["verify", files("n.json"), files("o.json")]) == 2
    assert "state:" in capsys.readouterr().out
    io.write_certificate(files("sq.json"), linf_function(2))
    assert main(["verify", files("p.json"), files("sq.json")]) == 1


def test_parse_failures(files):
    open(files("bad.json"), "w").write("{not json")
    assert main(["verify", files("bad.json"), files("bad.json")]) == 1
    assert main(["synth", files("missing.json"), "--epsilon", "10", "--theta", "1", "--delta", "1"]) == 1
    main(["bench", "running", "--out", files("r.json")])
    assert main(["synth", files("r.json"), "--epsilon", "0.5", "--theta", "1", "--delta", "1"]) == 1
    assert main(["nonsense"]) == 1
    assert main([]) == 1


def test_levelset(files, capsys):
    io.write_certificate(files("sq.json"), linf_function(2))
    assert main(["levelset", files("sq.json")]) == 0
    out = capsys.readouterr().out.split("\n")
    assert out[:4] == ["-1 -1", "1 -1", "1 1", "-1 1"]
    io.write_certificate(files("empty.json"), PolyhedralFunction([], 2))
    assert main(["levelset", files("empty.json")]) == 1
    io.write_certificate(files("open.json"), PolyhedralFunction([[1.0, 0.0]]))
    assert main(["levelset", files("open.json")]) == 1
    io.write_certificate(files("three.json"), linf_function(3))
    assert main(["levelset", files("three.json")]) == 1


def test_simulate_command(files, capsys):
    main(["bench", "running", "--out", files("r.json")])
    io.write_certificate(files("sq.json"), linf_function(2))
    assert main(["simulate", files("r.json"), "--x0", "0,1", "--h", "0.01", "--steps", "10",
                 "--cert", files("sq.json"), "--out", files("t.txt")]) == 0
    assert "max_increase:" in capsys.readouterr().out
    rows = [line.split() for line in open(files("t.txt"))]
    assert len(rows) == 11 and all(len(r) == 4 for r in rows)
    assert main(["simulate", files("r.json"), "--x0", "0,1,2", "--h", "0.01", "--steps", "1",
                 "--out", files("t.txt")]) == 1


def test_module_entry_point(files):
    res = subprocess.run([sys.executable, "-m", "polylyap", "bench", "running", "--out", files("r.json")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert io.read_system(files("r.json")).dimension == 2


def test_exit_codes_are_deterministic(files):
    main(["bench", "running", "--out", files("r.json")])
    args = ["synth", files("r.json"), "--epsilon", "10", "--theta", "0.25", "--delta", "0.1",
            "--seed", "3", "--log", files("l.jsonl")]
    codes = set()
    logs = set()
    for _ in range(2):
        codes.add(main(args))
        logs.add(open(files("l.jsonl")).read())
    assert codes == {2} and len(logs) == 1


def test_fmt_is_17_digits():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert float(io.fmt(math.pi)) == math.pi
