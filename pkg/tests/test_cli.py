import json
import subprocess
import sys

import numpy as np
import pytest

from sqvar.cli import dumps, main
from sqvar.problems import make_example_2_2, problem_to_dict

EX22 = problem_to_dict(make_example_2_2())


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(path)
    return write


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_certify_dss_sym_pass(files, capsys):
    code, out = run(["certify", "--formulation", "dss_sym", "--problem", files("p.json", EX22),
                     "--point", files("f.json", {"F": [[1, 0], [0, -1]]})], capsys)
    assert code == 0
    assert json.loads(out.out)["second_order"]["pass"] is True


def test_certify_bc_refuted(files, capsys):
    code, out = run(["certify", "--formulation", "bc", "--problem", files("p.json", EX22),
                     "--point", files("x.json", {"X": [[1, 0], [0, 1]]}), "--order", "2"], capsys)
    assert code == 3
    rep = json.loads(out.out)
    assert rep["first_order"]["pass"] is True
    assert np.array(rep["second_order"]["witness"]).shape == (2, 2)
    assert rep["second_order"]["lambda_min"] == pytest.approx(-1.0)


def test_certify_first_order_only(files, capsys):
    code, out = run(["certify", "--formulation", "bc", "--problem", files("p.json", EX22),
                     "--point", files("x.json", {"X": [[1, 0], [0, 1]]}), "--order", "1"], capsys)
    assert code == 0
    assert json.loads(out.out)["second_order"]["status"] == "not evaluated"


def test_certify_nsdp_and_ssv(files, capsys):
    prob = files("p.json", {"family": "example_3_1"})
    code, _ = run(["certify", "--formulation", "nsdp", "--problem", prob,
                   "--point", files("a.json", {"x": [0.0], "Lambda": [[0, 0], [0, 0]]})], capsys)
    assert code == 3
    code, _ = run(["certify", "--formulation", "ssv_sym", "--problem", prob,
                   "--point", files("b.json", {"x": [0.0], "F": [[1, 0], [0, -1]],
                                               "Lambda": [[0, 0.5], [0.5, 0]]})], capsys)
    assert code == 0


@pytest.mark.parametrize("point", [
    "{not json",
    {"X": [[1, 0], [0, 1]], "F": [[1, 0], [0, 1]]},
    {"F": [[1, 0], [0, 1]]},
    {"X": [[1, 0], [0]]},
    {"X": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]},
    {"X": [[1, 2], [0, 1]]},
])
def test_certify_usage_errors(files, capsys, point):
    code, out = run(["certify", "--formulation", "bc", "--problem", files("p.json", EX22),
                     "--point", files("x.json", point)], capsys)
    assert code == 2
    assert "error" in out.err


def test_missing_file_and_bad_family(files, capsys):
    code, _ = run(["certify", "--formulation", "bc", "--problem", "/nonexistent.json",
                   "--point", files("x.json", {"X": [[1]]})], capsys)
    assert code == 2
    code, _ = run(["certify", "--formulation", "bc", "--problem", files("p.json", {"family": "zzz"}),
                   "--point", files("x.json", {"X": [[1]]})], capsys)
    assert code == 2
    code, _ = run(["certify", "--formulation", "nsdp", "--problem", files("q.json", EX22),
                   "--point", files("y.json", {"x": [0], "Lambda": [[0]]})], capsys)
    assert code == 2


def test_argparse_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["certify", "--formulation", "nope"])
    assert exc.value.code == 2


def test_numeric_failure(files, capsys):
    # a non-PSD X cannot be factored
    code, _ = run(["lift", "--mode", "factor", "--point", files("x.json", {"X": [[1, 0], [0, -1]]})], capsys)
    assert code == 4


def test_tolerance_flags_and_env(files, capsys, monkeypatch):
    args = ["certify", "--formulation", "dss_sym", "--problem", files("p.json", EX22),
            "--point", files("f.json", {"F": [[1, 0], [0, -1]]}), "--tol-curv", "1e-3"]
    monkeypatch.setenv("SQVAR_RANK_TOL", "1e-7")
    code, out = run(args, capsys)
    tol = json.loads(out.out)["tolerances"]
    assert code == 0 and tol["curvTol"] == 1e-3 and tol["rankTol"] == 1e-7
    monkeypatch.setenv("SQVAR_RANK_TOL", "abc")
    assert run(args, capsys)[0] == 2
    monkeypatch.delenv("SQVAR_RANK_TOL")
    assert run(args[:-2] + ["--tol-feas", "-1"], capsys)[0] == 2


def test_solve_dss(files, capsys, tmp_path):
    trace = tmp_path / "trace.jsonl"
    code, out = run(["solve", "--method", "dss", "--problem", files("p.json", {"family": "example_2_1", "d": 4, "k": 4}),
                     "--seed", "7", "--width", "4", "--trace", str(trace)], capsys)
    assert code == 0
    res = json.loads(out.out)
    assert res["objective"] <= 1e-8 and res["termination"] == "SecondOrder"
    lines = trace.read_text().splitlines()
    assert json.loads(lines[-1])["termination"] == "SecondOrder"


def test_solve_dss_default_start(files, capsys):
    code, _ = run(["solve", "--method", "dss", "--problem", files("p.json", {"family": "example_2_1", "d": 4, "k": 4})],
                  capsys)
    assert code in (0, 5)


def test_solve_dss_sym_with_init(files, capsys):
    code, out = run(["solve", "--method", "dss_sym", "--problem", files("p.json", EX22),
                     "--init", files("i.json", {"F": [[1.001, 0.0005], [0.0005, -0.999]]})], capsys)
    assert code == 0
    assert json.loads(out.out)["report"]["second_order"]["pass"] is True


def test_solve_max_iter(files, capsys):
    code, _ = run(["solve", "--method", "dss", "--problem", files("p.json", {"family": "example_2_1", "d": 4, "k": 4}),
                   "--width", "4", "--max-iter", "1"], capsys)
    assert code == 5


def test_solve_auglag(files, capsys):
    code, out = run(["solve", "--method", "ssv_auglag", "--problem", files("p.json", {"family": "example_3_1"}),
                     "--init", files("i.json", {"x": [0.5], "F": [[1, 0], [0, 1]]})], capsys)
    assert code == 0
    assert abs(json.loads(out.out)["solution"]["x"][0] + 1) <= 1e-6


def test_solve_method_problem_mismatch(files, capsys):
    assert run(["solve", "--method", "ssv_auglag", "--problem", files("p.json", EX22)], capsys)[0] == 2
    assert run(["solve", "--method", "dss", "--problem", files("q.json", {"family": "example_3_1"})], capsys)[0] == 2


def test_solve_nnm(files, capsys):
    spec = {"d1": 8, "d2": 6, "rank": 2, "m": 120, "seed": 0, "lambda": 1e-4}
    code, out = run(["solve", "--method", "nnm_dss", "--problem", files("s.json", spec)], capsys)
    assert code == 0
    res = json.loads(out.out)
    assert res["certified_1p"] is True and res["recovery_error"] <= 1e-3


def test_nucnorm_demo(capsys):
    code, out = run(["nucnorm", "demo", "--d1", "4", "--d2", "3", "--rank", "1", "--m", "30"], capsys)
    assert code == 0
    res = json.loads(out.out)
    assert set(res) >= {"objective", "recovery_error", "certified_1p"}


def test_lift_modes(files, capsys):
    code, out = run(["lift", "--mode", "factor", "--point", files("x.json", {"X": [[2, 1], [1, 2]]}),
                     "--rotate", "--seed", "3"], capsys)
    assert code == 0 and json.loads(out.out)["residual"] <= 1e-12
    code, out = run(["lift", "--mode", "delta", "--point",
                     files("d.json", {"F": [[1, 0], [0, 2]], "W": [[1, 1], [1, 0]]})], capsys)
    assert code == 0 and json.loads(out.out)["residual"] <= 1e-12
    code, _ = run(["lift", "--mode", "delta_sym", "--point",
                   files("e.json", {"F": [[1, 0], [0, -1]], "W": [[1, 1], [1, 0]]})], capsys)
    assert code == 4
    code, _ = run(["lift", "--mode", "delta", "--point", files("g.json", {"F": [[1]]})], capsys)
    assert code == 2


@pytest.mark.parametrize("name", ["ex2.2", "ex3.1", "exB.1"])
def test_reproduce(name, capsys):
    code, out = run(["reproduce", name], capsys)
    assert code == 0 and json.loads(out.out)["pass"] is True


def test_reproduce_ex2_1(capsys):
    code, out = run(["reproduce", "ex2.1", "--d", "6", "--k", "3"], capsys)
    res = json.loads(out.out)
    assert code == 0
    value = next(c for c in res["claims"] if c["name"].startswith("g(F_k)"))
    assert value["value"] == pytest.approx(125 / 36, rel=1e-12)
    assert run(["reproduce", "ex2.1", "--d", "2"], capsys)[0] == 2


def test_byte_identical_output(files, tmp_path, capsys):
    prob = files("p.json", {"family": "example_2_1", "d": 4, "k": 4})
    outs = []
    for i in range(2):
        path = tmp_path / f"out{i}.json"
        assert main(["solve", "--method", "dss", "--problem", prob, "--width", "4",
                     "--seed", "11", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_dumps_precision():
    x = 0.1 + 0.2
    text = dumps({"v": x, "i": float("inf"), "n": None, "b": True})
    assert "0.30000000000000004" in text and "Infinity" in text
    assert float(json.loads(dumps([x]))[0]) == x


def test_module_entry_point(files):
    res = subprocess.run([sys.executable, "-m", "sqvar", "reproduce", "ex2.2"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["example"] == "ex2.2"
