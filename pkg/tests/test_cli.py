import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dilatekit import cli
from dilatekit.cli import Options, ParseError, decode_matrix, decode_rep, encode_matrix, encode_rep, run
from dilatekit.fixtures import random_tree_rep

seeds = st.integers(min_value=0, max_value=2**31 - 1)


def M(rows):
    return encode_matrix(np.asarray(rows, dtype=complex))


def E(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1
    return m


def main_json(argv, capsys, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = cli.main(argv)
    return code, json.loads(capsys.readouterr().out)


# spec examples

def test_defect_report():
    rep, code = run("defect", {"matrix": [[0.6]]}, Options())
    assert code == 0 and rep["status"] == "pass"
    assert rep["outputs"]["defect"] == [[[pytest.approx(0.8), 0.0]]]
    assert rep["residuals"]["defect_identity"]["threshold"] > 0


def test_semi_dirichlet_report():
    rep, code = run("semi-dirichlet", {"basis": [M(np.eye(2)), M(E(2, 1, 0))]}, Options())
    assert code == 0
    assert rep["outputs"]["holds_in_ambient"] is False
    assert rep["outputs"]["conclusive"] is True


def test_zigzag_sigma2_not_fully_extremal():
    fx, _ = run("fixtures", {"name": "zigzag", "params": {"n": 3}}, Options())
    data = fx["outputs"]["data"]
    rep, code = run("tree-fully-extremal",
                    {"representation": data["representations"]["sigma_2"], "original_dims": data["original_dims"]},
                    Options())
    assert code == 0
    assert rep["outputs"]["fully_extremal"] is False
    assert rep["outputs"]["witnesses"][0]["edge"] == [1, 2]


def test_fixture_parameters_echo():
    nil, _ = run("fixtures", {}, Options(name="nilpotent", params={"b": 0.5}))
    assert nil["outputs"]["data"]["B"] == [[[0.5, 0.0]]]
    th, _ = run("fixtures", {"name": "theta-pair", "params": {"theta": math.pi / 6}}, Options())
    base = decode_rep(th["outputs"]["data"]["base"])
    assert np.allclose(base.edge_ops[(0, 1)], np.diag([math.cos(math.pi / 6), math.sin(math.pi / 6)]))
    zz, _ = run("fixtures", {"name": "zigzag", "params": {"n": 5}}, Options())
    assert sorted(zz["outputs"]["data"]["representations"]) == [f"sigma_{k}" for k in range(1, 6)]


def test_fixture_list_and_unknown():
    rep, code = run("fixtures", {}, Options())
    assert "zigzag" in rep["outputs"]["available"]
    rep, code = run("fixtures", {"name": "nope"}, Options())
    assert code == 3 and rep["error"]["name"] == "UnknownFixture"


# every command through its fixture jobs

@pytest.mark.parametrize("name", cli.FIXTURE_NAMES)
def test_fixture_jobs_run(name):
    fx, code = run("fixtures", {"name": name}, Options(seed=1))
    assert code == 0
    for job in fx["outputs"]["jobs"]:
        rep, code = run(job["command"], job["input"], Options(seed=1))
        assert code in (0, 3), rep
        if code == 3:
            # only the odd zigzag steps, which are extensions rather than coextensions
            assert rep["error"]["name"] == "NotExtremal"


def test_remaining_commands():
    opts = Options(level=3)
    cases = {
        "dilate": {"matrix": [[0.5]]},
        "schaeffer": {"matrix": [[0.5]]},
        "row-dilate": {"blocks": [[[0.5]], [[0.5]]]},
        "wold": {"matrix": [[0.5]], "dilate": True},
        "clt": {"T": M([[0, 0], [0.5, 0]]), "X": M([[0, 0], [0.5, 0]])},
        "t2-ando": {"A1": [[0]], "A2": [[0]], "X": [[0.5]]},
        "tree-validate": {"representation": {"n": 2, "dims": [1, 1], "ops": [{"edge": [0, 1], "matrix": [[0.5]]}]}},
        "tree-extremal": {"representation": {"n": 2, "dims": [1, 1], "ops": [{"edge": [0, 1], "matrix": [[1]]}]}},
        "tree-ando": {"representation": {"n": 2, "dims": [1, 1], "ops": [{"edge": [0, 1], "matrix": [[0.5]]}]},
                      "blocks": [[[0.3]], [[0.3]]]},
        "tree-classify": {"structure": {"n": 3, "edges": [[2, 0], [2, 1]]}},
    }
    for command, doc in cases.items():
        rep, code = run(command, doc, opts)
        assert code == 0, (command, rep)
    rep, _ = run("tree-classify", cases["tree-classify"], opts)
    assert rep["outputs"]["is_unilateral_tree"] is False


# errors and exit codes

def test_unknown_field_rejected():
    rep, code = run("defect", {"matrix": [[0.6]], "extra": 1}, Options())
    assert code == 2 and rep["error"]["name"] == "ParseError"


def test_missing_field_rejected():
    _, code = run("clt", {"T": [[0.5]]}, Options())
    assert code == 2


def test_bad_schema_rejected():
    _, code = run("defect", {"schema": "other/2", "matrix": [[0.6]]}, Options())
    assert code == 2


def test_ragged_matrix():
    with pytest.raises(ParseError):
        decode_matrix([[1, 2], [3]])


def test_options_validation():
    with pytest.raises(ParseError):
        Options(level=0)
    with pytest.raises(ParseError):
        Options(tol=0.0)


def test_domain_error_exit_3():
    rep, code = run("defect", {"matrix": [[2.0]]}, Options())
    assert code == 3 and rep["error"]["name"] == "NotAContraction"


def test_failed_certificate_exit_1():
    # roundoff in D^2 + T*T - I cannot meet a threshold of 1e-299
    rep, code = run("defect", {"matrix": [[0.3, 0.1], [0.2, 0.7]]}, Options(tol=1e-300))
    assert code == 1 and rep["status"] == "fail"
    assert rep["certificates"]["defect_identity"] is False


def test_main_exit_codes(tmp_path, capsys, monkeypatch):
    p = tmp_path / "in.json"
    p.write_text(json.dumps({"matrix": [[0.6]]}))
    code, out = main_json(["defect", "--input", str(p)], capsys)
    assert code == 0 and out["status"] == "pass"
    code, out = main_json(["defect", "--input", "-"], capsys, stdin="{not json", monkeypatch=monkeypatch)
    assert code == 2
    code, out = main_json(["defect", "--input", "-"], capsys, stdin='{"matrix": [[3]]}', monkeypatch=monkeypatch)
    assert code == 3
    code, out = main_json(["fixtures", "--name", "nilpotent", "--param", "b=0.25"], capsys)
    assert code == 0 and out["outputs"]["data"]["B"] == [[[0.25, 0.0]]]


def test_main_output_file(tmp_path, capsys):
    out = tmp_path / "out.json"
    assert cli.main(["fixtures", "--name", "bidisk", "--output", str(out)]) == 0
    assert json.loads(out.read_text())["outputs"]["fixture"] == "bidisk"


# round trip and determinism

@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e6),
                         min_size=2, max_size=2), min_size=1, max_size=3))
def test_matrix_round_trip_exact(rows):
    m = np.array(rows, dtype=complex)
    back = decode_matrix(json.loads(json.dumps(encode_matrix(m))))
    assert np.array_equal(back, m)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_rep_round_trip_exact(seed):
    rep = random_tree_rep(np.random.default_rng(seed))
    back = decode_rep(json.loads(json.dumps(encode_rep(rep))))
    assert back.dims == rep.dims
    assert back.structure.generating_edges == rep.structure.generating_edges
    for e, t in rep.edge_ops.items():
        assert np.array_equal(back.edge_ops[e], t)


def test_report_round_trip():
    rep, _ = run("nilpotent-coextend", {"B": [[0.5]]}, Options())
    text = json.dumps(rep, sort_keys=True)
    assert json.dumps(json.loads(text), sort_keys=True) == text


def test_reports_deterministic():
    a, _ = run("fixtures", {"name": "covariant-star"}, Options(seed=7))
    b, _ = run("fixtures", {"name": "covariant-star"}, Options(seed=7))
    c, _ = run("fixtures", {"name": "covariant-star"}, Options(seed=8))
    assert cli.without_timing(a) == cli.without_timing(b)
    assert a["outputs"]["data"] != c["outputs"]["data"]
