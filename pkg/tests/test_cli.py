import csv
import io
import json
import subprocess
import sys
import time

import pytest

from qmano.cli import main

XI = "0.4+0.35j"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


@pytest.fixture
def pants_file(tmp_path, capsys):
    path = tmp_path / "pants.json"
    assert run(capsys, "--out", str(path), "pants", "js-ref", "--pair", "12", "--xi", XI, "--eta", "2")[0] == 0
    return path


def test_validate(capsys, tmp_path):
    d = run_json(capsys, "validate", "js-ref")
    assert d["ok"] and d["report"]["Hyp8"]["12"] and not d["report"]["Hyp8"]["13"]
    path = tmp_path / "local.json"
    path.write_text(json.dumps(d["local"]))
    assert run_json(capsys, "validate", str(path))["ok"]
    assert run(capsys, "validate", "random:5")[0] == 0


def test_input_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "validate", str(tmp_path / "missing.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "validate", str(bad))[0] == 2
    assert run(capsys, "pants", "js-ref", "--pair", "11", "--xi", XI, "--eta", "1")[0] == 2
    assert run(capsys, "pants", "js-ref", "--pair", "12", "--xi", "oops", "--eta", "1")[0] == 2
    assert run(capsys, "pants", "js-ref", "--pair", "12", "--xi", XI, "--eta", "0")[0] == 2
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "fricke", "lines")[0] == 2


def test_failed_check_exit_1(capsys, tmp_path, pants_file):
    d = json.loads(pants_file.read_text())
    d["matrix"]["m11"]["scale"][0] *= 1.1
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(d))
    code, out, _ = run(capsys, "invariants", str(broken))
    assert code == 1 and json.loads(out)["det_residual"] > 1e-7
    code, out, _ = run(capsys, "invariants", str(pants_file))
    assert code == 0 and json.loads(out)["det_residual"] < 1e-8


def test_pants_decompose_compose(capsys, tmp_path, pants_file):
    dec = tmp_path / "dec.json"
    assert run(capsys, "--out", str(dec), "decompose", str(pants_file), "--pair", "12")[0] == 0
    d = json.loads(dec.read_text())
    assert d["residuals"]["product"] < 1e-7
    xi = complex(*d["point"]["xi"])
    eta = complex(*d["point"]["eta"])
    assert abs(eta - 2) < 1e-7 or abs(eta - 0.5) < 1e-7
    comp = tmp_path / "comp.json"
    assert run(capsys, "--out", str(comp), "compose", str(dec))[0] == 0
    inv_a = run_json(capsys, "invariants", str(pants_file))["invariants"]
    inv_b = run_json(capsys, "invariants", str(comp))["invariants"]
    for key, v in inv_a.items():
        if v is not None and key.startswith("Pi1"):
            a, b = complex(*v["num"]) * complex(*inv_b[key]["den"]), complex(*v["den"]) * complex(*inv_b[key]["num"])
            assert abs(a - b) < 1e-7 * max(abs(a), 1e-300)
    assert xi != 0


def test_special_and_log_outputs(capsys):
    d = run_json(capsys, "pants", "js-ref", "--pair", "12", "--xi", "-0.8333333333333334", "--eta", "0.5")
    assert d["special_line"] == "L_rho1,x1" and "L_rho1,x1" in d["lines_containing"]
    d = run_json(capsys, "pants", "js-ref", "--pair", "12", "--xi", "0.944911182523068", "--eta", "1.5")
    assert d["chart"] == "log" and d["point"]["kind"] == "log"


def test_special_fiber_decompose(capsys, tmp_path):
    path = tmp_path / "line.json"
    run(capsys, "--out", str(path), "pants", "js-ref", "--pair", "12", "--xi", "-0.8333333333333334",
        "--eta", "0.5")
    d = run_json(capsys, "decompose", str(path), "--pair", "12")
    assert "L_rho1,x1" in d["special_fiber"]["lines"] and "point" not in d


def test_scan_csv_json_round_trip(capsys):
    d = run_json(capsys, "scan", "random:7", "--pair", "13", "--nxi", "3", "--neta", "2")
    code, out, _ = run(capsys, "--format", "csv", "scan", "random:7", "--pair", "13", "--nxi", "3", "--neta", "2")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == len(d["rows"]) == 6
    for jr, cr in zip(d["rows"], rows):
        assert set(cr) == set(jr)
        for k, v in jr.items():
            if isinstance(v, float):
                assert float(cr[k]) == v
            else:
                assert cr[k] == ("" if v is None else str(v))


@pytest.mark.slow
def test_scan_20x20_time(capsys):
    t = time.perf_counter()
    d = run_json(capsys, "scan", "js-ref", "--pair", "12", "--nxi", "20", "--neta", "20")
    assert time.perf_counter() - t < 60
    assert len(d["rows"]) == 400
    assert all(r["fiber"] != "invalid" for r in d["rows"])


def test_out_is_atomic(capsys, tmp_path):
    path = tmp_path / "v.json"
    path.write_text("old")
    assert run(capsys, "--out", str(path), "validate", "js-ref")[0] == 0
    assert json.loads(path.read_text())["ok"]
    assert [p.name for p in tmp_path.iterdir()] == ["v.json"]
    # a failing command leaves the previous file untouched
    assert run(capsys, "--out", str(path), "validate", str(tmp_path / "none.json"))[0] == 2
    assert json.loads(path.read_text())["ok"]


def test_fricke_commands(capsys):
    d = run_json(capsys, "fricke", "eval", "--a", "0;0;0;0", "--X", "2;2;-2")
    assert d["on_surface"] and d["A"]["Ainf"] == [-4.0, 0.0]
    d = run_json(capsys, "fricke", "lines", "--e", "1.2;0.5j;-0.8+0.3j;1.5")
    assert len(d["lines"]) == 24 and not d["duplicates"] and d["max_residual"] < 1e-10
    d = run_json(capsys, "fricke", "smooth", "--a", "0;0;0;0", "--newton", "500")
    assert not d["smooth"] and len(d["singular_points"]) == 4
    d = run_json(capsys, "fricke", "jimbo", "--thetas", "0.3;0.4;0.2;0.6", "--X1", "0.7", "-n", "5",
                 "--cross-check", "--sigma1", "0.38")
    assert len(d["points"]) == 5 and d["max_residual"] < 1e-10 and d["cross_check"] < 1e-10
    d = run_json(capsys, "fricke", "orbit", "--a", "0.3;0.5;-0.2;0.8", "--starts", "2", "-n", "10")
    assert d["all_on_surface"] and len(d["rows"]) == 20


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "qmano.cli", "validate", "js-ref"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["ok"]
