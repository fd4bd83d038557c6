import json

import pytest

from nctorus import cli
from nctorus.quadrature import ConvergenceError


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_curvature_default_scenario(capsys):
    code, out, _ = run_cli(capsys, "curvature", "--json")
    assert code == 0
    rep = json.loads(out)
    assert rep["results"]["value_B"]["re"] == pytest.approx(0.0795775, abs=1e-7)
    assert rep["pass"] is True
    assert rep["settings"]["tau"] == {"im": 1.0, "re": 0.0}


def test_algebra_echoes_commutation_phase(capsys):
    code, out, _ = run_cli(capsys, "algebra", "--json", "--theta", "0.25")
    rep = json.loads(out)
    assert code == 0
    (term,) = rep["results"]["product"]["terms"]
    assert (term["m"], term["n"]) == (1, 1)
    assert complex(term["re"], term["im"]) == pytest.approx(1j, abs=1e-12)


def test_oracle_compare_reports_both_sides(capsys):
    code, out, _ = run_cli(capsys, "oracle-compare", "--json", "--lattice-M", "12", "16", "20", "24")
    rep = json.loads(out)
    assert code == 0
    res = rep["results"]
    assert {"symbol_side", "lattice_sum", "spectral_trace", "gap"} <= set(res)


@pytest.mark.parametrize("command", ["symbol", "trace", "zeta", "lemma52"])
def test_commands_pass_by_default(capsys, command):
    code, out, _ = run_cli(capsys, command)
    assert code == 0
    assert "FAIL" not in out


def test_reports_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli(capsys, "symbol", "--seed", "7", "--output", str(a))
    run_cli(capsys, "symbol", "--seed", "7", "--output", str(b))
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["settings"]["seed"] == 7


def test_empty_report_is_valid_json():
    rep = cli.Report("none", {})
    data = json.loads(rep.dumps())
    assert data["checks"] == [] and data["pass"] is True
    assert rep.table().count("\n") == 0


def test_table_has_one_row_per_check(capsys):
    code, out, _ = run_cli(capsys, "trace", "--output", "/dev/null")
    rep = cli.run("trace", cli.effective_settings(cli.build_parser().parse_args(["trace"])))
    assert len(out.strip().splitlines()) == len(rep.checks) + 1


def test_flags_override_input_file(tmp_path, capsys):
    scen = tmp_path / "s.json"
    scen.write_text(json.dumps({"theta": 0.1, "tau": {"re": 0.3, "im": 1.2}, "depth": 5,
                                "quadrature": {"circle_nodes": 256}}))
    code, out, _ = run_cli(capsys, "lemma52", "--input", str(scen), "--tau-im", "2.0", "--circle-nodes", "512",
                           "--json")
    s = json.loads(out)["settings"]
    assert code == 0
    assert s["theta"] == 0.1 and s["depth"] == 5
    assert s["tau"] == {"re": 0.3, "im": 2.0}
    assert s["quadrature"]["circle_nodes"] == 512


@pytest.mark.parametrize("argv", [
    ["curvature", "--tau-im", "-1"],
    ["trace", "--circle-nodes", "1000"],
    ["trace", "--input", "/nonexistent/file.json"],
])
def test_validation_errors_exit_2(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2 and "validation error" in err


def test_non_invertible_family_exits_2(tmp_path, capsys):
    scen = tmp_path / "s.json"
    scen.write_text(json.dumps({"alpha0": {"terms": []}, "beta": {"terms": [{"m": 1, "n": 0, "re": 1.0, "im": 0.0}]}}))
    code, _, _ = run_cli(capsys, "curvature", "--input", str(scen))
    assert code == 2


def test_bad_json_exits_2(tmp_path, capsys):
    scen = tmp_path / "s.json"
    scen.write_text("{not json")
    assert run_cli(capsys, "symbol", "--input", str(scen))[0] == 2


def test_convergence_and_check_failures(monkeypatch, capsys):
    def diverge(s, rep):
        raise ConvergenceError("no")

    def fail(s, rep):
        rep.check("impossible", 1.0, 2.0, 1e-3)

    monkeypatch.setitem(cli.RUNNERS, "symbol", diverge)
    assert run_cli(capsys, "symbol")[0] == 3
    monkeypatch.setitem(cli.RUNNERS, "symbol", fail)
    code, out, _ = run_cli(capsys, "symbol")
    assert code == 4 and "FAIL" in out
