import json
import subprocess
import sys
from pathlib import Path

from spyder_lang import imp
from spyder_lang.cli import EXIT_INPUT, EXIT_OK, EXIT_SYNTH, EXIT_VERIFY, main
from spyder_lang.frontend import parse_program

CORPUS = Path(imp.__file__).parent / "corpus"
HERE = Path(__file__).parent
DOM = ["--int-range", "-3:3", "--sizes", "1,2"]


def corpus(name):
    return str(CORPUS / f"{name}.spy")


def test_check_valid_program(capsys):
    assert main(["check", corpus("product"), *DOM]) == EXIT_OK
    assert "valid" in capsys.readouterr().out


def test_check_reports_a_counterexample(capsys):
    assert main(["check", corpus("budget_ex1"), *DOM]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "invalid" in out and "counterexample" in out


def test_check_json(capsys):
    main(["check", corpus("budget_ex1"), *DOM, "--format", "json"])
    [row] = json.loads(capsys.readouterr().out)
    assert row["verdict"] == "invalid"
    assert set(row["counterexample"]) == {"scalars", "arrays"}


def test_malformed_file_is_an_input_error(tmp_path, capsys):
    bad = tmp_path / "bad.spy"
    bad.write_text("data x: int;\nprocedure p() { x := ; }\n")
    assert main(["check", str(bad)]) == EXIT_INPUT
    assert "bad.spy:2:" in capsys.readouterr().err


def test_bad_flag_is_an_input_error(capsys):
    assert main(["check", corpus("product"), "--int-range", "5:1"]) == EXIT_INPUT
    assert main(["check", corpus("product"), "--sizes", "0"]) == EXIT_INPUT


def test_synth_output_passes_check(tmp_path):
    out = tmp_path / "patched.spy"
    report = tmp_path / "report.json"
    assert main(["synth", corpus("budget_ex1"), *DOM, "--out", str(out), "--report", str(report)]) == EXIT_OK
    text = out.read_text()
    assert "for d in days, w in weeks" in text
    assert "w <- 7 * d.val;" in text
    assert main(["check", str(out), *DOM]) == EXIT_OK


def test_synth_report_matches_golden(tmp_path):
    report = tmp_path / "report.json"
    main(["synth", corpus("budget_ex1"), "--out", str(tmp_path / "p.spy"), "--report", str(report)])
    assert report.read_text() == (HERE / "golden" / "budget_ex1_report.json").read_text()


def test_synth_of_correct_program_is_identity(tmp_path):
    out = tmp_path / "p.spy"
    assert main(["synth", corpus("product"), *DOM, "--out", str(out)]) == EXIT_OK
    assert parse_program(out.read_text()) == parse_program(Path(corpus("product")).read_text())


def test_synth_failure_shows_the_residual_goal(tmp_path, capsys):
    assert main(["synth", corpus("decrement"), *DOM, "--out", str(tmp_path / "p.spy")]) == EXIT_SYNTH
    err = capsys.readouterr().err
    assert "synthesis failed in decrement" in err
    assert "post:" in err and "writable:" in err


def _state(tmp_path, **arrays):
    p = tmp_path / "state.json"
    p.write_text(json.dumps({"scalars": {}, "arrays": arrays}))
    return str(p)


def test_run_patched_cola(tmp_path, capsys):
    patched = tmp_path / "p.spy"
    main(["synth", corpus("budget_ex1"), *DOM, "--out", str(patched)])
    capsys.readouterr()
    state = _state(tmp_path, days=[3, -2], weeks=[21, -14])
    code = main(["run", str(patched), "adjustForCOLA", state, "--arg", "cola=2", "--assert-invariants",
                 "--format", "json"])
    assert code == EXIT_OK
    assert json.loads(capsys.readouterr().out)["arrays"] == {"days": [6, -2], "weeks": [42, -14]}


def test_run_unpatched_cola_trips_the_exit_check(tmp_path, capsys):
    state = _state(tmp_path, days=[3, -2], weeks=[21, -14])
    code = main(["run", corpus("budget_ex1"), "adjustForCOLA", state, "--arg", "cola=2", "--assert-invariants"])
    assert code == EXIT_VERIFY
    assert "on exit" in capsys.readouterr().err


def test_run_empty_procedure(tmp_path, capsys):
    src = tmp_path / "e.spy"
    src.write_text("data xs: int[];\nprocedure nop() { }\n")
    assert main(["run", str(src), "nop", _state(tmp_path, xs=[4, 5])]) == EXIT_OK
    assert "xs = [4, 5]" in capsys.readouterr().out


def test_run_missing_array_is_an_input_error(tmp_path):
    assert main(["run", corpus("budget_ex1"), "adjustForCOLA", _state(tmp_path, days=[1])]) == EXIT_INPUT


def test_emit_smt(capsys):
    assert main(["emit-smt", corpus("midpoint_2")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "; procedure incrL" in out and "(check-sat)" in out


def test_bench_on_empty_corpus(tmp_path, capsys):
    assert main(["bench", str(tmp_path), "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == []


def test_bench_reports_failures_as_rows(tmp_path, capsys):
    (tmp_path / "decrement.spy").write_text(Path(corpus("decrement")).read_text())
    (tmp_path / "midpoint_2.spy").write_text(Path(corpus("midpoint_2")).read_text())
    assert main(["bench", str(tmp_path), *DOM, "--format", "json"]) == EXIT_OK
    rows = {r["benchmark"]: r for r in json.loads(capsys.readouterr().out)}
    assert rows["decrement"]["failures"] == {"decrement": "unsatisfiable"}
    assert rows["midpoint_2"]["locs"] == 2


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "spyder_lang", "check", corpus("increment")],
                          capture_output=True, text=True)
    assert done.returncode == EXIT_OK
