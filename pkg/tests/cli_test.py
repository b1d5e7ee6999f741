import json
from io import StringIO
from pathlib import Path

from smuc.cli import EXIT_OK, EXIT_USER_ERROR, main
from smuc.field import load_field_file
from smuc.program import load_program_file
from smuc.saf import is_saf

FIXTURES = Path(__file__).parent.parent / "fixtures"
CYCLE = str(FIXTURES / "cycle.json")
REACH = "mu z. or(i, <out:or> z)"


def _main(*argv):
    out = StringIO()
    err = StringIO()
    status = main(list(argv), out=out, err=err)
    return (status, out.getvalue(), err.getvalue())


def test_eval_prints_the_valuation():
    (status, out, _) = _main("eval", "--field", CYCLE, "--formula", REACH)
    assert status == EXIT_OK
    assert out == "0:true 1:true 2:true 3:true\n"


def test_eval_trace(tmp_path):
    (status, out, _) = _main(
        "eval", "--field", CYCLE, "--formula", REACH, "--trace", "--dot", str(tmp_path)
    )
    assert status == EXIT_OK
    rows = out.splitlines()
    assert rows[0] == "psi0: 0:false 1:false 2:false 3:false"
    assert rows[-1] == "psi3: 0:true 1:true 2:true 3:true"
    assert len(rows) == 4
    assert sorted(path.name for path in tmp_path.iterdir()) == [
        "psi0.dot",
        "psi1.dot",
        "psi2.dot",
        "psi3.dot",
    ]
    assert "psi=true" in (tmp_path / "psi3.dot").read_text(encoding="utf-8")


def test_eval_formula_file(tmp_path):
    formula_file = tmp_path / "min.mu"
    formula_file.write_text("mu z. min(ids, <out:min> z)\n", encoding="utf-8")
    (status, out, _) = _main(
        "eval", "--field", CYCLE, "--formula-file", str(formula_file), "--json"
    )
    assert status == EXIT_OK
    assert json.loads(out) == {node: {"num": "0"} for node in ("0", "1", "2", "3")}


def test_syntax_errors_print_the_grammar():
    (status, out, err) = _main("eval", "--field", CYCLE, "--formula", "mu z or(i)")
    assert status == EXIT_USER_ERROR
    assert out == ""
    assert err.startswith("error: ")
    assert "line 1, column 6" in err
    assert "formula ::=" in err


def test_missing_files_are_user_errors(tmp_path):
    (status, _, err) = _main(
        "eval", "--field", str(tmp_path / "nowhere.json"), "--formula", REACH
    )
    assert status == EXIT_USER_ERROR
    assert err.startswith("error: ")


def test_run_writes_the_final_field(tmp_path):
    (status, out, _) = _main(
        "run",
        "--field",
        CYCLE,
        "--program",
        str(FIXTURES / "programs" / "reach.smuc"),
        "--out",
        str(tmp_path / "final.json"),
        "--json",
    )
    assert status == EXIT_OK
    result = json.loads(out)
    assert result["steps"] == 1
    final = load_field_file(tmp_path / "final.json")
    assert final.has_label("j")


def test_run_fuel():
    loop = str(FIXTURES / "programs" / "loop.smuc")
    (status, _, err) = _main("run", "--field", CYCLE, "--program", loop, "--fuel", "2")
    assert status == EXIT_USER_ERROR
    assert "error: " in err


def test_compile_and_check(tmp_path):
    target = tmp_path / "loop.saf"
    (status, _, _) = _main(
        "compile",
        "--program",
        str(FIXTURES / "programs" / "loop.smuc"),
        "--field",
        CYCLE,
        "--out",
        str(target),
        "--check",
    )
    assert status == EXIT_OK
    assert is_saf(load_program_file(target))


def test_dist_agrees_with_the_global_run(tmp_path):
    (status, out, _) = _main(
        "dist",
        "--field",
        CYCLE,
        "--program",
        str(FIXTURES / "programs" / "loop.smuc"),
        "--seed",
        "4",
        "--trace",
        str(tmp_path / "events.jsonl"),
        "--compare",
        "--json",
    )
    assert status == EXIT_OK
    assert json.loads(out)["agrees_with_global_run"]
    assert (tmp_path / "events.jsonl").read_text(encoding="utf-8")


def test_fuzz_with_a_strategy_file():
    (status, out, _) = _main(
        "fuzz",
        "--field",
        CYCLE,
        "--formula",
        REACH,
        "--strategy",
        str(FIXTURES / "strategies" / "odd_even.json"),
    )
    assert status == EXIT_OK
    assert out.splitlines()[-1] == "psi4: 0:true 1:true 2:true 3:true"


def test_fuzz_robustness():
    formula = "mu z. min(ids, <out:min> z)"
    (status, out, _) = _main(
        "fuzz", "--field", CYCLE, "--formula", formula, "--trials", "10"
    )
    assert status == EXIT_OK
    assert out.strip() == "10/10 strategies and 10/10 failure runs reached the fixpoint"


def test_only_fixpoints_are_fuzzed():
    (status, _, err) = _main("fuzz", "--field", CYCLE, "--formula", "i")
    assert status == EXIT_USER_ERROR
    assert "Only fixpoint formulas" in err


def test_rescue(tmp_path):
    (status, out, _) = _main(
        "rescue",
        "--landmarks",
        "10",
        "--victims",
        "2",
        "--rescuers",
        "4",
        "--seed",
        "1",
        "--oracle",
        "--dot",
        str(tmp_path),
        "--json",
    )
    assert status == EXIT_OK
    result = json.loads(out)
    assert result["oracle_agrees"]
    assert (tmp_path / "rescue-1.dot").read_text(encoding="utf-8").startswith("digraph")


def test_check():
    (status, out, _) = _main("check", "--field", CYCLE, "--cases", "50")
    assert status == EXIT_OK
    assert out == "no problems found\n"
    (status, out, _) = _main(
        "check", "--field", CYCLE, "--formula", "mu z. or(i, not(z))"
    )
    assert status == EXIT_USER_ERROR
    assert "formula is not monotone" in out


def test_parameters_file(tmp_path):
    params = tmp_path / "params.yaml"
    params.write_text("max_iterations: 1\n", encoding="utf-8")
    (status, _, err) = _main(
        "eval", "--field", CYCLE, "--formula", REACH, "--params", str(params)
    )
    assert status == EXIT_USER_ERROR
    assert "error: " in err


def test_malformed_iteration_cap_in_the_environment(monkeypatch):
    monkeypatch.setenv("SMUC_MAX_ITERS", "abc")
    (status, out, err) = _main("eval", "--field", CYCLE, "--formula", REACH)
    assert status == EXIT_USER_ERROR
    assert out == ""
    assert err.startswith("error: ")
    assert "SMUC_MAX_ITERS" in err


def test_iteration_cap_flag_beats_the_environment(monkeypatch):
    monkeypatch.setenv("SMUC_MAX_ITERS", "1")
    (status, _, err) = _main("eval", "--field", CYCLE, "--formula", REACH)
    assert status == EXIT_USER_ERROR
    assert err.startswith("error: ")
    (status, out, _) = _main(
        "eval", "--field", CYCLE, "--formula", REACH, "--max-iterations", "100"
    )
    assert status == EXIT_OK
    assert out == "0:true 1:true 2:true 3:true\n"
