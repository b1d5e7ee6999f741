"""
The ``smuc`` command.

Subcommands evaluate formulas, run and compile programs, simulate distributed runs,
fuzz asynchronous strategies, run the rescue case study and check domains for their laws.
Exit status is 0 on success, 1 for errors in the inputs and 2 for internal errors.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from random import Random
from typing import Any, Dict, List, Mapping, Optional, Sequence, TextIO

from attr import evolve

from vistautils.logging_utils import configure_logging_from
from vistautils.parameters import Parameters, YAMLParametersLoader

from smuc.config import SmucSettings
from smuc.dist import (
    agrees_with,
    bfs_infrastructure,
    check_termination_soundness,
    lift,
    load_infrastructure,
    simulate,
)
from smuc.domains import check_laws
from smuc.errors import InvariantViolation, SmucError, SyntaxErrorWithPosition
from smuc.evaluation import EMPTY_ENVIRONMENT, Evaluator
from smuc.field import (
    Field,
    check_edge_monotonicity,
    dump_field,
    load_field_file,
    to_dot,
    valuation_text,
    valuation_to_json,
    write_field_file,
)
from smuc.formula import Mu, Nu, check_monotone, formula_to_text, parse_formula
from smuc.program import load_program_file, program_to_text, run
from smuc.rescue import (
    check_routes,
    gen_scenario,
    oracle_assignment,
    rescue_to_dot,
    run_rescue,
)
from smuc.saf import differential_check, is_saf, translate_program
from smuc.strategy import FailureSpec, check_robustness, run_strategy, strategy_from_json
from smuc.values import Value
from smuc.version import version

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def _settings(args: argparse.Namespace) -> SmucSettings:
    settings = SmucSettings.from_parameters(_parameters(args))
    # flags win over both the parameters file and the environment
    if args.max_iterations is not None:
        settings = evolve(settings, max_iterations=args.max_iterations)
    if getattr(args, "fuel", None) is not None:
        settings = evolve(settings, fuel=args.fuel)
    return settings


def _parameters(args: argparse.Namespace) -> Parameters:
    if args.params is None:
        return Parameters.empty()
    return YAMLParametersLoader().load(args.params)


def _emit(out: TextIO, args: argparse.Namespace, payload: Any, text: str) -> None:
    if args.json:
        out.write(json.dumps(payload, sort_keys=True, indent=2))
        out.write("\n")
    else:
        out.write(text)
        if not text.endswith("\n"):
            out.write("\n")


def _formula_text(args: argparse.Namespace) -> str:
    if args.formula_file is not None:
        return Path(args.formula_file).read_text(encoding="utf-8")
    if args.formula is None:
        raise SmucError("Give a formula with --formula or --formula-file")
    return args.formula


def _field_summary(field: Field) -> Dict[str, Any]:
    return dump_field(field)["node_labels"]


def _field_text(field: Field) -> str:
    return "\n".join(
        f"{label}: {valuation_text(field.valuation(label), field.nodes)}"
        for label in sorted(field.node_labels)
    )


def _write_dots(
    directory: Optional[str], field: Field, rows: Sequence[Mapping[str, Value]]
) -> None:
    if directory is None:
        return
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    for (index, row) in enumerate(rows):
        (target / f"psi{index}.dot").write_text(
            to_dot(field, name=f"psi{index}", extra={"psi": row}), encoding="utf-8"
        )


def _eval(args: argparse.Namespace, out: TextIO) -> int:
    field = load_field_file(Path(args.field))
    formula = parse_formula(_formula_text(args))
    evaluator = Evaluator(field, settings=_settings(args))
    if args.trace:
        rows = evaluator.trace(formula, EMPTY_ENVIRONMENT)
        _write_dots(args.dot, field, rows)
        _emit(
            out,
            args,
            [valuation_to_json(row) for row in rows],
            "\n".join(
                f"psi{index}: {valuation_text(row, field.nodes)}"
                for (index, row) in enumerate(rows)
            ),
        )
    else:
        valuation = evaluator.evaluate(formula)
        _write_dots(args.dot, field, [valuation])
        text = valuation_text(valuation, field.nodes)
        _emit(out, args, valuation_to_json(valuation), text)
    return EXIT_OK


def _run(args: argparse.Namespace, out: TextIO) -> int:
    field = load_field_file(Path(args.field))
    program = load_program_file(Path(args.program))
    result = run(program, field, args.fuel, settings=_settings(args))
    final = result.field.erase_auxiliaries() if args.erase_auxiliaries else result.field
    if args.out is not None:
        write_field_file(final, Path(args.out))
    _emit(
        out,
        args,
        {"steps": result.steps, "labels": _field_summary(final)},
        _field_text(final),
    )
    return EXIT_OK


def _compile(args: argparse.Namespace, out: TextIO) -> int:
    program = load_program_file(Path(args.program))
    field = load_field_file(Path(args.field)) if args.field is not None else None
    (translated, allocated) = translate_program(program, field=field)
    text = program_to_text(translated) + "\n"
    if args.out is not None:
        Path(args.out).write_text(text, encoding="utf-8")
    _emit(out, args, {"auxiliaries": allocated, "program": text}, text)
    if args.check and field is not None:
        report = differential_check(program, field, settings=_settings(args))
        logging.info("%s", report.describe())
        if not report.equal:
            raise InvariantViolation(report.describe())
    return EXIT_OK


def _dist(args: argparse.Namespace, out: TextIO) -> int:
    field = load_field_file(Path(args.field))
    program = load_program_file(Path(args.program))
    if not is_saf(program):
        (program, _) = translate_program(program, field=field)
    if args.tree == "bfs":
        infrastructure = bfs_infrastructure(field)
    else:
        with open(args.tree, encoding="utf-8") as tree_file:
            infrastructure = load_infrastructure(field, json.load(tree_file))
    simulation = simulate(field, infrastructure, program, args.seed, args.fuel or 10 ** 6)
    if args.trace is not None:
        simulation.write_events(Path(args.trace))
    unsound = check_termination_soundness(simulation.events)
    if unsound is not None:
        raise InvariantViolation(unsound)
    lifted = lift(simulation.execution, field).erase_auxiliaries()
    payload: Dict[str, Any] = {
        "steps": simulation.steps,
        "labels": _field_summary(lifted),
    }
    if args.compare:
        global_run = run(program, field, settings=_settings(args)).field
        payload["agrees_with_global_run"] = agrees_with(simulation.execution, global_run)
        if not payload["agrees_with_global_run"]:
            raise InvariantViolation("Distributed run disagrees with the global run")
    _emit(out, args, payload, _field_text(lifted))
    return EXIT_OK


def _fuzz(args: argparse.Namespace, out: TextIO) -> int:
    field = load_field_file(Path(args.field))
    formula = parse_formula(_formula_text(args))
    if not isinstance(formula, (Mu, Nu)):
        raise SmucError(
            f"Only fixpoint formulas can be fuzzed, not {formula_to_text(formula)}"
        )
    step = Evaluator(field, settings=_settings(args)).fixpoint_step(formula)
    max_steps = args.max_steps or 100 * len(field.nodes) + 100
    if args.strategy is not None:
        with open(args.strategy, encoding="utf-8") as strategy_file:
            strategy = strategy_from_json(json.load(strategy_file))
        rows = run_strategy(step, strategy, max_steps)
        _emit(
            out,
            args,
            [valuation_to_json(row) for row in rows],
            "\n".join(
                f"psi{index}: {valuation_text(row, field.nodes)}"
                for (index, row) in enumerate(rows)
            ),
        )
        return EXIT_OK
    failures = None
    if args.failures is not None:
        with open(args.failures, encoding="utf-8") as failures_file:
            failures = FailureSpec.from_json(json.load(failures_file))
    report = check_robustness(
        step,
        args.trials,
        args.seed,
        max_steps=max_steps,
        failures=failures,
        safe_after=args.safe_after,
    )
    _emit(
        out,
        args,
        report.to_json(),
        f"{report.strategy_agreements}/{report.trials} strategies and "
        f"{report.failure_agreements}/{report.trials} failure runs reached the fixpoint",
    )
    return EXIT_OK if report.ok else EXIT_INTERNAL_ERROR


def _rescue(args: argparse.Namespace, out: TextIO) -> int:
    victims: Any = args.victims
    if args.needs:
        victims = [int(need) for need in args.needs.split(",")]
    field = gen_scenario(args.landmarks, victims, args.rescuers, args.seed)
    outcome = run_rescue(
        field, saved_literal=args.saved_literal, settings=_settings(args)
    )
    payload = outcome.to_json()
    problem = check_routes(field, outcome)
    if problem is not None:
        raise InvariantViolation(problem)
    if args.oracle:
        expected = oracle_assignment(field, saved_literal=args.saved_literal)
        payload["oracle_agrees"] = expected == outcome.assignment
    if args.dot is not None:
        directory = Path(args.dot)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"rescue-{args.seed}.dot").write_text(
            rescue_to_dot(outcome), encoding="utf-8"
        )
    _emit(
        out,
        args,
        payload,
        "\n".join(
            [f"success: {str(outcome.success).lower()}"]
            + [
                f"{victim}: {' '.join(rescuers)}"
                for (victim, rescuers) in sorted(outcome.assignment.items())
            ]
        ),
    )
    return EXIT_OK


def _check(args: argparse.Namespace, out: TextIO) -> int:
    field = load_field_file(Path(args.field))
    rng = Random(args.seed)
    problems: List[str] = []
    for label in sorted(field.node_labels):
        for violation in check_laws(field.label_domain(label), rng, cases=args.cases):
            problems.append(f"domain of {label}: {violation}")
    for (label, edge, a, b) in check_edge_monotonicity(field, rng, samples=args.cases):
        problems.append(
            f"edge label {label} on {edge} is not monotone: {a!r} below {b!r}"
        )
    if args.formula is not None or args.formula_file is not None:
        report = check_monotone(parse_formula(_formula_text(args)), field, rng=rng)
        if not report:
            problems.append(f"formula is not monotone: {report.reason}")
    _emit(out, args, {"problems": problems}, "\n".join(problems) or "no problems found")
    return EXIT_USER_ERROR if problems else EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--json", action="store_true", help="print machine-readable results"
    )
    parser.add_argument(
        "--params", help="a parameters file with run-time limits and logging"
    )
    parser.add_argument("--max-iterations", type=int, help="cap on fixpoint iterations")


def _add_formula(parser: argparse.ArgumentParser, *, required: bool = True) -> None:
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("--formula")
    group.add_argument("--formula-file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smuc", description=__doc__.strip().splitlines()[0]
    )
    parser.add_argument("--version", action="version", version=f"smuc {version}")
    commands = parser.add_subparsers(dest="command")
    commands.required = True

    evaluate = commands.add_parser("eval", help="evaluate a formula on a field")
    evaluate.add_argument("--field", required=True)
    _add_formula(evaluate)
    evaluate.add_argument(
        "--trace", action="store_true", help="print every fixpoint iterate"
    )
    evaluate.add_argument(
        "--dot", help="write a DOT rendering of every printed valuation here"
    )
    evaluate.set_defaults(handler=_eval)

    run_command = commands.add_parser("run", help="run a program on a field")
    run_command.add_argument("--field", required=True)
    run_command.add_argument("--program", required=True)
    run_command.add_argument("--fuel", type=int)
    run_command.add_argument("--out", help="write the final field here")
    run_command.add_argument("--erase-auxiliaries", action="store_true")
    run_command.set_defaults(handler=_run)

    compile_command = commands.add_parser(
        "compile", help="translate a program to simple assignment form"
    )
    compile_command.add_argument("--program", required=True)
    compile_command.add_argument("--field", help="type fixpoint seeds against this field")
    compile_command.add_argument("--out")
    compile_command.add_argument(
        "--check", action="store_true", help="compare both programs on --field"
    )
    compile_command.set_defaults(handler=_compile)

    dist = commands.add_parser("dist", help="simulate a distributed run")
    dist.add_argument("--field", required=True)
    dist.add_argument("--program", required=True)
    dist.add_argument("--seed", type=int, default=0)
    dist.add_argument("--fuel", type=int)
    dist.add_argument("--trace", help="write the JSON-lines event log here")
    dist.add_argument("--tree", default="bfs", help="'bfs' or a spanning tree JSON file")
    dist.add_argument(
        "--compare", action="store_true", help="check against the global run"
    )
    dist.set_defaults(handler=_dist)

    fuzz = commands.add_parser("fuzz", help="iterate a fixpoint asynchronously")
    fuzz.add_argument("--field", required=True)
    _add_formula(fuzz)
    fuzz.add_argument("--seed", type=int, default=0)
    fuzz.add_argument("--trials", type=int, default=100)
    fuzz.add_argument("--max-steps", type=int)
    fuzz.add_argument("--safe-after", type=int, default=5)
    fuzz.add_argument(
        "--strategy", help="run this strategy JSON file and print its trace"
    )
    fuzz.add_argument("--failures", help="a failure JSON file used for every trial")
    fuzz.set_defaults(handler=_fuzz)

    rescue = commands.add_parser("rescue", help="run the rescue case study")
    rescue.add_argument("--landmarks", type=int, default=100)
    rescue.add_argument("--victims", type=int, default=5)
    rescue.add_argument("--needs", help="comma-separated rescuers needed per victim")
    rescue.add_argument("--rescuers", type=int, default=10)
    rescue.add_argument("--seed", type=int, default=0)
    rescue.add_argument("--dot", help="write a DOT rendering into this directory")
    rescue.add_argument("--oracle", action="store_true", help="compare with the oracle")
    rescue.add_argument("--saved-literal", action="store_true")
    rescue.set_defaults(handler=_rescue)

    check = commands.add_parser("check", help="check domain laws and monotonicity")
    check.add_argument("--field", required=True)
    _add_formula(check, required=False)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--cases", type=int, default=200)
    check.set_defaults(handler=_check)

    for subparser in (evaluate, run_command, compile_command, dist, fuzz, rescue, check):
        _add_common(subparser)
    return parser


def main(
    argv: Optional[Sequence[str]] = None,
    *,
    out: Optional[TextIO] = None,
    err: Optional[TextIO] = None,
) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        configure_logging_from(_parameters(args))
        return args.handler(args, out)
    except SyntaxErrorWithPosition as e:
        err.write(f"error: {e}\n")
        if e.grammar:
            err.write(e.grammar)
        return EXIT_USER_ERROR
    except SmucError as e:
        err.write(f"error: {e}\n")
        return EXIT_USER_ERROR
    except (OSError, ValueError) as e:
        err.write(f"error: {e}\n")
        return EXIT_USER_ERROR
    except InvariantViolation as e:
        logging.exception("Internal invariant violated")
        err.write(f"internal error: {e}\n")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
