"""
The imperative layer: programs that assign formula values to node labels.

Program syntax::

    program   ::= statement {';' statement}
    statement ::= 'skip'
                | LABEL '<-' formula
                | 'if' formula 'then' statement ['else' statement]
                | 'until' formula 'do' statement
                | 'free' '(' LABEL {',' LABEL} ')'
                | 'wait' '(' LABEL ')'
                | '{' program '}'

``wait(x)`` abbreviates ``x <- true; until x do skip``.
A guard holds when it is true at every node.
"""
import logging
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

from attr import attrib, attrs
from attr.validators import instance_of

from immutablecollections import ImmutableSet, immutableset

from smuc.config import SmucSettings
from smuc.domains import BoolDomain, Domain
from smuc.errors import FuelExhaustedError, GuardTypeError
from smuc.evaluation import Evaluator
from smuc.field import Field
from smuc.formula import (
    FORMULA_GRAMMAR,
    Apply,
    Const,
    Formula,
    FormulaParser,
    Label,
    ModalIn,
    ModalOut,
    formula_to_text,
)
from smuc.functions import FUNCTION_REGISTRY, FunctionRegistry
from smuc.values import TRUE, BoolValue

PROGRAM_GRAMMAR = (
    """\
program   ::= statement {';' statement}
statement ::= 'skip' | LABEL '<-' formula
            | 'if' formula 'then' statement ['else' statement]
            | 'until' formula 'do' statement
            | 'free' '(' LABEL {',' LABEL} ')' | 'wait' '(' LABEL ')'
            | '{' program '}'
"""
    + FORMULA_GRAMMAR
)


@attrs(frozen=True, slots=True)
class Skip:
    pass


@attrs(frozen=True, slots=True)
class Assign:
    label: str = attrib(validator=instance_of(str))
    formula: Formula = attrib()


@attrs(frozen=True, slots=True)
class Seq:
    first: "Program" = attrib()
    second: "Program" = attrib()


@attrs(frozen=True, slots=True)
class If:
    guard: Formula = attrib()
    then: "Program" = attrib()
    otherwise: "Program" = attrib(factory=Skip)


@attrs(frozen=True, slots=True)
class Until:
    guard: Formula = attrib()
    body: "Program" = attrib()


@attrs(frozen=True, slots=True)
class Free:
    labels: ImmutableSet[str] = attrib(converter=immutableset)


Program = Union[Skip, Assign, Seq, If, Until, Free]

SKIP = Skip()


def sequence(programs: Sequence[Program]) -> Program:
    """
    Right-nested sequential composition; the empty sequence is ``skip``.
    """
    if not programs:
        return SKIP
    ret = programs[-1]
    for program in reversed(programs[:-1]):
        ret = Seq(program, ret)
    return ret


def wait(label: str) -> Program:
    """
    The synchronisation barrier ``label <- true; until label do skip``.
    """
    return Seq(Assign(label, Const(TRUE)), Until(Label(label), SKIP))


def statements(program: Program) -> List[Program]:
    """
    The statements of a right-nested sequence.
    """
    if isinstance(program, Seq):
        return statements(program.first) + statements(program.second)
    return [program]


_KEYWORDS = ("skip", "if", "then", "else", "until", "do", "free", "wait")


class ProgramParser(FormulaParser):
    def __init__(
        self, text: str, *, registry: FunctionRegistry = FUNCTION_REGISTRY
    ) -> None:
        super().__init__(text, registry=registry, grammar=PROGRAM_GRAMMAR)

    def parse_program(self) -> Program:
        program = self._program()
        self._expect_end()
        return program

    def _program(self) -> Program:
        parts = [self._statement()]
        while self._at(";"):
            self._advance()
            if self._at("}") or self._peek().kind == "end":
                break
            parts.append(self._statement())
        return sequence(parts)

    def _guard(self) -> Formula:
        self._binders_used = set()
        return self._formula()

    def _statement(self) -> Program:
        token = self._peek()
        if self._at("{"):
            self._advance()
            if self._at("}"):
                self._advance()
                return SKIP
            body = self._program()
            self._consume("}")
            return body
        if token.kind != "name":
            return self._fail("Expected a statement")
        if token.text == "skip":
            self._advance()
            return SKIP
        if token.text == "if":
            self._advance()
            guard = self._guard()
            self._consume("then")
            then = self._statement()
            otherwise: Program = SKIP
            if self._at("else"):
                self._advance()
                otherwise = self._statement()
            return If(guard, then, otherwise)
        if token.text == "until":
            self._advance()
            guard = self._guard()
            self._consume("do")
            return Until(guard, self._statement())
        if token.text in ("free", "wait") and self._at("(", 1):
            self._advance()
            self._consume("(")
            labels = [self._name()]
            while self._at(","):
                self._advance()
                labels.append(self._name())
            self._consume(")")
            if token.text == "free":
                return Free(labels)
            if len(labels) != 1:
                return self._fail("wait takes exactly one label", token)
            return wait(labels[0])
        if token.text in _KEYWORDS:
            return self._fail("Expected a statement")
        label = self._advance().text
        if self._peek().kind != "assign":
            return self._fail(f"Expected '<-' after {label}")
        self._advance()
        return Assign(label, self._guard())


def parse_program(
    text: str, *, registry: FunctionRegistry = FUNCTION_REGISTRY
) -> Program:
    return ProgramParser(text, registry=registry).parse_program()


def load_program_file(path: Path) -> Program:
    return parse_program(path.read_text(encoding="utf-8"))


def program_to_text(program: Program, indent: int = 0) -> str:
    """
    Program text which `parse_program` reads back to *program*.
    """
    pad = "  " * indent
    if isinstance(program, Skip):
        return f"{pad}skip"
    if isinstance(program, Assign):
        return f"{pad}{program.label} <- {formula_to_text(program.formula)}"
    if isinstance(program, Seq):
        return ";\n".join(program_to_text(part, indent) for part in statements(program))
    if isinstance(program, If):
        return (
            f"{pad}if {formula_to_text(program.guard)} then {{\n"
            f"{program_to_text(program.then, indent + 1)}\n{pad}}} else {{\n"
            f"{program_to_text(program.otherwise, indent + 1)}\n{pad}}}"
        )
    if isinstance(program, Until):
        return (
            f"{pad}until {formula_to_text(program.guard)} do {{\n"
            f"{program_to_text(program.body, indent + 1)}\n{pad}}}"
        )
    if isinstance(program, Free):
        return f"{pad}free({', '.join(program.labels)})"
    raise TypeError(f"Not a program: {program!r}")


def assigned_labels(program: Program) -> ImmutableSet[str]:
    if isinstance(program, Assign):
        return immutableset([program.label])
    if isinstance(program, Seq):
        return immutableset(
            [*assigned_labels(program.first), *assigned_labels(program.second)]
        )
    if isinstance(program, If):
        return immutableset(
            [*assigned_labels(program.then), *assigned_labels(program.otherwise)]
        )
    if isinstance(program, Until):
        return assigned_labels(program.body)
    return immutableset()


def agreement_formula(formula: Formula) -> Formula:
    """
    True at a node iff *formula* has the same value there and at all its neighbours.
    """
    return Apply(
        "agrees",
        [
            Apply(
                "eq",
                [formula, ModalOut("id", "eq", formula), ModalIn("id", "eq", formula)],
            )
        ],
    )


# The global operational semantics


def evaluate_assignment(
    field: Field, assignment: Assign, *, settings: Optional[SmucSettings] = None
) -> Field:
    """
    *field* with the label of *assignment* set to the value of its formula.

    An existing label's domain guides the typing of untyped constants and bounds.
    """
    expected: Optional[Domain] = None
    if field.has_label(assignment.label):
        expected = field.label_domain(assignment.label)
    evaluator = Evaluator(field, settings=settings)
    valuation = evaluator.evaluate(assignment.formula, expected=expected)
    return field.with_label(assignment.label, evaluator.result_domain(), valuation)


def guard_holds(
    field: Field, guard: Formula, *, settings: Optional[SmucSettings] = None
) -> bool:
    """
    Whether *guard* is true at every node of *field*.
    """
    evaluator = Evaluator(field, settings=settings)
    valuation = evaluator.evaluate(guard, expected=BoolDomain())
    for (node, value) in valuation.items():
        if not isinstance(value, BoolValue):
            raise GuardTypeError(
                f"Guard {formula_to_text(guard)} has non-Boolean value {value!r} "
                f"at node {node}"
            )
    return all(value.value for value in valuation.values())  # type: ignore


def step(
    program: Program, field: Field, *, settings: Optional[SmucSettings] = None
) -> Tuple[Program, Field]:
    """
    One transition of ``<program, field>``.
    """
    if isinstance(program, Skip):
        raise ValueError("skip has terminated and cannot step")
    if isinstance(program, Assign):
        return (SKIP, evaluate_assignment(field, program, settings=settings))
    if isinstance(program, Seq):
        if isinstance(program.first, Skip):
            return step(program.second, field, settings=settings)
        (residual, following) = step(program.first, field, settings=settings)
        if isinstance(residual, Skip):
            return (program.second, following)
        return (Seq(residual, program.second), following)
    if isinstance(program, If):
        if guard_holds(field, program.guard, settings=settings):
            return (program.then, field)
        return (program.otherwise, field)
    if isinstance(program, Until):
        if guard_holds(field, program.guard, settings=settings):
            return (SKIP, field)
        return (Seq(program.body, program), field)
    if isinstance(program, Free):
        return (SKIP, field.without_labels(program.labels))
    raise TypeError(f"Not a program: {program!r}")


@attrs(frozen=True, slots=True)
class ProgramRun:
    field: Field = attrib(validator=instance_of(Field))
    steps: int = attrib(validator=instance_of(int))


# called after every transition with the step count, residual program and new field
StepObserver = Callable[[int, Program, Field], None]


def run(
    program: Program,
    field: Field,
    fuel: Optional[int] = None,
    *,
    settings: Optional[SmucSettings] = None,
    observer: Optional[StepObserver] = None,
) -> ProgramRun:
    """
    Step *program* until it terminates, for at most *fuel* transitions.
    """
    settings = settings or SmucSettings.default()
    limit = fuel if fuel is not None else settings.fuel
    steps = 0
    while not isinstance(program, Skip):
        if steps >= limit:
            raise FuelExhaustedError(
                f"Program did not terminate within {limit} steps",
                diagnostic=program_to_text(program),
            )
        (program, field) = step(program, field, settings=settings)
        steps += 1
        if observer is not None:
            observer(steps, program, field)
    logging.info("Program terminated after %s steps", steps)
    return ProgramRun(field, steps)
