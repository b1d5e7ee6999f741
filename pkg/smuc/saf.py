"""
Simple assignment form.

A program is in simple assignment form when every assignment evaluates an *elementary*
formula (a label, a function of labels or a single modality over a label)
and every guard is a label.
`translate_program` rewrites any program into this form, computing fixpoints with
explicit loops over auxiliary labels named ``$aux:N``.
"""
import logging
from typing import Dict, List, Optional, Tuple

from attr import attrib, attrs
from attr.validators import instance_of

from immutablecollections import immutableset

from smuc.config import SmucSettings
from smuc.domains import Domain
from smuc.errors import AuxiliaryCollisionError, SmucError, TranslationError
from smuc.field import AUXILIARY_PREFIX, Field, is_auxiliary
from smuc.formula import (
    Apply,
    Bottom,
    Const,
    Formula,
    Label,
    ModalIn,
    ModalOut,
    Mu,
    Nu,
    Top,
    Var,
    infer_domains,
    labels_of,
    substitute,
)
from smuc.functions import DomainScope
from smuc.program import (
    SKIP,
    Assign,
    Free,
    If,
    Program,
    Seq,
    Skip,
    Until,
    run,
    sequence,
    wait,
)
from smuc.values import FALSE


def auxiliary(index: int) -> str:
    return f"{AUXILIARY_PREFIX}{index}"


def is_elementary(formula: Formula) -> bool:
    """
    Labels, constants, functions applied to labels and modalities over a label.
    """
    if isinstance(formula, (Label, Const, Bottom, Top)):
        return True
    if isinstance(formula, Apply):
        return all(isinstance(arg, (Label, Const)) for arg in formula.args)
    if isinstance(formula, (ModalOut, ModalIn)):
        return isinstance(formula.body, Label)
    return False


def is_saf(program: Program) -> bool:
    if isinstance(program, (Skip, Free)):
        return True
    if isinstance(program, Assign):
        return is_elementary(program.formula)
    if isinstance(program, Seq):
        return is_saf(program.first) and is_saf(program.second)
    if isinstance(program, If):
        return (
            isinstance(program.guard, Label)
            and is_saf(program.then)
            and is_saf(program.otherwise)
        )
    if isinstance(program, Until):
        return isinstance(program.guard, Label) and is_saf(program.body)
    raise TypeError(f"Not a program: {program!r}")


def _program_labels(program: Program) -> List[str]:
    if isinstance(program, Assign):
        return [program.label, *labels_of(program.formula)]
    if isinstance(program, Seq):
        return _program_labels(program.first) + _program_labels(program.second)
    if isinstance(program, If):
        return (
            list(labels_of(program.guard))
            + _program_labels(program.then)
            + _program_labels(program.otherwise)
        )
    if isinstance(program, Until):
        return list(labels_of(program.guard)) + _program_labels(program.body)
    if isinstance(program, Free):
        return list(program.labels)
    return []


class _Translator:
    """
    Allocates auxiliary labels and tracks the domains of the labels assigned so far,
    so that fixpoint seeds can be written as typed bottoms and tops.
    """

    def __init__(self, field: Optional[Field]) -> None:
        self._field = field
        self._label_domains: Dict[str, Domain] = (
            dict(field.scope().label_domains) if field is not None else {}
        )

    def _domain_of(self, formula: Formula) -> Optional[Domain]:
        if self._field is None:
            return None
        scope = DomainScope(self._field.nodes, self._label_domains)
        try:
            return infer_domains(formula, self._field, scope=scope).result
        except SmucError:
            return None

    def _note(self, label: str, formula: Formula) -> None:
        domain = self._domain_of(formula)
        if domain is not None:
            self._label_domains[label] = domain

    def _seed(self, fixpoint: Formula, domain: Optional[Domain]) -> Formula:
        annotation = fixpoint.domain  # type: ignore
        if annotation is None and domain is not None:
            annotation = domain.to_text()
        return Top(annotation) if isinstance(fixpoint, Nu) else Bottom(annotation)

    def _assign(self, label: str, formula: Formula) -> Assign:
        self._note(label, formula)
        return Assign(label, formula)

    def program(self, program: Program, counter: int) -> Tuple[Program, int]:
        if isinstance(program, Skip):
            return (SKIP, counter)
        if isinstance(program, Free):
            for label in program.labels:
                self._label_domains.pop(label, None)
            return (program, counter)
        if isinstance(program, Assign):
            (evaluation, following) = self.formula(
                program.formula, program.label, counter
            )
            if following == counter:
                return (evaluation, following)
            return (
                Seq(
                    evaluation,
                    Free(auxiliary(index) for index in range(counter, following)),
                ),
                following,
            )
        if isinstance(program, Seq):
            (first, middle) = self.program(program.first, counter)
            (second, last) = self.program(program.second, middle)
            return (sequence([first, wait(auxiliary(last)), second]), last + 1)
        if isinstance(program, If):
            (guard, after_guard) = self.formula(
                program.guard, auxiliary(counter), counter + 1
            )
            (then, after_then) = self.program(program.then, after_guard)
            (otherwise, last) = self.program(program.otherwise, after_then)
            return (Seq(guard, If(Label(auxiliary(counter)), then, otherwise)), last)
        if isinstance(program, Until):
            (guard, after_guard) = self.formula(
                program.guard, auxiliary(counter), counter + 1
            )
            (body, after_body) = self.program(program.body, after_guard)
            loop = Until(
                Label(auxiliary(counter)),
                sequence([body, wait(auxiliary(after_body)), guard]),
            )
            return (Seq(guard, loop), after_body + 1)
        raise TypeError(f"Not a program: {program!r}")

    def formula(self, formula: Formula, target: str, counter: int) -> Tuple[Program, int]:
        if isinstance(formula, (Label, Const, Bottom, Top)):
            if isinstance(formula, (Bottom, Top)) and formula.domain is None:
                domain = self._domain_of(formula)
                if domain is None and target in self._label_domains:
                    domain = self._label_domains[target]
                if domain is not None:
                    formula = type(formula)(domain.to_text())
            return (self._assign(target, formula), counter)
        if isinstance(formula, Var):
            raise TranslationError(
                f"Variable {formula.name} is not bound by any fixpoint"
            )
        if isinstance(formula, Apply):
            parts: List[Program] = []
            arguments: List[Formula] = []
            following = counter
            for arg in formula.args:
                if isinstance(arg, Const):
                    arguments.append(arg)
                    continue
                label = auxiliary(following)
                (evaluation, following) = self.formula(arg, label, following + 1)
                parts.append(evaluation)
                arguments.append(Label(label))
            parts.append(self._assign(target, Apply(formula.function, arguments)))
            return (sequence(parts), following)
        if isinstance(formula, (ModalOut, ModalIn)):
            label = auxiliary(counter)
            (evaluation, following) = self.formula(formula.body, label, counter + 1)
            modal = type(formula)(formula.capability, formula.aggregator, Label(label))
            return (Seq(evaluation, self._assign(target, modal)), following)
        if isinstance(formula, (Mu, Nu)):
            previous = auxiliary(counter)
            current = auxiliary(counter + 1)
            seed = self._seed(formula, self._domain_of(formula))
            seeds = [self._assign(previous, seed), self._assign(current, seed)]
            (body, following) = self.formula(
                substitute(formula.body, formula.var, Label(previous)),
                current,
                counter + 2,
            )
            done = auxiliary(following)
            loop = Until(
                Label(done),
                sequence(
                    [
                        self._assign(previous, Label(current)),
                        body,
                        self._assign(
                            done, Apply("same", [Label(previous), Label(current)])
                        ),
                    ]
                ),
            )
            return (
                sequence(
                    [
                        *seeds,
                        self._assign(done, Const(FALSE)),
                        loop,
                        self._assign(target, Label(current)),
                    ]
                ),
                following + 1,
            )
        raise TypeError(f"Not a formula: {formula!r}")


def _check_fresh(program: Program, field: Optional[Field]) -> None:
    clashes = [label for label in _program_labels(program) if is_auxiliary(label)]
    if field is not None:
        clashes.extend(label for label in field.node_labels if is_auxiliary(label))
    if clashes:
        raise AuxiliaryCollisionError(
            f"Labels {sorted(immutableset(clashes))} "
            f"use the reserved prefix {AUXILIARY_PREFIX}"
        )


def translate_program(
    program: Program, counter: int = 0, *, field: Optional[Field] = None
) -> Tuple[Program, int]:
    """
    The simple assignment form of *program*, allocating auxiliaries from *counter* on.

    With a *field*, fixpoint seeds carry the domain inferred for their fixpoint;
    otherwise fixpoints must carry a domain annotation unless their domain can be taken
    from the target label at run time.
    """
    _check_fresh(program, field)
    return _Translator(field).program(program, counter)


def translate_formula(
    formula: Formula, target: str, counter: int = 0, *, field: Optional[Field] = None
) -> Tuple[Program, int]:
    """
    A simple assignment program leaving the value of *formula* in *target*.
    """
    _check_fresh(Assign(target, formula), field)
    return _Translator(field).formula(formula, target, counter)


@attrs(frozen=True, slots=True)
class DifferentialReport:
    """
    The result of running a program directly and through its simple assignment form.
    """

    direct: Field = attrib(validator=instance_of(Field))
    translated: Field = attrib(validator=instance_of(Field))
    difference: Optional[Tuple[str, Optional[str]]] = attrib(default=None)

    @property
    def equal(self) -> bool:
        return self.difference is None

    def describe(self) -> str:
        if self.difference is None:
            return "Final fields agree on all non-auxiliary labels"
        (label, node) = self.difference
        if node is None:
            return f"Label {label} is defined in only one of the final fields"
        return (
            f"Label {label} differs at node {node}: "
            f"{self.direct.read(label, node)!r} directly, "
            f"{self.translated.read(label, node)!r} after translation"
        )


def first_difference(first: Field, second: Field) -> Optional[Tuple[str, Optional[str]]]:
    """
    The first ``(label, node)`` at which two fields' node labels differ;
    the node is `None` if the label is missing or typed differently on one side.
    """
    for label in sorted(immutableset([*first.node_labels, *second.node_labels])):
        if label not in first.node_labels or label not in second.node_labels:
            return (label, None)
        if first.label_domain(label) != second.label_domain(label):
            return (label, None)
        for node in first.nodes:
            if first.read(label, node) != second.read(label, node):
                return (label, node)
    return None


def differential_check(
    program: Program, field: Field, *, settings: Optional[SmucSettings] = None
) -> DifferentialReport:
    """
    Run *program* and its simple assignment form on *field* and compare the final fields
    with auxiliary labels erased.
    """
    (translated_program, allocated) = translate_program(program, field=field)
    logging.info("Simple assignment form uses %s auxiliary labels", allocated)
    direct = run(program, field, settings=settings).field.erase_auxiliaries()
    translated = run(
        translated_program, field, settings=settings
    ).field.erase_auxiliaries()
    report = DifferentialReport(direct, translated, first_difference(direct, translated))
    if not report.equal:
        logging.warning("Differential check failed: %s", report.describe())
    return report
