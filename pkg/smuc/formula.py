r"""
Formulas: abstract syntax, concrete syntax, static checks and domain inference.

Concrete syntax::

    formula ::= 'mu' NAME [':' domain] '.' formula
              | 'nu' NAME [':' domain] '.' formula
              | '<' ('out' | 'in') [NAME] [':' NAME] '>' [NAME] formula
              | 'bot' [':' domain] | 'top' [':' domain]
              | 'true' | 'false' | NUMBER | 'inf'
              | NAME '(' [formula {',' formula}] ')'
              | NAME
              | '(' formula ')'

In a modality the first name is an edge label or a capability (``id`` if omitted)
and the name after ``:`` is the aggregator (``join`` if omitted).
A registered aggregator may also be written right after the ``>``,
as in ``<out id> or z``.
Names bound by ``mu``/``nu`` are variables; all other names are node labels.
"""
import re
from random import Random
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Set, Tuple, Union

from attr import attrib, attrs
from attr.validators import instance_of, optional

from immutablecollections import ImmutableDict, ImmutableSet, immutabledict, immutableset

from smuc.capabilities import (
    CAPABILITY_REGISTRY,
    CapabilityRef,
    EdgeContext,
    sample_monotone,
)
from smuc.domains import BoolDomain, Domain, TropicalDomain, parse_domain
from smuc.errors import (
    DomainInferenceError,
    SyntaxErrorWithPosition,
    UnknownFunctionError,
    UnknownLabelError,
)
from smuc.functions import FUNCTION_REGISTRY, DomainScope, FunctionRegistry
from smuc.values import BoolValue, NumValue, Value

DEFAULT_CAPABILITY = "id"
DEFAULT_AGGREGATOR = "join"

FORMULA_GRAMMAR = """\
formula ::= 'mu' NAME [':' domain] '.' formula | 'nu' NAME [':' domain] '.' formula
          | '<' ('out' | 'in') [NAME] [':' NAME] '>' [NAME] formula
          | 'bot' [':' domain] | 'top' [':' domain]
          | 'true' | 'false' | NUMBER | 'inf'
          | NAME '(' [formula {',' formula}] ')' | NAME | '(' formula ')'
"""


@attrs(frozen=True, slots=True)
class Label:
    name: str = attrib(validator=instance_of(str))


@attrs(frozen=True, slots=True)
class Var:
    name: str = attrib(validator=instance_of(str))


@attrs(frozen=True, slots=True)
class Apply:
    function: str = attrib(validator=instance_of(str))
    args: Tuple["Formula", ...] = attrib(converter=tuple, default=())


@attrs(frozen=True, slots=True)
class ModalOut:
    """
    Aggregates the values of the successors of each node.
    """

    capability: str = attrib(validator=instance_of(str))
    aggregator: str = attrib(validator=instance_of(str))
    body: "Formula" = attrib()
    direction = "out"


@attrs(frozen=True, slots=True)
class ModalIn:
    """
    Aggregates the values of the predecessors of each node.
    """

    capability: str = attrib(validator=instance_of(str))
    aggregator: str = attrib(validator=instance_of(str))
    body: "Formula" = attrib()
    direction = "in"


@attrs(frozen=True, slots=True)
class Mu:
    var: str = attrib(validator=instance_of(str))
    body: "Formula" = attrib()
    domain: Optional[str] = attrib(validator=optional(instance_of(str)), default=None)
    keyword = "mu"


@attrs(frozen=True, slots=True)
class Nu:
    var: str = attrib(validator=instance_of(str))
    body: "Formula" = attrib()
    domain: Optional[str] = attrib(validator=optional(instance_of(str)), default=None)
    keyword = "nu"


@attrs(frozen=True, slots=True)
class Const:
    value: Value = attrib()


@attrs(frozen=True, slots=True)
class Bottom:
    domain: Optional[str] = attrib(validator=optional(instance_of(str)), default=None)
    keyword = "bot"


@attrs(frozen=True, slots=True)
class Top:
    domain: Optional[str] = attrib(validator=optional(instance_of(str)), default=None)
    keyword = "top"


Formula = Union[Label, Var, Apply, ModalOut, ModalIn, Mu, Nu, Const, Bottom, Top]
Modal = (ModalOut, ModalIn)
Fixpoint = (Mu, Nu)

# Where a subformula sits in its formula: the child indices leading to it from the root.
Position = Tuple[int, ...]


def children(formula: Formula) -> Tuple[Formula, ...]:
    if isinstance(formula, Apply):
        return formula.args
    if isinstance(formula, (ModalOut, ModalIn, Mu, Nu)):
        return (formula.body,)
    return ()


# Concrete syntax


@attrs(frozen=True, slots=True)
class Token:
    kind: str = attrib(validator=instance_of(str))
    text: str = attrib(validator=instance_of(str))
    offset: int = attrib(validator=instance_of(int))
    line: int = attrib(validator=instance_of(int))
    column: int = attrib(validator=instance_of(int))


_TOKEN_PATTERNS = (
    ("comment", r"#[^\n]*"),
    ("space", r"\s+"),
    ("name", r"\$[A-Za-z_][A-Za-z0-9_]*(?::[0-9]+)?|[A-Za-z_][A-Za-z0-9_']*"),
    ("number", r"[0-9]+(?:/[0-9]+)?"),
    ("assign", r"<-|←"),
    ("symbol", r"[()\[\],.:;<>{}]|μ|ν"),
)
_TOKEN_REGEX = re.compile(
    "|".join(f"(?P<{kind}>{pattern})" for (kind, pattern) in _TOKEN_PATTERNS)
)


class Scanner:
    """
    Splits formula and program text into tokens, tracking lines and columns.
    """

    def __init__(self, text: str, *, grammar: str = FORMULA_GRAMMAR) -> None:
        self._text = text
        self._grammar = grammar

    def tokens(self) -> List[Token]:
        ret = []
        position = 0
        line = 1
        line_start = 0
        while position < len(self._text):
            match = _TOKEN_REGEX.match(self._text, position)
            if match is None:
                raise SyntaxErrorWithPosition(
                    f"Unexpected character {self._text[position]!r}",
                    line=line,
                    column=position - line_start + 1,
                    grammar=self._grammar,
                )
            kind = match.lastgroup
            text = match.group()
            if kind not in ("comment", "space"):
                if text == "μ":
                    text = "mu"
                elif text == "ν":
                    text = "nu"
                column = position - line_start + 1
                ret.append(Token(kind, text, position, line, column))  # type: ignore
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = position + text.rindex("\n") + 1
            position = match.end()
        ret.append(Token("end", "", len(self._text), line, position - line_start + 1))
        return ret


_DOMAIN_CONSTRUCTORS = ("product", "lex", "hoare", "reverse")


class FormulaParser:
    """
    A recursive-descent parser over `Scanner` tokens.

    Subclasses reuse `_formula` to parse formulas embedded in larger texts.
    """

    def __init__(
        self,
        text: str,
        *,
        registry: FunctionRegistry = FUNCTION_REGISTRY,
        free_variables: Sequence[str] = (),
        grammar: str = FORMULA_GRAMMAR,
    ) -> None:
        self._text = text
        self._grammar = grammar
        self._tokens = Scanner(text, grammar=grammar).tokens()
        self._pos = 0
        self._registry = registry
        # innermost binding last; maps a written name to its (possibly renamed) variable
        self._scopes: List[Tuple[str, str]] = [(name, name) for name in free_variables]
        self._binders_used: Set[str] = set(free_variables)
        self._names_in_text = immutableset(
            token.text for token in self._tokens if token.kind == "name"
        )

    def parse(self) -> Formula:
        formula = self._formula()
        self._expect_end()
        return formula

    # token helpers

    def _peek(self, offset: int = 0) -> Token:
        return self._tokens[min(self._pos + offset, len(self._tokens) - 1)]

    def _at(self, text: str, offset: int = 0) -> bool:
        token = self._peek(offset)
        return token.kind != "end" and token.text == text

    def _advance(self) -> Token:
        token = self._peek()
        if token.kind != "end":
            self._pos += 1
        return token

    def _fail(self, message: str, token: Optional[Token] = None):
        token = token or self._peek()
        found = "end of input" if token.kind == "end" else repr(token.text)
        raise SyntaxErrorWithPosition(
            f"{message}, found {found}",
            line=token.line,
            column=token.column,
            grammar=self._grammar,
        )

    def _consume(self, expected: str) -> Token:
        if not self._at(expected):
            self._fail(f"Expected {expected!r}")
        return self._advance()

    def _name(self) -> str:
        token = self._peek()
        if token.kind != "name":
            self._fail("Expected a name")
        return self._advance().text

    def _expect_end(self) -> None:
        if self._peek().kind != "end":
            self._fail("Unexpected trailing input")

    # domain annotations are kept as text and resolved against a field later

    def _domain_text(self) -> str:
        start = self._peek()
        name = self._name()
        if self._at("["):
            self._skip_balanced("[", "]")
        elif self._at("(") and name in _DOMAIN_CONSTRUCTORS:
            self._skip_balanced("(", ")")
        end = self._tokens[self._pos - 1]
        return self._text[start.offset : end.offset + len(end.text)]

    def _skip_balanced(self, opening: str, closing: str) -> None:
        depth = 0
        while True:
            token = self._advance()
            if token.kind == "end":
                self._fail(f"Unbalanced {opening!r} in domain annotation", token)
            if token.text == opening:
                depth += 1
            elif token.text == closing:
                depth -= 1
                if depth == 0:
                    return

    def _optional_annotation(self) -> Optional[str]:
        if self._at(":"):
            self._advance()
            return self._domain_text()
        return None

    # variables

    def _lookup_variable(self, name: str) -> Optional[str]:
        for (written, bound) in reversed(self._scopes):
            if written == name:
                return bound
        return None

    def _fresh_binder(self, name: str) -> str:
        candidate = name
        while candidate in self._binders_used or (
            candidate != name and candidate in self._names_in_text
        ):
            candidate += "'"
        self._binders_used.add(candidate)
        return candidate

    # grammar

    def _formula(self) -> Formula:
        token = self._peek()
        if token.kind == "name" and token.text in ("mu", "nu"):
            return self._fixpoint()
        if token.text == "<" and token.kind == "symbol":
            return self._modal()
        if token.text == "(" and token.kind == "symbol":
            self._advance()
            inner = self._formula()
            self._consume(")")
            return inner
        if token.kind == "number":
            self._advance()
            return Const(NumValue.parse(token.text))
        if token.kind == "name":
            return self._named()
        return self._fail("Expected a formula")

    def _fixpoint(self) -> Formula:
        keyword = self._advance().text
        written = self._name()
        annotation = self._optional_annotation()
        self._consume(".")
        bound = self._fresh_binder(written)
        self._scopes.append((written, bound))
        try:
            body = self._formula()
        finally:
            self._scopes.pop()
        if keyword == "mu":
            return Mu(bound, body, annotation)
        return Nu(bound, body, annotation)

    def _modal(self) -> Formula:
        self._consume("<")
        direction = self._name()
        if direction not in ("out", "in"):
            self._fail("Expected 'out' or 'in'")
        capability = DEFAULT_CAPABILITY
        aggregator: Optional[str] = None
        if self._peek().kind == "name":
            capability = self._name()
        if self._at(":"):
            self._advance()
            aggregator = self._name()
        self._consume(">")
        following = self._peek()
        if (
            aggregator is None
            and following.kind == "name"
            and self._registry.is_aggregator(following.text)
            and self._lookup_variable(following.text) is None
            and not self._at("(", 1)
            and self._peek(1).kind != "end"
        ):
            aggregator = self._advance().text
        body = self._formula()
        if direction == "out":
            return ModalOut(capability, aggregator or DEFAULT_AGGREGATOR, body)
        return ModalIn(capability, aggregator or DEFAULT_AGGREGATOR, body)

    def _named(self) -> Formula:
        name = self._advance().text
        if name in ("bot", "top"):
            annotation = self._optional_annotation()
            return Bottom(annotation) if name == "bot" else Top(annotation)
        if name in ("true", "false"):
            return Const(BoolValue(name == "true"))
        if name == "inf":
            return Const(NumValue.infinity())
        if self._at("("):
            self._advance()
            args: List[Formula] = []
            if not self._at(")"):
                args.append(self._formula())
                while self._at(","):
                    self._advance()
                    args.append(self._formula())
            self._consume(")")
            return Apply(name, args)
        bound = self._lookup_variable(name)
        if bound is not None:
            return Var(bound)
        return Label(name)


def parse_formula(
    text: str,
    *,
    registry: FunctionRegistry = FUNCTION_REGISTRY,
    free_variables: Sequence[str] = (),
) -> Formula:
    """
    Parse *text*; nested binders reusing a name are renamed apart with primes.
    """
    return FormulaParser(text, registry=registry, free_variables=free_variables).parse()


def _value_text(value: Value) -> str:
    if isinstance(value, BoolValue):
        return "true" if value.value else "false"
    if isinstance(value, NumValue):
        return value.text()
    raise DomainInferenceError(f"Constant {value!r} has no concrete syntax")


def formula_to_text(formula: Formula) -> str:
    """
    Concrete syntax for *formula*; `parse_formula` reads it back to an equal formula.
    """
    if isinstance(formula, (Label, Var)):
        return formula.name
    if isinstance(formula, Apply):
        arguments = ", ".join(formula_to_text(arg) for arg in formula.args)
        return f"{formula.function}({arguments})"
    if isinstance(formula, (ModalOut, ModalIn)):
        return (
            f"<{formula.direction} {formula.capability}:{formula.aggregator}> "
            f"{formula_to_text(formula.body)}"
        )
    if isinstance(formula, (Mu, Nu)):
        annotation = f" : {formula.domain}" if formula.domain else ""
        body = formula_to_text(formula.body)
        return f"{formula.keyword} {formula.var}{annotation}. {body}"
    if isinstance(formula, Const):
        return _value_text(formula.value)
    if isinstance(formula, (Bottom, Top)):
        annotation = f" : {formula.domain}" if formula.domain else ""
        return f"{formula.keyword}{annotation}"
    raise TypeError(f"Not a formula: {formula!r}")


# Static checks


def free_vars(formula: Formula) -> ImmutableSet[str]:
    if isinstance(formula, Var):
        return immutableset([formula.name])
    if isinstance(formula, (Mu, Nu)):
        return immutableset(
            name for name in free_vars(formula.body) if name != formula.var
        )
    return immutableset(name for child in children(formula) for name in free_vars(child))


def closed_under(formula: Formula, environment: Mapping[str, object]) -> bool:
    return all(name in environment for name in free_vars(formula))


def labels_of(formula: Formula) -> ImmutableSet[str]:
    """
    Node labels read directly by *formula*.
    """
    if isinstance(formula, Label):
        return immutableset([formula.name])
    return immutableset(name for child in children(formula) for name in labels_of(child))


def modalities_of(formula: Formula) -> ImmutableSet[Union[ModalOut, ModalIn]]:
    own = [formula] if isinstance(formula, (ModalOut, ModalIn)) else []
    return immutableset(
        own + [modal for child in children(formula) for modal in modalities_of(child)]
    )


def functions_of(formula: Formula) -> ImmutableSet[str]:
    own = [formula.function] if isinstance(formula, Apply) else []
    return immutableset(
        own + [name for child in children(formula) for name in functions_of(child)]
    )


def substitute(formula: Formula, var: str, replacement: Formula) -> Formula:
    """
    Replace free occurrences of *var* in *formula*.

    Binders are distinct after parsing, so no capture can occur.
    """
    if isinstance(formula, Var):
        return replacement if formula.name == var else formula
    if isinstance(formula, Apply):
        return Apply(
            formula.function, [substitute(arg, var, replacement) for arg in formula.args]
        )
    if isinstance(formula, ModalOut):
        return ModalOut(
            formula.capability,
            formula.aggregator,
            substitute(formula.body, var, replacement),
        )
    if isinstance(formula, ModalIn):
        return ModalIn(
            formula.capability,
            formula.aggregator,
            substitute(formula.body, var, replacement),
        )
    if isinstance(formula, (Mu, Nu)):
        if formula.var == var:
            return formula
        return type(formula)(
            formula.var, substitute(formula.body, var, replacement), formula.domain
        )
    return formula


@attrs(frozen=True, slots=True)
class MonotonicityReport:
    """
    The outcome of `check_monotone`; *offender* names the first operator rejected.
    """

    accepted: bool = attrib(validator=instance_of(bool))
    offender: Optional[str] = attrib(default=None)
    reason: str = attrib(default="")

    def __bool__(self) -> bool:
        return self.accepted


def check_monotone(
    formula: Formula,
    field=None,
    *,
    registry: FunctionRegistry = FUNCTION_REGISTRY,
    rng: Optional[Random] = None,
    samples: int = 50,
    types: Optional["DomainTyping"] = None,
) -> MonotonicityReport:
    """
    Check that every fixpoint body is built from monotone operators.

    Only operators lying between a binder and an occurrence of a bound variable matter:
    subformulas mentioning no enclosing bound variable are constant during the iteration.
    When a *field* is given, the capabilities of such modalities are also checked
    for monotonicity by sampling their value domain.
    Given *types* (or a *field* to infer them from), functions whose monotonicity
    depends on their argument domains are judged on the inferred domains.
    """
    if types is None and field is not None:
        types = infer_domains(formula, field)
    sample_rng = rng or Random(0)

    def visit(
        node: Formula, position: Position, bound: ImmutableSet[str]
    ) -> MonotonicityReport:
        for (index, child) in enumerate(children(node)):
            report = visit(
                child,
                position + (index,),
                immutableset([*bound, node.var]) if isinstance(node, (Mu, Nu)) else bound,
            )
            if not report:
                return report
        iterated = immutableset(name for name in free_vars(node) if name in bound)
        if not iterated:
            return MonotonicityReport(True)
        if isinstance(node, Apply):
            spec = registry.lookup(node.function)
            argument_domains = _argument_domains(node, position, types)
            if not spec.is_monotone(argument_domains):
                return MonotonicityReport(
                    False,
                    node.function,
                    f"{node.function} is not monotone but is applied to "
                    f"{', '.join(sorted(iterated))} under a fixpoint",
                )
        if isinstance(node, (ModalOut, ModalIn)):
            spec = registry.lookup_aggregator(node.aggregator)
            if not spec.monotone:
                return MonotonicityReport(
                    False,
                    node.aggregator,
                    f"aggregator {node.aggregator} is not monotone",
                )
            if field is not None and types is not None:
                witness = _sample_modal(node, position, field, types, sample_rng, samples)
                if witness:
                    return MonotonicityReport(False, node.capability, witness)
        return MonotonicityReport(True)

    return visit(formula, (), immutableset())


def _argument_domains(
    node: Apply, position: Position, types: Optional["DomainTyping"]
) -> Optional[Sequence[Domain]]:
    if types is None:
        return None
    found: List[Domain] = []
    for index in range(len(node.args)):
        domain = types.domains.get(position + (index,))
        if domain is None:
            return None
        found.append(domain)
    return found


def _sample_modal(
    modal: Union[ModalOut, ModalIn],
    position: Position,
    field,
    types: "DomainTyping",
    rng: Random,
    samples: int,
) -> Optional[str]:
    domain = types.input_domain(position)
    for (source, target) in field.edges:
        capability = resolve_capability(field, modal.capability, (source, target))
        context = EdgeContext(source, target, domain=domain, reader=field.read)
        witness = sample_monotone(
            capability, domain, rng, contexts=[context], samples=samples
        )
        if witness is not None:
            return (
                f"capability {modal.capability} on ({source},{target}) maps "
                f"{witness[0]!r} below {witness[1]!r} "
                "to incomparable or decreasing values"
            )
    return None


def resolve_capability(field, name: str, edge: Tuple[str, str]):
    """
    The capability *name* denotes on *edge*: an edge label of *field*,
    or else a registered capability taking no arguments.
    """
    if field is not None and name in field.edge_labels:
        return field.capability(name, edge)
    if name in CAPABILITY_REGISTRY:
        return CAPABILITY_REGISTRY.build(CapabilityRef(name))
    raise UnknownLabelError(f"{name} is neither an edge label nor a capability")


# Domain inference


@attrs(frozen=True, slots=True)
class DomainTyping:
    """
    The domain of every subformula, by position.

    For modalities, *inputs* holds the domain of the values flowing along edges.
    """

    domains: ImmutableDict[Position, Domain] = attrib(converter=immutabledict)
    inputs: ImmutableDict[Position, Domain] = attrib(converter=immutabledict)

    def domain(self, position: Position) -> Domain:
        return self.domains[position]

    def input_domain(self, position: Position) -> Domain:
        return self.inputs[position]

    @property
    def result(self) -> Domain:
        return self.domains[()]


def _default_constant_domain(value: Value) -> Domain:
    if isinstance(value, BoolValue):
        return BoolDomain()
    return TropicalDomain(True)


class _DomainInference:
    def __init__(
        self,
        scope: DomainScope,
        edge_domain: Callable[[str], Optional[Domain]],
        registry: FunctionRegistry,
    ) -> None:
        self._scope = scope
        self._edge_domain = edge_domain
        self._registry = registry
        self.domains: Dict[Position, Domain] = {}
        self.inputs: Dict[Position, Domain] = {}

    def annotation(self, text: str) -> Domain:
        return parse_domain(text, node_order=self._scope.node_order)

    def infer_detached(
        self,
        node: Formula,
        variables: Mapping[str, Optional[Domain]],
        expected: Optional[Domain],
    ) -> Optional[Domain]:
        """
        Infer without recording anything.
        """
        scratch = _DomainInference(self._scope, self._edge_domain, self._registry)
        return scratch.infer(node, (), variables, expected)

    def infer(
        self,
        node: Formula,
        position: Position,
        variables: Mapping[str, Optional[Domain]],
        expected: Optional[Domain],
    ) -> Optional[Domain]:
        domain = self._infer(node, position, variables, expected)
        if domain is not None:
            self.domains[position] = domain
        return domain

    def _infer(
        self,
        node: Formula,
        position: Position,
        variables: Mapping[str, Optional[Domain]],
        expected: Optional[Domain],
    ) -> Optional[Domain]:
        if isinstance(node, Label):
            if node.name not in self._scope.label_domains:
                raise UnknownLabelError(f"Unknown label {node.name}")
            return self._scope.label_domains[node.name]
        if isinstance(node, Var):
            if node.name not in variables:
                raise DomainInferenceError(f"Variable {node.name} is not bound")
            return variables[node.name]
        if isinstance(node, Const):
            if expected is not None and expected.contains(node.value):
                return expected
            return _default_constant_domain(node.value)
        if isinstance(node, (Bottom, Top)):
            if node.domain:
                return self.annotation(node.domain)
            return expected
        if isinstance(node, (Mu, Nu)):
            if node.domain:
                domain: Optional[Domain] = self.annotation(node.domain)
            else:
                domain = self.infer_detached(
                    node.body, {**variables, node.var: None}, expected
                )
                if domain is None:
                    domain = expected
            if domain is None:
                raise DomainInferenceError(
                    f"Cannot infer the domain of {node.keyword} {node.var}; annotate it"
                )
            self.infer(
                node.body, position + (0,), {**variables, node.var: domain}, domain
            )
            return domain
        if isinstance(node, (ModalOut, ModalIn)):
            edge_domain = self._edge_domain(node.capability)
            body_domain = self.infer(
                node.body, position + (0,), variables, edge_domain or expected
            )
            carried = edge_domain or body_domain or expected
            if carried is None:
                return None
            self.inputs[position] = carried
            spec = self._registry.lookup_aggregator(node.aggregator)
            if spec.homogeneous:
                return carried
            return spec.result_domain([carried], self._scope)  # type: ignore
        if isinstance(node, Apply):
            spec = self._registry.lookup(node.function)
            spec.check_arity(len(node.args))
            if spec.homogeneous:
                shared = None
                for arg in node.args:
                    if isinstance(arg, Const):
                        continue
                    shared = self.infer_detached(arg, variables, None)
                    if shared is not None:
                        break
                if shared is None:
                    shared = expected
                if (
                    shared is None
                    and node.args
                    and all(isinstance(arg, Const) for arg in node.args)
                ):
                    shared = _default_constant_domain(node.args[0].value)  # type: ignore
                for (index, arg) in enumerate(node.args):
                    self.infer(arg, position + (index,), variables, shared)
                return shared
            argument_domains = [
                self.infer(arg, position + (index,), variables, None)
                for (index, arg) in enumerate(node.args)
            ]
            if any(domain is None for domain in argument_domains):
                return spec.result_domain_without_arguments(self._scope)
            return spec.result_domain(argument_domains, self._scope)  # type: ignore
        raise TypeError(f"Not a formula: {node!r}")


def infer_domains(
    formula: Formula,
    field=None,
    *,
    scope: Optional[DomainScope] = None,
    variables: Optional[Mapping[str, Domain]] = None,
    expected: Optional[Domain] = None,
    registry: FunctionRegistry = FUNCTION_REGISTRY,
) -> DomainTyping:
    """
    Assign a domain to every subformula of *formula*.

    Labels take the domains declared in *field* (or in *scope*),
    modalities the domain of their edge label if it declares one,
    and fixpoints their annotation or the domain inferred for their body.
    """
    if scope is None:
        if field is None:
            raise DomainInferenceError("Domain inference needs a field or a scope")
        scope = field.scope()

    def edge_domain(name: str) -> Optional[Domain]:
        if field is not None and name in field.edge_labels:
            return field.edge_labels[name].domain
        return None

    inference = _DomainInference(scope, edge_domain, registry)
    inference.infer(formula, (), dict(variables or {}), expected)
    missing = _untyped_positions(formula, (), inference.domains)
    if missing:
        raise DomainInferenceError(
            "Cannot infer a domain for "
            f"{formula_to_text(_at_position(formula, missing[0]))} "
            f"in {formula_to_text(formula)}; add a ': domain' annotation"
        )
    return DomainTyping(inference.domains, inference.inputs)


def _untyped_positions(
    formula: Formula, position: Position, domains: Mapping[Position, Domain]
) -> List[Position]:
    ret = [] if position in domains else [position]
    for (index, child) in enumerate(children(formula)):
        ret.extend(_untyped_positions(child, position + (index,), domains))
    return ret


def _at_position(formula: Formula, position: Position) -> Formula:
    for index in position:
        formula = children(formula)[index]
    return formula


def check_functions(
    formula: Formula, registry: FunctionRegistry = FUNCTION_REGISTRY
) -> None:
    """
    Raise `UnknownFunctionError` for unregistered functions or aggregators.
    """
    for application in _applications(formula):
        registry.lookup(application.function).check_arity(len(application.args))
    for modal in modalities_of(formula):
        if not registry.is_aggregator(modal.aggregator):
            raise UnknownFunctionError(
                f"{modal.aggregator} is not a registered aggregator"
            )


def _applications(formula: Formula) -> List[Apply]:
    own = [formula] if isinstance(formula, Apply) else []
    return own + [node for child in children(formula) for node in _applications(child)]
