"""
The global semantics of formulas.

Every formula denotes a node valuation of the field it is evaluated on.
Fixpoints are computed by synchronous iteration from the lifted bottom (``mu``)
or top (``nu``) until two consecutive iterates are equal.
"""
import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from attr import attrib, attrs
from attr.validators import instance_of

from immutablecollections import ImmutableDict, immutabledict

from smuc.capabilities import Capability, EdgeContext
from smuc.config import SmucSettings
from smuc.domains import Domain
from smuc.errors import (
    DomainInferenceError,
    InfiniteChainError,
    NonMonotoneFormulaError,
)
from smuc.field import Field, NodeValuation
from smuc.formula import (
    Apply,
    Bottom,
    Const,
    DomainTyping,
    Formula,
    Label,
    ModalIn,
    ModalOut,
    Mu,
    Nu,
    Position,
    Top,
    Var,
    check_monotone,
    closed_under,
    formula_to_text,
    infer_domains,
    resolve_capability,
)
from smuc.functions import FUNCTION_REGISTRY, CallContext, FunctionRegistry
from smuc.values import ANY, NONE, Value

_Valuation = Dict[str, Value]


@attrs(frozen=True, slots=True)
class Environment:
    """
    Valuations of formula variables, together with their domains.
    """

    valuations: ImmutableDict[str, NodeValuation] = attrib(
        converter=immutabledict, factory=immutabledict
    )
    domains: ImmutableDict[str, Domain] = attrib(
        converter=immutabledict, factory=immutabledict
    )

    def bind(
        self, var: str, valuation: Mapping[str, Value], domain: Domain
    ) -> "Environment":
        return Environment(
            {**self.valuations, var: immutabledict(valuation)},
            {**self.domains, var: domain},
        )

    def __contains__(self, var: str) -> bool:
        return var in self.valuations

    def __getitem__(self, var: str) -> NodeValuation:
        return self.valuations[var]


EMPTY_ENVIRONMENT = Environment()

# (neighbour, capability, context) for every edge a modality aggregates over at a node
_ModalPlan = Dict[str, List[Tuple[str, Capability, EdgeContext]]]


def canonical_value(domain: Domain, value: Value) -> Value:
    # the agreement markers belong to no domain
    if value == ANY or value == NONE:
        return value
    return domain.canonical(value)


class Evaluator:
    """
    Evaluates formulas over one fixed field.

    Edge contexts and call contexts are built once per subformula and reused
    across fixpoint iterations.
    """

    def __init__(
        self,
        field: Field,
        *,
        settings: Optional[SmucSettings] = None,
        registry: FunctionRegistry = FUNCTION_REGISTRY,
    ) -> None:
        self.field = field
        self.settings = settings or SmucSettings.default()
        self._registry = registry
        self._iteration_cap = self.settings.iteration_cap(len(field.nodes))
        self._typing: Optional[DomainTyping] = None
        self._modal_plans: Dict[Position, _ModalPlan] = {}
        self._call_contexts: Dict[Position, Dict[str, CallContext]] = {}

    def prepare(
        self,
        formula: Formula,
        environment: Environment = EMPTY_ENVIRONMENT,
        *,
        expected: Optional[Domain] = None,
    ) -> DomainTyping:
        """
        Check *formula* and compute the domains of its subformulas.
        """
        if not closed_under(formula, environment):
            raise DomainInferenceError(
                f"Formula {formula_to_text(formula)} has unbound variables"
            )
        if self.settings.check_monotone:
            report = check_monotone(formula, registry=self._registry)
            if not report:
                raise NonMonotoneFormulaError(report.reason)
        self._typing = infer_domains(
            formula,
            self.field,
            variables=environment.domains,
            expected=expected,
            registry=self._registry,
        )
        if self.settings.check_monotone:
            # some functions are monotone only on particular argument domains
            report = check_monotone(formula, registry=self._registry, types=self._typing)
            if not report:
                raise NonMonotoneFormulaError(report.reason)
        self._modal_plans = {}
        self._call_contexts = {}
        return self._typing

    def evaluate(
        self,
        formula: Formula,
        environment: Environment = EMPTY_ENVIRONMENT,
        *,
        expected: Optional[Domain] = None,
    ) -> NodeValuation:
        self.prepare(formula, environment, expected=expected)
        return immutabledict(self._eval(formula, (), dict(environment.valuations)))

    def result_domain(self) -> Domain:
        if self._typing is None:
            raise RuntimeError("Call prepare or evaluate first")
        return self._typing.result

    def fixpoint_step(
        self, formula: Union[Mu, Nu], environment: Environment = EMPTY_ENVIRONMENT
    ) -> "FixpointStep":
        """
        The one-iteration function of the fixpoint *formula*.
        """
        if not isinstance(formula, (Mu, Nu)):
            raise DomainInferenceError(
                f"Only fixpoint formulas can be iterated, not {formula_to_text(formula)}"
            )
        typing = self.prepare(formula, environment)
        domain = typing.result
        self._require_finite_chains(formula, domain)
        valuations = dict(environment.valuations)

        def step(valuation: Mapping[str, Value]) -> NodeValuation:
            valuations[formula.var] = valuation  # type: ignore
            return immutabledict(self._eval(formula.body, (0,), valuations))

        return FixpointStep(
            step,
            nodes=self.field.nodes,
            domain=domain,
            greatest=isinstance(formula, Nu),
            iteration_cap=self._iteration_cap,
        )

    def trace(
        self, formula: Formula, environment: Environment = EMPTY_ENVIRONMENT
    ) -> List[NodeValuation]:
        """
        Every iterate of the outermost fixpoint of *formula*, from the lifted bottom
        (or top) up to and including the first iterate equal to its successor.

        A formula which is not a fixpoint has the single-row trace of its value.
        """
        if not isinstance(formula, (Mu, Nu)):
            return [self.evaluate(formula, environment)]
        return self.fixpoint_step(formula, environment).iterate()

    def _require_finite_chains(self, formula: Formula, domain: Domain) -> None:
        if not domain.finite_chains:
            raise InfiniteChainError(
                f"Domain {domain} has infinite chains; "
                f"{formula_to_text(formula)} cannot be computed by iteration"
            )

    def _eval(
        self,
        formula: Formula,
        position: Position,
        variables: Dict[str, Mapping[str, Value]],
    ) -> _Valuation:
        nodes = self.field.nodes
        if isinstance(formula, Label):
            return dict(self.field.valuation(formula.name))
        if isinstance(formula, Var):
            return dict(variables[formula.name])
        if isinstance(formula, Const):
            return {node: formula.value for node in nodes}
        if isinstance(formula, Bottom):
            bottom = self._domain(position).bottom
            return {node: bottom for node in nodes}
        if isinstance(formula, Top):
            top = self._domain(position).top
            return {node: top for node in nodes}
        if isinstance(formula, Apply):
            return self._eval_apply(formula, position, variables)
        if isinstance(formula, (ModalOut, ModalIn)):
            return self._eval_modal(formula, position, variables)
        if isinstance(formula, (Mu, Nu)):
            return self._eval_fixpoint(formula, position, variables)
        raise TypeError(f"Not a formula: {formula!r}")

    def _domain(self, position: Position) -> Domain:
        return self._typing.domain(position)  # type: ignore

    def _contexts(
        self, position: Position, argument_domains: Sequence[Domain]
    ) -> Dict[str, CallContext]:
        if position not in self._call_contexts:
            domain = self._domain(position)
            self._call_contexts[position] = {
                node: CallContext(
                    node,
                    domain,
                    argument_domains,
                    reader=self.field.read,
                    node_order=self.field.nodes,
                )
                for node in self.field.nodes
            }
        return self._call_contexts[position]

    def _eval_apply(
        self,
        formula: Apply,
        position: Position,
        variables: Dict[str, Mapping[str, Value]],
    ) -> _Valuation:
        spec = self._registry.lookup(formula.function)
        arguments = [
            self._eval(arg, position + (index,), variables)
            for (index, arg) in enumerate(formula.args)
        ]
        domain = self._domain(position)
        contexts = self._contexts(
            position,
            [self._domain(position + (index,)) for index in range(len(formula.args))],
        )
        return {
            node: canonical_value(
                domain,
                spec.apply([argument[node] for argument in arguments], contexts[node]),
            )
            for node in self.field.nodes
        }

    def _plan(self, formula: Union[ModalOut, ModalIn], position: Position) -> _ModalPlan:
        if position not in self._modal_plans:
            carried = self._typing.input_domain(position)  # type: ignore
            plan: _ModalPlan = {}
            for node in self.field.nodes:
                entries = []
                if isinstance(formula, ModalOut):
                    for successor in self.field.successors(node):
                        edge = (node, successor)
                        entries.append(
                            (
                                successor,
                                resolve_capability(self.field, formula.capability, edge),
                                EdgeContext(
                                    node,
                                    successor,
                                    domain=carried,
                                    reader=self.field.read,
                                ),
                            )
                        )
                else:
                    for predecessor in self.field.predecessors(node):
                        edge = (predecessor, node)
                        entries.append(
                            (
                                predecessor,
                                resolve_capability(self.field, formula.capability, edge),
                                EdgeContext(
                                    predecessor,
                                    node,
                                    domain=carried,
                                    reader=self.field.read,
                                ),
                            )
                        )
                plan[node] = entries
            self._modal_plans[position] = plan
        return self._modal_plans[position]

    def _eval_modal(
        self,
        formula: Union[ModalOut, ModalIn],
        position: Position,
        variables: Dict[str, Mapping[str, Value]],
    ) -> _Valuation:
        body = self._eval(formula.body, position + (0,), variables)
        carried = self._typing.input_domain(position)  # type: ignore
        aggregator = self._registry.lookup_aggregator(formula.aggregator)
        contexts = self._contexts(position, [carried])
        plan = self._plan(formula, position)
        ret = {}
        for node in self.field.nodes:
            # a multiset: neighbours with equal values each contribute
            received = [
                carried.canonical(capability.apply(body[neighbour], context))
                for (neighbour, capability, context) in plan[node]
            ]
            ret[node] = canonical_value(
                self._domain(position), aggregator.apply(received, contexts[node])
            )
        return ret

    def _eval_fixpoint(
        self,
        formula: Union[Mu, Nu],
        position: Position,
        variables: Dict[str, Mapping[str, Value]],
    ) -> _Valuation:
        domain = self._domain(position)
        self._require_finite_chains(formula, domain)
        start = domain.top if isinstance(formula, Nu) else domain.bottom
        current: _Valuation = {node: start for node in self.field.nodes}
        for iteration in range(1, self._iteration_cap + 1):
            inner = dict(variables)
            inner[formula.var] = current
            following = self._eval(formula.body, position + (0,), inner)
            if following == current:
                logging.debug(
                    "%s %s stabilized after %s iterations",
                    formula.keyword,
                    formula.var,
                    iteration,
                )
                return current
            current = following
        raise InfiniteChainError(
            f"{formula.keyword} {formula.var} did not stabilize within "
            f"{self._iteration_cap} iterations"
        )


@attrs(frozen=True, slots=True)
class FixpointStep:
    """
    One synchronous iteration of a fixpoint body, as a function on node valuations.
    """

    step: Callable[[Mapping[str, Value]], NodeValuation] = attrib()
    nodes: Tuple[str, ...] = attrib(converter=tuple, kw_only=True)
    domain: Domain = attrib(kw_only=True)
    greatest: bool = attrib(validator=instance_of(bool), kw_only=True)
    iteration_cap: int = attrib(validator=instance_of(int), kw_only=True)

    def __call__(self, valuation: Mapping[str, Value]) -> NodeValuation:
        return self.step(valuation)

    def initial(self) -> NodeValuation:
        """
        The lifted bottom, or the lifted top for greatest fixpoints.
        """
        start = self.domain.top if self.greatest else self.domain.bottom
        return immutabledict((node, start) for node in self.nodes)

    def below(self, first: Mapping[str, Value], second: Mapping[str, Value]) -> bool:
        """
        Whether *first* comes no later than *second* in the iteration order:
        below it for least fixpoints and above it for greatest ones.
        """
        if self.greatest:
            first, second = second, first
        return all(self.domain.leq(first[node], second[node]) for node in self.nodes)

    def iterate(self) -> List[NodeValuation]:
        trace = [self.initial()]
        for _ in range(self.iteration_cap):
            following = self.step(trace[-1])
            if following == trace[-1]:
                return trace
            trace.append(following)
        raise InfiniteChainError(
            f"Fixpoint did not stabilize within {self.iteration_cap} iterations"
        )

    def fixpoint(self) -> NodeValuation:
        return self.iterate()[-1]


def eval_formula(
    field: Field,
    environment: Environment,
    formula: Formula,
    *,
    settings: Optional[SmucSettings] = None,
    expected: Optional[Domain] = None,
) -> NodeValuation:
    return Evaluator(field, settings=settings).evaluate(
        formula, environment, expected=expected
    )


def eval_trace(
    field: Field,
    environment: Environment,
    formula: Formula,
    *,
    settings: Optional[SmucSettings] = None,
) -> List[NodeValuation]:
    return Evaluator(field, settings=settings).trace(formula, environment)
