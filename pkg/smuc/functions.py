"""
Functions and aggregators usable in formulas.

Every function is described by a `FunctionSpec`.
Functions flagged as *aggregator* may also follow a modality, e.g. ``<out alpha:min> z``,
in which case they are applied to the (possibly empty) multiset of neighbour values.
Only functions flagged *monotone* may occur beneath a fixpoint binder.
"""
import logging
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

from attr import attrib, attrs
from attr.validators import instance_of, optional

from immutablecollections import ImmutableSet, immutabledict, immutableset

from smuc.domains import (
    BoolDomain,
    Domain,
    FiniteSetDomain,
    LexProductDomain,
    NodeOrderDomain,
    ProductDomain,
    ReversedDomain,
    TropicalDomain,
)
from smuc.errors import (
    DomainInferenceError,
    DomainTypeError,
    DuplicateRegistrationError,
    UnknownFunctionError,
)
from smuc.values import (
    ANY,
    NONE,
    AntichainValue,
    BoolValue,
    NodeValue,
    NumValue,
    SetValue,
    TupleValue,
    Value,
)

LabelReader = Callable[[str, str], Value]


@attrs(frozen=True, slots=True)
class DomainScope:
    """
    What a result-domain rule may consult: the field's node order and its label domains.
    """

    node_order: Tuple[str, ...] = attrib(converter=tuple, default=())
    label_domains: Mapping[str, Domain] = attrib(
        converter=immutabledict, factory=immutabledict
    )

    def label_domain(self, label: str) -> Domain:
        if label not in self.label_domains:
            raise DomainInferenceError(f"No domain is known for label {label}")
        return self.label_domains[label]


@attrs(frozen=True, slots=True)
class CallContext:
    """
    A function application at one node.
    """

    node: str = attrib(validator=instance_of(str))
    domain: Domain = attrib()
    argument_domains: Tuple[Domain, ...] = attrib(converter=tuple, default=())
    reader: Optional[LabelReader] = attrib(default=None, kw_only=True)
    node_order: Tuple[str, ...] = attrib(converter=tuple, default=(), kw_only=True)

    def read(self, label: str) -> Value:
        if self.reader is None:
            raise UnknownFunctionError(f"No label access at {self.node} to read {label}")
        return self.reader(label, self.node)


Implementation = Callable[[Sequence[Value], CallContext], Value]
ResultDomainRule = Callable[[Sequence[Domain], DomainScope], Domain]


@attrs(frozen=True, slots=True)
class ScopeRule:
    """
    A result-domain rule which ignores the argument domains.

    Applications using such a rule are typed even while an argument is not,
    e.g. ``or(i, <out:or> z)`` before the domain of ``z`` is known.
    """

    rule: Callable[[DomainScope], Domain] = attrib()

    def __call__(self, argument_domains: Sequence[Domain], scope: DomainScope) -> Domain:
        return self.rule(scope)


@attrs(frozen=True, slots=True)
class FunctionSpec:
    """
    A registered function.

    If *homogeneous*, the arguments and the result all share one domain,
    which lets domain inference push an expected domain into the arguments.
    Otherwise *result_domain* computes the result domain from the argument domains.

    A function which is monotone only on some argument domains sets *monotone_on*;
    it is consulted whenever the argument domains are known.
    """

    name: str = attrib(validator=instance_of(str))
    implementation: Implementation = attrib(kw_only=True)
    monotone: bool = attrib(validator=instance_of(bool), kw_only=True)
    homogeneous: bool = attrib(validator=instance_of(bool), default=False, kw_only=True)
    result_domain: Optional[ResultDomainRule] = attrib(default=None, kw_only=True)
    aggregator: bool = attrib(validator=instance_of(bool), default=False, kw_only=True)
    min_arity: int = attrib(validator=instance_of(int), default=0, kw_only=True)
    max_arity: Optional[int] = attrib(
        validator=optional(instance_of(int)), default=None, kw_only=True
    )
    reads: ImmutableSet[str] = attrib(converter=immutableset, default=(), kw_only=True)
    monotone_on: Optional[Callable[[Sequence[Domain]], bool]] = attrib(
        default=None, kw_only=True
    )

    def __attrs_post_init__(self) -> None:
        if not self.homogeneous and self.result_domain is None:
            raise RuntimeError(f"Function {self.name} needs a result domain rule")

    def result_domain_without_arguments(self, scope: DomainScope) -> Optional[Domain]:
        if isinstance(self.result_domain, ScopeRule):
            return self.result_domain.rule(scope)
        return None

    def check_arity(self, count: int) -> None:
        if count < self.min_arity or (
            self.max_arity is not None and count > self.max_arity
        ):
            upper = "" if self.max_arity is None else str(self.max_arity)
            expected = (
                f"{self.min_arity}"
                if self.max_arity == self.min_arity
                else f"{self.min_arity}..{upper}"
            )
            raise UnknownFunctionError(
                f"Function {self.name} takes {expected} argument(s), got {count}"
            )

    def apply(self, values: Sequence[Value], context: CallContext) -> Value:
        return self.implementation(values, context)

    def is_monotone(self, argument_domains: Optional[Sequence[Domain]] = None) -> bool:
        if not self.monotone:
            return False
        if self.monotone_on is None or argument_domains is None:
            return True
        return self.monotone_on(argument_domains)


@attrs(slots=True)
class FunctionRegistry:
    _functions: Dict[str, FunctionSpec] = attrib(factory=dict)

    def register(self, spec: FunctionSpec, *, replace: bool = False) -> None:
        if spec.name in self._functions and not replace:
            raise DuplicateRegistrationError(
                f"Function {spec.name} is already registered"
            )
        self._functions[spec.name] = spec
        logging.debug("Registered function %s", spec.name)

    def lookup(self, name: str) -> FunctionSpec:
        if name not in self._functions:
            raise UnknownFunctionError(f"Unknown function {name}")
        return self._functions[name]

    def lookup_aggregator(self, name: str) -> FunctionSpec:
        spec = self.lookup(name)
        if not spec.aggregator:
            raise UnknownFunctionError(f"{name} cannot be used as an aggregator")
        return spec

    def is_aggregator(self, name: str) -> bool:
        return name in self._functions and self._functions[name].aggregator

    def __contains__(self, name: str) -> bool:
        return name in self._functions

    def names(self) -> ImmutableSet[str]:
        return immutableset(sorted(self._functions))


FUNCTION_REGISTRY = FunctionRegistry()


def register_function(spec: FunctionSpec, *, replace: bool = False) -> None:
    FUNCTION_REGISTRY.register(spec, replace=replace)


def lookup_function(name: str) -> FunctionSpec:
    return FUNCTION_REGISTRY.lookup(name)


# Result-domain rules


def _fixed(domain: Domain) -> ResultDomainRule:
    return ScopeRule(lambda scope: domain)


def _argument(index: int) -> ResultDomainRule:
    def rule(argument_domains: Sequence[Domain], scope: DomainScope) -> Domain:
        if len(argument_domains) <= index:
            raise DomainInferenceError(f"Missing argument {index} to infer a domain from")
        return argument_domains[index]

    return rule


def _component(index: int) -> ResultDomainRule:
    def rule(argument_domains: Sequence[Domain], scope: DomainScope) -> Domain:
        domain = argument_domains[0]
        if isinstance(domain, ProductDomain):
            return domain.components[index]
        if isinstance(domain, LexProductDomain):
            return (domain.first, domain.second)[index]
        raise DomainTypeError(f"Cannot project component {index} of {domain}")

    return rule


def node_order_domain(scope: DomainScope) -> Domain:
    if not scope.node_order:
        raise DomainInferenceError("Node-valued functions need a field node order")
    return NodeOrderDomain(scope.node_order)


# Implementations


def _numbers(values: Sequence[Value]) -> Sequence[NumValue]:
    for value in values:
        if not isinstance(value, NumValue):
            raise DomainTypeError(f"Expected a number but got {value!r}")
    return values  # type: ignore


def _booleans(values: Sequence[Value]) -> Sequence[bool]:
    ret = []
    for value in values:
        if not isinstance(value, BoolValue):
            raise DomainTypeError(f"Expected a boolean but got {value!r}")
        ret.append(value.value)
    return ret


def _numeric_min(values: Sequence[Value], context: CallContext) -> Value:
    result = NumValue.infinity()
    for value in _numbers(values):
        if value.less_equal(result):
            result = value
    return result


def _numeric_max(values: Sequence[Value], context: CallContext) -> Value:
    result = NumValue(0)
    for value in _numbers(values):
        if result.less_equal(value):
            result = value
    return result


def _numeric_sum(values: Sequence[Value], context: CallContext) -> Value:
    result = NumValue(0)
    for value in _numbers(values):
        result = result.plus(value)
    return result


def _set_parts(domain: Domain) -> FiniteSetDomain:
    inner = domain.inner if isinstance(domain, ReversedDomain) else domain
    if not isinstance(inner, FiniteSetDomain):
        raise DomainTypeError(f"Set operations need a set domain, not {domain}")
    return inner


def _union(values: Sequence[Value], context: CallContext) -> Value:
    result: Value = SetValue()
    for value in values:
        if not isinstance(value, SetValue):
            raise DomainTypeError(f"Expected a set but got {value!r}")
        result = FiniteSetDomain._union(result, value)  # type: ignore
    return result


def _intersection(values: Sequence[Value], context: CallContext) -> Value:
    universe = _set_parts(context.domain).universe
    result: Value = SetValue.everything() if universe is None else SetValue(universe)
    for value in values:
        if not isinstance(value, SetValue):
            raise DomainTypeError(f"Expected a set but got {value!r}")
        result = FiniteSetDomain._intersection(result, value)  # type: ignore
    return result


def _lexicographic(domain: Domain) -> Domain:
    if not isinstance(domain, LexProductDomain):
        raise DomainTypeError(
            f"min1/max1 need a lexicographic product domain, not {domain}"
        )
    return domain


def agreement_merge(values: Sequence[Value]) -> Value:
    """
    Fold a multiset with the agreement combinator:
    ``any`` is the unit and ``none`` absorbs.
    Equal values merge, distinct values give ``none``.
    """
    result: Value = ANY
    for value in values:
        if value == ANY:
            continue
        if value == NONE or (result != ANY and result != value):
            return NONE
        result = value
    return result


def _ite(values: Sequence[Value], context: CallContext) -> Value:
    (condition,) = _booleans(values[:1])
    return values[1] if condition else values[2]


def _project(index: int) -> Implementation:
    def implementation(values: Sequence[Value], context: CallContext) -> Value:
        value = values[0]
        if not isinstance(value, TupleValue):
            raise DomainTypeError(f"Cannot project {value!r}")
        return value[index]

    return implementation


def _size(values: Sequence[Value], context: CallContext) -> Value:
    value = values[0]
    if isinstance(value, (SetValue, AntichainValue)):
        return NumValue(len(value))
    raise DomainTypeError(f"size needs a set, not {value!r}")


def _empty(values: Sequence[Value], context: CallContext) -> Value:
    value = values[0]
    if isinstance(value, SetValue):
        return BoolValue(not value.universe and not value.elements)
    if isinstance(value, AntichainValue):
        return BoolValue(not value.elements)
    raise DomainTypeError(f"empty needs a set, not {value!r}")


def _compare(
    test: Callable[[NumValue, NumValue], bool]
) -> Implementation:
    def implementation(values: Sequence[Value], context: CallContext) -> Value:
        first, second = _numbers(values)
        return BoolValue(test(first, second))

    return implementation


_BOOL = BoolDomain()

for _spec in (
    FunctionSpec(
        "or",
        implementation=lambda values, context: BoolValue(any(_booleans(values))),
        monotone=True,
        result_domain=_fixed(_BOOL),
        aggregator=True,
    ),
    FunctionSpec(
        "and",
        implementation=lambda values, context: BoolValue(all(_booleans(values))),
        monotone=True,
        result_domain=_fixed(_BOOL),
        aggregator=True,
    ),
    FunctionSpec(
        "not",
        implementation=lambda values, context: BoolValue(not _booleans(values)[0]),
        monotone=False,
        result_domain=_fixed(_BOOL),
        min_arity=1,
        max_arity=1,
    ),
    FunctionSpec(
        "min",
        implementation=_numeric_min,
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "max",
        implementation=_numeric_max,
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "add",
        implementation=_numeric_sum,
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "join",
        implementation=lambda values, context: context.domain.join_all(values),
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "meet",
        implementation=lambda values, context: context.domain.meet_all(values),
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "plus",
        implementation=lambda values, context: context.domain.plus(values),
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "times",
        implementation=lambda values, context: context.domain.times_all(values),
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "min1",
        implementation=lambda values, context: _lexicographic(context.domain).join_all(
            values
        ),
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "max1",
        implementation=lambda values, context: _lexicographic(context.domain).meet_all(
            values
        ),
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "cup", implementation=_union, monotone=True, homogeneous=True, aggregator=True
    ),
    FunctionSpec(
        "cap",
        implementation=_intersection,
        monotone=True,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "eq",
        implementation=lambda values, context: agreement_merge(values),
        monotone=False,
        homogeneous=True,
        aggregator=True,
    ),
    FunctionSpec(
        "agrees",
        implementation=lambda values, context: BoolValue(values[0] != NONE),
        monotone=False,
        result_domain=_fixed(_BOOL),
        min_arity=1,
        max_arity=1,
    ),
    FunctionSpec(
        "same",
        implementation=lambda values, context: BoolValue(values[0] == values[1]),
        monotone=False,
        result_domain=_fixed(_BOOL),
        min_arity=2,
        max_arity=2,
    ),
    FunctionSpec(
        "empty",
        implementation=_empty,
        monotone=False,
        result_domain=_fixed(_BOOL),
        min_arity=1,
        max_arity=1,
    ),
    FunctionSpec(
        "size",
        implementation=_size,
        monotone=False,
        result_domain=_fixed(TropicalDomain()),
        min_arity=1,
        max_arity=1,
    ),
    FunctionSpec(
        "le",
        implementation=_compare(lambda a, b: a.less_equal(b)),
        monotone=False,
        result_domain=_fixed(_BOOL),
        min_arity=2,
        max_arity=2,
    ),
    FunctionSpec(
        "ge",
        implementation=_compare(lambda a, b: b.less_equal(a)),
        monotone=False,
        result_domain=_fixed(_BOOL),
        min_arity=2,
        max_arity=2,
    ),
    FunctionSpec(
        "ite",
        implementation=_ite,
        monotone=False,
        result_domain=_argument(1),
        min_arity=3,
        max_arity=3,
    ),
    FunctionSpec(
        "tuple",
        implementation=lambda values, context: TupleValue(values),
        monotone=True,
        result_domain=lambda domains, scope: ProductDomain(domains),
        min_arity=1,
    ),
    FunctionSpec(
        "fst",
        implementation=_project(0),
        monotone=True,
        result_domain=_component(0),
        min_arity=1,
        max_arity=1,
    ),
    FunctionSpec(
        "snd",
        implementation=_project(1),
        monotone=True,
        # lexicographic pairs order the second component only on ties
        monotone_on=lambda domains: not isinstance(domains[0], LexProductDomain),
        result_domain=_component(1),
        min_arity=1,
        max_arity=1,
    ),
    FunctionSpec(
        "self",
        implementation=lambda values, context: NodeValue(context.node),
        monotone=True,
        result_domain=ScopeRule(node_order_domain),
        max_arity=0,
    ),
):
    register_function(_spec)


