"""
Edge capabilities: the value transformers that edge labels are interpreted as.

A capability is applied to the value found at the far end of an edge
before it is aggregated by a modal formula.
Besides the value, it receives an `EdgeContext` naming the edge
and giving read access to the current node labels,
which the gradient-following capabilities of the rescue program need.
"""
import logging
from abc import abstractmethod
from random import Random
from typing import Any, Callable, Dict, Iterable, Optional, Sequence, Tuple

from attr import attrib, attrs
from attr.validators import instance_of

from immutablecollections import ImmutableSet, immutableset

from smuc.domains import Domain
from smuc.errors import DuplicateRegistrationError, UnknownCapabilityError
from smuc.values import (
    AntichainValue,
    NodeValue,
    NumValue,
    PathValue,
    SetValue,
    TupleValue,
    Value,
    value_from_json,
    value_to_json,
)

from typing_extensions import Protocol

LabelReader = Callable[[str, str], Value]


def _no_labels(label: str, node: str) -> Value:
    raise UnknownCapabilityError(
        f"This capability was applied without access to node labels (asked for {label}@{node})"
    )


@attrs(frozen=True, slots=True)
class EdgeContext:
    """
    The edge a capability is applied on, its value domain,
    and a reader for the current node labels.
    """

    source: str = attrib(validator=instance_of(str))
    target: str = attrib(validator=instance_of(str))
    domain: Domain = attrib(kw_only=True)
    reader: LabelReader = attrib(default=_no_labels, kw_only=True)

    def read(self, label: str, node: str) -> Value:
        return self.reader(label, node)


class Capability(Protocol):
    name: str

    @abstractmethod
    def apply(self, value: Value, context: EdgeContext) -> Value:
        """
        Transform *value*, read at the far end of the edge of *context*.
        """

    def reads(self) -> ImmutableSet[str]:
        """
        Node labels this capability consults at the endpoints of its edge.
        """
        return immutableset()

    @abstractmethod
    def to_ref(self) -> "CapabilityRef":
        pass


@attrs(frozen=True, slots=True)
class CapabilityRef:
    """
    A capability as written in a field document: a registered name plus arguments.
    """

    name: str = attrib(validator=instance_of(str))
    args: Tuple[Any, ...] = attrib(converter=tuple, default=())

    def to_json(self) -> Any:
        ret = {"cap": self.name}
        if self.args:
            ret["args"] = list(self.args)
        return ret

    @staticmethod
    def from_json(doc: Any) -> "CapabilityRef":
        if isinstance(doc, str):
            return CapabilityRef(doc)
        if not isinstance(doc, dict) or "cap" not in doc:
            raise UnknownCapabilityError(f"Not a capability reference: {doc!r}")
        return CapabilityRef(doc["cap"], doc.get("args", ()))

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({', '.join(str(arg) for arg in self.args)})"


def _map_set(value: Value, transform: Callable[[Value], Optional[Value]]) -> Value:
    """
    Apply *transform* to every element of a set or antichain, dropping `None` results.

    The symbolic universe set is returned unchanged.
    """
    if isinstance(value, SetValue):
        if value.universe:
            return value
        return SetValue(
            transformed
            for transformed in (transform(element) for element in value.elements)
            if transformed is not None
        )
    if isinstance(value, AntichainValue):
        return AntichainValue(
            transformed
            for transformed in (transform(element) for element in value.elements)
            if transformed is not None
        )
    transformed = transform(value)
    if transformed is None:
        raise UnknownCapabilityError(f"Cannot drop a non-collection value {value!r}")
    return transformed


def _add_to_numbers(value: Value, amount: NumValue) -> Value:
    if isinstance(value, NumValue):
        return value.plus(amount)
    if isinstance(value, TupleValue):
        return TupleValue(_add_to_numbers(element, amount) for element in value.elements)
    return value


def _prefix_paths(value: Value, node: str) -> Value:
    if isinstance(value, PathValue):
        return value.prepend(node)
    if isinstance(value, TupleValue):
        return TupleValue(_prefix_paths(element, node) for element in value.elements)
    return value


def _next_hop(value: Value) -> Optional[str]:
    if (
        isinstance(value, TupleValue)
        and len(value) == 2
        and isinstance(value[1], NodeValue)
    ):
        return value[1].node
    return None


@attrs(frozen=True, slots=True)
class IdentityCapability(Capability):
    name = "id"

    def apply(self, value: Value, context: EdgeContext) -> Value:
        return value

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("id")


@attrs(frozen=True, slots=True)
class AddCapability(Capability):
    """
    Adds a constant to a cost.
    """

    amount: NumValue = attrib(validator=instance_of(NumValue))
    name = "add"

    def apply(self, value: Value, context: EdgeContext) -> Value:
        return _add_to_numbers(value, self.amount)

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("add", [self.amount.text()])


@attrs(frozen=True, slots=True)
class ShiftPairsCapability(Capability):
    """
    Adds a constant to the numeric components of every element of a set of tuples.
    """

    amount: NumValue = attrib(validator=instance_of(NumValue))
    name = "shift_pairs"

    def apply(self, value: Value, context: EdgeContext) -> Value:
        return _map_set(value, lambda element: _add_to_numbers(element, self.amount))

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("shift_pairs", [self.amount.text()])


@attrs(frozen=True, slots=True)
class PrefixSourceCapability(Capability):
    """
    Prepends the source of the edge to the path components of a value
    (or of each element of a set of values) and adds *amount* to its numeric components.
    """

    amount: NumValue = attrib(validator=instance_of(NumValue), default=NumValue(0))
    name = "prefix_src"

    def apply(self, value: Value, context: EdgeContext) -> Value:
        return _map_set(
            value,
            lambda element: _add_to_numbers(
                _prefix_paths(element, context.source), self.amount
            ),
        )

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("prefix_src", [self.amount.text()])


@attrs(frozen=True, slots=True)
class DistanceCapability(Capability):
    """
    ``(cost, m)`` becomes ``(cost + amount, target)``: the cost of going through the edge,
    remembering the edge's target as the next hop.

    Infinite costs map to the domain's bottom.
    """

    amount: NumValue = attrib(validator=instance_of(NumValue))
    name = "dst"

    def apply(self, value: Value, context: EdgeContext) -> Value:
        cost = value[0]  # type: ignore
        if cost.infinite:
            return context.domain.bottom
        return TupleValue((cost.plus(self.amount), NodeValue(context.target)))

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("dst", [self.amount.text()])


@attrs(frozen=True, slots=True)
class GradientCapability(Capability):
    """
    Lets ``(cost, path)`` entries flow along the edge only if the edge is the next hop
    of the source towards its closest target, as recorded in *label*;
    the source is prepended to the paths that pass.
    """

    label: str = attrib(validator=instance_of(str), default="D")
    name = "grd"

    def reads(self) -> ImmutableSet[str]:
        return immutableset([self.label])

    def apply(self, value: Value, context: EdgeContext) -> Value:
        if _next_hop(context.read(self.label, context.source)) != context.target:
            return SetValue()
        return _map_set(value, lambda element: _prefix_paths(element, context.source))

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("grd", [self.label])


@attrs(frozen=True, slots=True)
class CogradientCapability(Capability):
    """
    Keeps the paths that start with the source of the edge, without their first node.

    If *label* is given, the edge must also be the next hop recorded there for the source.
    """

    label: Optional[str] = attrib(default=None)
    name = "cgr"

    def reads(self) -> ImmutableSet[str]:
        return immutableset([self.label]) if self.label else immutableset()

    def apply(self, value: Value, context: EdgeContext) -> Value:
        if (
            self.label
            and _next_hop(context.read(self.label, context.source)) != context.target
        ):
            return SetValue()

        def strip(path: Value) -> Optional[Value]:
            if (
                isinstance(path, PathValue)
                and not path.top
                and path.nodes
                and path.nodes[0] == context.source
            ):
                return PathValue(path.nodes[1:])
            return None

        return _map_set(value, strip)

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("cgr", [self.label] if self.label else [])


@attrs(frozen=True, slots=True)
class ConstantCapability(Capability):
    value: Value = attrib()
    name = "const"

    def apply(self, value: Value, context: EdgeContext) -> Value:
        return self.value

    def to_ref(self) -> CapabilityRef:
        return CapabilityRef("const", [value_to_json(self.value)])


CapabilityBuilder = Callable[[Sequence[Any]], Capability]


def _number_argument(
    args: Sequence[Any], *, default: Optional[NumValue] = None
) -> NumValue:
    if not args:
        if default is None:
            raise UnknownCapabilityError("Missing numeric capability argument")
        return default
    if isinstance(args[0], dict):
        parsed = value_from_json(args[0])
        if not isinstance(parsed, NumValue):
            raise UnknownCapabilityError(f"Expected a number, got {parsed!r}")
        return parsed
    return NumValue.parse(str(args[0]))


@attrs(slots=True)
class CapabilityRegistry:
    """
    Maps capability names to builders taking the argument list of a `CapabilityRef`.
    """

    _builders: Dict[str, CapabilityBuilder] = attrib(factory=dict)

    def register(self, name: str, builder: CapabilityBuilder) -> None:
        if name in self._builders:
            raise DuplicateRegistrationError(f"Capability {name} is already registered")
        self._builders[name] = builder
        logging.debug("Registered capability %s", name)

    def build(self, ref: CapabilityRef) -> Capability:
        if ref.name not in self._builders:
            raise UnknownCapabilityError(
                f"Unknown capability {ref.name}; known capabilities are {sorted(self._builders)}"
            )
        return self._builders[ref.name](ref.args)

    def names(self) -> ImmutableSet[str]:
        return immutableset(sorted(self._builders))

    def __contains__(self, name: str) -> bool:
        return name in self._builders


CAPABILITY_REGISTRY = CapabilityRegistry()


def register_capability(name: str, builder: CapabilityBuilder) -> None:
    CAPABILITY_REGISTRY.register(name, builder)


def build_capability(ref: CapabilityRef) -> Capability:
    return CAPABILITY_REGISTRY.build(ref)


register_capability("id", lambda args: IdentityCapability())
register_capability("add", lambda args: AddCapability(_number_argument(args)))
register_capability(
    "shift_pairs", lambda args: ShiftPairsCapability(_number_argument(args))
)
register_capability(
    "prefix_src",
    lambda args: PrefixSourceCapability(_number_argument(args, default=NumValue(0))),
)
register_capability("dst", lambda args: DistanceCapability(_number_argument(args)))
register_capability(
    "dst_gradient", lambda args: GradientCapability(str(args[0]) if args else "D")
)
register_capability("grd", lambda args: GradientCapability(str(args[0]) if args else "D"))
register_capability(
    "cogradient", lambda args: CogradientCapability(str(args[0]) if args else None)
)
register_capability(
    "cgr", lambda args: CogradientCapability(str(args[0]) if args else None)
)
register_capability("const", lambda args: ConstantCapability(value_from_json(args[0])))


def sample_monotone(
    capability: Capability,
    domain: Domain,
    rng: Random,
    *,
    contexts: Iterable[EdgeContext],
    samples: int = 100,
) -> Optional[Tuple[Value, Value]]:
    """
    Look for ``a ⊑ b`` with ``cap(a) ⋢ cap(b)`` on each of *contexts*.

    Returns the first such pair found, or `None`.
    """
    for context in contexts:
        for _ in range(samples):
            a = domain.sample(rng)
            b = domain.join(a, domain.sample(rng))
            image_a = domain.canonical(capability.apply(a, context))
            image_b = domain.canonical(capability.apply(b, context))
            if not domain.leq(image_a, image_b):
                logging.warning(
                    "Capability %s is not monotone on %s->%s: %s below %s",
                    capability.to_ref(),
                    context.source,
                    context.target,
                    a,
                    b,
                )
                return (a, b)
    return None
