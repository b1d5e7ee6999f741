"""
Values stored in node labels.

Every value is an immutable *attrs* object with structural equality.
Sets and antichains keep their elements in a canonical order,
so two values denoting the same element of a domain are always equal.
This matters because fixpoint iteration stops on exact equality.
"""
from fractions import Fraction
from typing import Any, Iterable, Tuple, Union

from attr import attrib, attrs
from attr.validators import instance_of

from immutablecollections import immutableset


def _to_fraction(value: Any) -> Fraction:
    if isinstance(value, float):
        # numbers in field state must be exact
        raise ValueError(f"Refusing inexact float {value}; use a string or Fraction")
    return Fraction(value)


@attrs(frozen=True, slots=True, repr=False)
class BoolValue:
    value: bool = attrib(validator=instance_of(bool))

    def __repr__(self) -> str:
        return "true" if self.value else "false"


@attrs(frozen=True, slots=True, repr=False)
class NumValue:
    """
    An exact extended rational: either a `Fraction` or positive infinity.
    """

    quantity: Fraction = attrib(converter=_to_fraction, default=Fraction(0))
    infinite: bool = attrib(validator=instance_of(bool), default=False, kw_only=True)

    def __attrs_post_init__(self) -> None:
        if self.infinite and self.quantity != 0:
            # keep a single representation of +inf
            object.__setattr__(self, "quantity", Fraction(0))

    @staticmethod
    def infinity() -> "NumValue":
        return NumValue(0, infinite=True)

    @staticmethod
    def parse(text: Union[str, int, Fraction]) -> "NumValue":
        if isinstance(text, (int, Fraction)):
            return NumValue(text)
        stripped = text.strip()
        if stripped in ("inf", "+inf", "infinity", "∞"):
            return NumValue.infinity()
        try:
            return NumValue(Fraction(stripped))
        except ValueError:
            raise ValueError(f"Not an exact number: {text!r}")

    def plus(self, other: "NumValue") -> "NumValue":
        if self.infinite or other.infinite:
            return NumValue.infinity()
        return NumValue(self.quantity + other.quantity)

    def times(self, other: "NumValue") -> "NumValue":
        if self.infinite or other.infinite:
            if self.quantity == 0 and not self.infinite:
                return NumValue(0)
            if other.quantity == 0 and not other.infinite:
                return NumValue(0)
            return NumValue.infinity()
        return NumValue(self.quantity * other.quantity)

    def less_equal(self, other: "NumValue") -> bool:
        if other.infinite:
            return True
        if self.infinite:
            return False
        return self.quantity <= other.quantity

    def text(self) -> str:
        if self.infinite:
            return "inf"
        if self.quantity.denominator == 1:
            return str(self.quantity.numerator)
        return f"{self.quantity.numerator}/{self.quantity.denominator}"

    def __repr__(self) -> str:
        return self.text()


@attrs(frozen=True, slots=True, repr=False)
class NodeValue:
    node: str = attrib(validator=instance_of(str))

    def __repr__(self) -> str:
        return self.node


@attrs(frozen=True, slots=True, repr=False)
class SymbolValue:
    """
    A distinguished symbol which is not a carrier element of any ordinary domain.

    Used for the extremes of flat domains (``bot``, ``top``)
    and for the units of the agreement combinator (``any``, ``none``).
    """

    name: str = attrib(validator=instance_of(str))

    def __repr__(self) -> str:
        return self.name


BOTTOM_SYMBOL = SymbolValue("bot")
TOP_SYMBOL = SymbolValue("top")
ANY = SymbolValue("any")
NONE = SymbolValue("none")


@attrs(frozen=True, slots=True, repr=False)
class PathValue:
    """
    A finite word over node identifiers, or the top word which dominates all others.
    """

    nodes: Tuple[str, ...] = attrib(converter=tuple, default=())
    top: bool = attrib(validator=instance_of(bool), default=False, kw_only=True)

    def __attrs_post_init__(self) -> None:
        if self.top and self.nodes:
            object.__setattr__(self, "nodes", ())

    @staticmethod
    def top_path() -> "PathValue":
        return PathValue((), top=True)

    def prepend(self, node: str) -> "PathValue":
        if self.top:
            return self
        return PathValue((node,) + self.nodes)

    def __repr__(self) -> str:
        if self.top:
            return "•"
        if not self.nodes:
            return "ε"
        return "·".join(self.nodes)


@attrs(frozen=True, slots=True, repr=False)
class TupleValue:
    elements: Tuple["Value", ...] = attrib(converter=tuple)

    def __getitem__(self, index: int) -> "Value":
        return self.elements[index]

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        return "(" + ", ".join(repr(element) for element in self.elements) + ")"


def _canonical_elements(elements: Iterable["Value"]) -> Tuple["Value", ...]:
    return tuple(sorted(immutableset(elements), key=sort_key))


@attrs(frozen=True, slots=True, repr=False)
class SetValue:
    """
    A finite set of values.

    When *universe* is set the value denotes the whole (possibly unbounded) carrier;
    it is the top of power-set domains whose universe is not enumerated.
    """

    elements: Tuple["Value", ...] = attrib(converter=_canonical_elements, default=())
    universe: bool = attrib(validator=instance_of(bool), default=False, kw_only=True)

    def __attrs_post_init__(self) -> None:
        if self.universe and self.elements:
            object.__setattr__(self, "elements", ())

    @staticmethod
    def everything() -> "SetValue":
        return SetValue((), universe=True)

    def __iter__(self):
        if self.universe:
            raise ValueError("Cannot enumerate the unbounded universe set")
        return iter(self.elements)

    def __len__(self) -> int:
        if self.universe:
            raise ValueError("The unbounded universe set has no finite size")
        return len(self.elements)

    def __contains__(self, item: "Value") -> bool:
        return self.universe or item in self.elements

    def __repr__(self) -> str:
        if self.universe:
            return "ALL"
        return "{" + ", ".join(repr(element) for element in self.elements) + "}"


@attrs(frozen=True, slots=True, repr=False)
class AntichainValue:
    """
    Maximal elements of a down-closed set, representing Hoare power domain values.

    Pruning is the domain's job (see `HoareDomain.make`),
    this class only canonicalizes element order.
    """

    elements: Tuple["Value", ...] = attrib(converter=_canonical_elements, default=())

    def __iter__(self):
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        return "{" + ", ".join(repr(element) for element in self.elements) + "}"


Value = Union[
    BoolValue,
    NumValue,
    NodeValue,
    SymbolValue,
    PathValue,
    TupleValue,
    SetValue,
    AntichainValue,
]

VALUE_TYPES = (
    BoolValue,
    NumValue,
    NodeValue,
    SymbolValue,
    PathValue,
    TupleValue,
    SetValue,
    AntichainValue,
)

TRUE = BoolValue(True)
FALSE = BoolValue(False)


def sort_key(value: Value) -> Tuple[Any, ...]:
    """
    A total order over all values, used only to canonicalize collections.

    It has nothing to do with the order of any domain.
    """
    if isinstance(value, BoolValue):
        return (0, value.value)
    if isinstance(value, NumValue):
        return (1, value.infinite, value.quantity)
    if isinstance(value, NodeValue):
        return (2, value.node)
    if isinstance(value, SymbolValue):
        return (3, value.name)
    if isinstance(value, PathValue):
        return (4, value.top, value.nodes)
    if isinstance(value, TupleValue):
        return (5, tuple(sort_key(element) for element in value.elements))
    if isinstance(value, SetValue):
        return (6, value.universe, tuple(sort_key(element) for element in value.elements))
    if isinstance(value, AntichainValue):
        return (7, tuple(sort_key(element) for element in value.elements))
    raise TypeError(f"Not a field value: {value!r}")


def is_value(candidate: Any) -> bool:
    return isinstance(candidate, VALUE_TYPES)


def pair(first: Value, second: Value) -> TupleValue:
    return TupleValue((first, second))


def value_to_json(value: Value) -> Any:
    """
    Encode *value* as a tagged JSON object such as ``{"path": ["2", "1"]}``.
    """
    if isinstance(value, BoolValue):
        return {"bool": value.value}
    if isinstance(value, NumValue):
        return {"num": value.text()}
    if isinstance(value, NodeValue):
        return {"node": value.node}
    if isinstance(value, SymbolValue):
        return {"sym": value.name}
    if isinstance(value, PathValue):
        return {"path": "top" if value.top else list(value.nodes)}
    if isinstance(value, TupleValue):
        return {"tuple": [value_to_json(element) for element in value.elements]}
    if isinstance(value, SetValue):
        if value.universe:
            return {"set": "all"}
        return {"set": [value_to_json(element) for element in value.elements]}
    if isinstance(value, AntichainValue):
        return {"antichain": [value_to_json(element) for element in value.elements]}
    raise TypeError(f"Not a field value: {value!r}")


def value_from_json(doc: Any) -> Value:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ValueError(f"A value must be a single-key tagged object, got {doc!r}")
    ((tag, payload),) = doc.items()
    if tag == "bool":
        if not isinstance(payload, bool):
            raise ValueError(f"Expected a JSON boolean for a bool value, got {payload!r}")
        return BoolValue(payload)
    if tag == "num":
        if isinstance(payload, float):
            raise ValueError(
                f"Numbers must be written as strings or integers, got {payload!r}"
            )
        return NumValue.parse(str(payload))
    if tag == "node":
        return NodeValue(str(payload))
    if tag == "sym":
        return SymbolValue(str(payload))
    if tag == "path":
        if payload == "top":
            return PathValue.top_path()
        return PathValue(tuple(str(node) for node in payload))
    if tag == "tuple":
        return TupleValue(tuple(value_from_json(element) for element in payload))
    if tag == "set":
        if payload == "all":
            return SetValue.everything()
        return SetValue(value_from_json(element) for element in payload)
    if tag == "antichain":
        return AntichainValue(value_from_json(element) for element in payload)
    raise ValueError(f"Unknown value tag {tag!r}")
