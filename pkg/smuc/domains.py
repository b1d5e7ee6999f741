r"""
Field domains: partial orders with a bottom and a top, optionally with semiring structure.

Built-in kinds
==============
- *bool*: ``false`` below ``true``; its reversal puts ``true`` at the bottom.
- *tropical*: naturals (or non-negative rationals) with :math:`+\infty`.
  The reversed tropical domain is the cost semiring: ``min`` is the join
  and arithmetic addition is the semiring product.
- *interval*: the exact rationals in :math:`[0, 1]`
  (fuzzy or probabilistic semirings, depending on the product).
- *finite-set*: subsets of a universe ordered by inclusion.
  Without an enumerated universe the top is a symbolic "everything" set.
- *path*: words over nodes in lexicographic order, with the empty word at the bottom
  and a top word dominating every finite word.
- *node-order*: nodes under a declared total order where the *first* node is the top
  and the last node is the bottom, so that joins pick the least node.
- *flat*: the nodes, pairwise incomparable, between a bottom and a top symbol.
- *product*, *lexproduct*, *hoare* and *reverse* constructors.

Every domain is an immutable *attrs* object and therefore hashable and comparable.
"""
import re
from abc import abstractmethod
from itertools import product as cartesian_product
from random import Random
from typing import Any, Callable, Iterable, List, Mapping, Optional, Sequence, Tuple

from attr import attrib, attrs
from attr.validators import in_, instance_of

from immutablecollections import immutableset

from smuc.errors import DomainTypeError, NotASemiringError
from smuc.values import (
    BOTTOM_SYMBOL,
    FALSE,
    TOP_SYMBOL,
    TRUE,
    AntichainValue,
    BoolValue,
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


class Domain(Protocol):
    """
    A field domain :math:`\langle A, \sqsubseteq, \bot, \top \rangle`.

    Implementations provide the order, binary joins and meets, and,
    when *is_semiring* holds, the semiring operations.
    """

    kind: str = "abstract"

    @property
    @abstractmethod
    def bottom(self) -> Value:
        """The least element."""

    @property
    @abstractmethod
    def top(self) -> Value:
        """The greatest element."""

    @abstractmethod
    def contains(self, value: Value) -> bool:
        """Whether *value* belongs to the carrier."""

    @abstractmethod
    def leq(self, a: Value, b: Value) -> bool:
        pass

    @abstractmethod
    def join(self, a: Value, b: Value) -> Value:
        pass

    @abstractmethod
    def meet(self, a: Value, b: Value) -> Value:
        pass

    @abstractmethod
    def sample(self, rng: Random) -> Value:
        """A random carrier element, used by property checks and monotonicity sampling."""

    @abstractmethod
    def to_json(self) -> Any:
        pass

    @abstractmethod
    def to_text(self) -> str:
        pass

    # A domain whose semiring sum is its join and whose product is its meet.
    lattice_semiring: bool = False
    # False for dense carriers, whose fixpoints can only be approximated.
    finite_chains: bool = True

    @property
    def is_semiring(self) -> bool:
        return self.lattice_semiring

    def plus(self, values: Iterable[Value]) -> Value:
        if not self.is_semiring:
            raise NotASemiringError(f"Domain {self.to_text()} has no semiring structure")
        return self.join_all(values)

    def times(self, a: Value, b: Value) -> Value:
        if not self.is_semiring:
            raise NotASemiringError(f"Domain {self.to_text()} has no semiring structure")
        return self.meet(a, b)

    def times_all(self, values: Iterable[Value]) -> Value:
        result = self.top
        for value in values:
            result = self.times(result, value)
        return result

    def join_all(self, values: Iterable[Value]) -> Value:
        result = self.bottom
        for value in values:
            result = self.join(result, value)
        return result

    def meet_all(self, values: Iterable[Value]) -> Value:
        result = self.top
        for value in values:
            result = self.meet(result, value)
        return result

    def canonical(self, value: Value) -> Value:
        """
        The canonical representative of *value*; only antichains need work here.
        """
        return value

    def check(self, value: Value) -> Value:
        if not self.contains(value):
            raise DomainTypeError(
                f"{value!r} is not an element of domain {self.to_text()}"
            )
        return value

    def reversed(self) -> "Domain":
        return ReversedDomain(self)

    def __str__(self) -> str:
        return self.to_text()


def _is_bool(value: Value) -> bool:
    return isinstance(value, BoolValue)


@attrs(frozen=True, slots=True)
class BoolDomain(Domain):
    reversed_order: bool = attrib(validator=instance_of(bool), default=False)
    kind = "bool"
    lattice_semiring = True

    @property
    def bottom(self) -> Value:
        return TRUE if self.reversed_order else FALSE

    @property
    def top(self) -> Value:
        return FALSE if self.reversed_order else TRUE

    def contains(self, value: Value) -> bool:
        return _is_bool(value)

    def leq(self, a: Value, b: Value) -> bool:
        if self.reversed_order:
            a, b = b, a
        return (not a.value) or b.value  # type: ignore

    def join(self, a: Value, b: Value) -> Value:
        if self.reversed_order:
            return BoolValue(a.value and b.value)  # type: ignore
        return BoolValue(a.value or b.value)  # type: ignore

    def meet(self, a: Value, b: Value) -> Value:
        if self.reversed_order:
            return BoolValue(a.value or b.value)  # type: ignore
        return BoolValue(a.value and b.value)  # type: ignore

    def sample(self, rng: Random) -> Value:
        return BoolValue(rng.random() < 0.5)

    def reversed(self) -> Domain:
        return BoolDomain(not self.reversed_order)

    def to_json(self) -> Any:
        return {"kind": "bool", "reversed": self.reversed_order}

    def to_text(self) -> str:
        return "bool_rev" if self.reversed_order else "bool"


def _is_cost(value: Value) -> bool:
    return isinstance(value, NumValue) and (value.infinite or value.quantity >= 0)


@attrs(frozen=True, slots=True)
class TropicalDomain(Domain):
    """
    Costs :math:`\mathbb{N} \cup \{+\infty\}`.

    With *reversed_order* the order is :math:`\geq`, so cheaper is better,
    and the domain is the semiring :math:`\langle \min, +, +\infty, 0 \rangle`.
    """

    reversed_order: bool = attrib(validator=instance_of(bool), default=False)
    kind = "tropical"

    @property
    def is_semiring(self) -> bool:
        return self.reversed_order

    @property
    def bottom(self) -> Value:
        return NumValue.infinity() if self.reversed_order else NumValue(0)

    @property
    def top(self) -> Value:
        return NumValue(0) if self.reversed_order else NumValue.infinity()

    def contains(self, value: Value) -> bool:
        return _is_cost(value)

    def leq(self, a: Value, b: Value) -> bool:
        if self.reversed_order:
            return b.less_equal(a)  # type: ignore
        return a.less_equal(b)  # type: ignore

    def join(self, a: Value, b: Value) -> Value:
        return b if self.leq(a, b) else a

    def meet(self, a: Value, b: Value) -> Value:
        return a if self.leq(a, b) else b

    def plus(self, values: Iterable[Value]) -> Value:
        if not self.reversed_order:
            raise NotASemiringError("Only the reversed tropical domain is a semiring")
        return self.join_all(values)

    def times(self, a: Value, b: Value) -> Value:
        if not self.reversed_order:
            raise NotASemiringError("Only the reversed tropical domain is a semiring")
        return a.plus(b)  # type: ignore

    def sample(self, rng: Random) -> Value:
        if rng.random() < 0.15:
            return NumValue.infinity()
        return NumValue(rng.randint(0, 8))

    def reversed(self) -> Domain:
        return TropicalDomain(not self.reversed_order)

    def to_json(self) -> Any:
        return {"kind": "tropical", "reversed": self.reversed_order}

    def to_text(self) -> str:
        return "tropical_rev" if self.reversed_order else "tropical"


_INTERVAL_PRODUCTS = ("min", "product")


@attrs(frozen=True, slots=True)
class IntervalDomain(Domain):
    """
    Exact rationals in [0, 1] ordered by :math:`\leq`.

    The semiring sum is ``max``; the product is ``min`` (fuzzy)
    or multiplication (probabilistic).
    """

    times_kind: str = attrib(validator=in_(_INTERVAL_PRODUCTS), default="min")
    kind = "interval"
    finite_chains = False

    @property
    def lattice_semiring(self) -> bool:  # type: ignore
        return self.times_kind == "min"

    @property
    def is_semiring(self) -> bool:
        return True

    @property
    def bottom(self) -> Value:
        return NumValue(0)

    @property
    def top(self) -> Value:
        return NumValue(1)

    def contains(self, value: Value) -> bool:
        return (
            isinstance(value, NumValue)
            and not value.infinite
            and 0 <= value.quantity <= 1
        )

    def leq(self, a: Value, b: Value) -> bool:
        return a.less_equal(b)  # type: ignore

    def join(self, a: Value, b: Value) -> Value:
        return b if self.leq(a, b) else a

    def meet(self, a: Value, b: Value) -> Value:
        return a if self.leq(a, b) else b

    def plus(self, values: Iterable[Value]) -> Value:
        return self.join_all(values)

    def times(self, a: Value, b: Value) -> Value:
        if self.times_kind == "min":
            return self.meet(a, b)
        return a.times(b)  # type: ignore

    def sample(self, rng: Random) -> Value:
        denominator = rng.choice((1, 2, 4, 5, 10))
        return NumValue(f"{rng.randint(0, denominator)}/{denominator}")

    def to_json(self) -> Any:
        return {"kind": "interval", "times": self.times_kind}

    def to_text(self) -> str:
        return "fuzzy" if self.times_kind == "min" else "probabilistic"


def _optional_value_tuple(
    values: Optional[Iterable[Value]]
) -> Optional[Tuple[Value, ...]]:
    if values is None:
        return None
    return SetValue(values).elements


@attrs(frozen=True, slots=True)
class FiniteSetDomain(Domain):
    """
    Subsets of *universe* ordered by inclusion (or by containment, when reversed).

    A *universe* of `None` leaves the carrier unbounded;
    its top is then the symbolic `SetValue.everything`.
    """

    universe: Optional[Tuple[Value, ...]] = attrib(
        converter=_optional_value_tuple, default=None
    )
    reversed_order: bool = attrib(
        validator=instance_of(bool), default=False, kw_only=True
    )
    kind = "finite-set"
    lattice_semiring = True

    @property
    def _full(self) -> SetValue:
        if self.universe is None:
            return SetValue.everything()
        return SetValue(self.universe)

    @property
    def bottom(self) -> Value:
        return self._full if self.reversed_order else SetValue()

    @property
    def top(self) -> Value:
        return SetValue() if self.reversed_order else self._full

    def contains(self, value: Value) -> bool:
        if not isinstance(value, SetValue):
            return False
        if self.universe is None:
            return True
        if value.universe:
            return False
        allowed = immutableset(self.universe)
        return all(element in allowed for element in value.elements)

    @staticmethod
    def _subset(a: SetValue, b: SetValue) -> bool:
        if b.universe:
            return True
        if a.universe:
            return False
        return immutableset(a.elements).issubset(b.elements)

    @staticmethod
    def _union(a: SetValue, b: SetValue) -> SetValue:
        if a.universe or b.universe:
            return SetValue.everything()
        return SetValue(a.elements + b.elements)

    @staticmethod
    def _intersection(a: SetValue, b: SetValue) -> SetValue:
        if a.universe:
            return b
        if b.universe:
            return a
        kept = immutableset(b.elements)
        return SetValue(element for element in a.elements if element in kept)

    def _normalize(self, value: SetValue) -> SetValue:
        # the enumerated universe and the symbolic one denote the same set
        if value.universe and self.universe is not None:
            return SetValue(self.universe)
        return value

    def leq(self, a: Value, b: Value) -> bool:
        if self.reversed_order:
            a, b = b, a
        return self._subset(a, b)  # type: ignore

    def join(self, a: Value, b: Value) -> Value:
        if self.reversed_order:
            return self._normalize(self._intersection(a, b))  # type: ignore
        return self._normalize(self._union(a, b))  # type: ignore

    def meet(self, a: Value, b: Value) -> Value:
        if self.reversed_order:
            return self._normalize(self._union(a, b))  # type: ignore
        return self._normalize(self._intersection(a, b))  # type: ignore

    def sample(self, rng: Random) -> Value:
        if self.universe is None:
            return SetValue.everything() if rng.random() < 0.5 else SetValue()
        return SetValue(element for element in self.universe if rng.random() < 0.5)

    def reversed(self) -> Domain:
        return FiniteSetDomain(self.universe, reversed_order=not self.reversed_order)

    def to_json(self) -> Any:
        ret = {"kind": "finite-set", "reversed": self.reversed_order}
        if self.universe is not None:
            ret["universe"] = [value_to_json(element) for element in self.universe]
        return ret

    def to_text(self) -> str:
        suffix = "_rev" if self.reversed_order else ""
        if self.universe is None:
            return f"powerset{suffix}"
        if not all(isinstance(element, NodeValue) for element in self.universe):
            raise DomainTypeError(
                "Only node-id universes have a text form; use the JSON domain encoding"
            )
        items = ", ".join(element.node for element in self.universe)  # type: ignore
        return f"set{suffix}[{items}]"


def _node_tuple(nodes: Iterable[str]) -> Tuple[str, ...]:
    return tuple(str(node) for node in nodes)


def _index_of(order: Sequence[str]) -> Mapping[str, int]:
    return {node: index for (index, node) in enumerate(order)}


@attrs(frozen=True, slots=True)
class PathDomain(Domain):
    """
    Words over the nodes of *node_order*, compared lexicographically
    (a proper prefix is smaller), with the top word above every finite word.
    """

    node_order: Tuple[str, ...] = attrib(converter=_node_tuple)
    _positions: Mapping[str, int] = attrib(init=False, repr=False, eq=False, hash=False)
    kind = "path"
    lattice_semiring = True

    def __attrs_post_init__(self) -> None:
        object.__setattr__(self, "_positions", _index_of(self.node_order))

    @property
    def bottom(self) -> Value:
        return PathValue(())

    @property
    def top(self) -> Value:
        return PathValue.top_path()

    def contains(self, value: Value) -> bool:
        return isinstance(value, PathValue) and all(
            node in self._positions for node in value.nodes
        )

    def key(self, path: PathValue) -> Tuple[int, ...]:
        return tuple(self._positions[node] for node in path.nodes)

    def leq(self, a: Value, b: Value) -> bool:
        if b.top:  # type: ignore
            return True
        if a.top:  # type: ignore
            return False
        return self.key(a) <= self.key(b)  # type: ignore

    def join(self, a: Value, b: Value) -> Value:
        return b if self.leq(a, b) else a

    def meet(self, a: Value, b: Value) -> Value:
        return a if self.leq(a, b) else b

    def sample(self, rng: Random) -> Value:
        if rng.random() < 0.1 or not self.node_order:
            return PathValue.top_path() if self.node_order else PathValue(())
        return PathValue(rng.choice(self.node_order) for _ in range(rng.randint(0, 3)))

    def to_json(self) -> Any:
        return {"kind": "path", "node_order": list(self.node_order)}

    def to_text(self) -> str:
        return f"path[{', '.join(self.node_order)}]"


@attrs(frozen=True, slots=True)
class NodeOrderDomain(Domain):
    """
    The nodes under a declared total order.

    The first node of *order* is the top and the last one is the bottom,
    so the join of two nodes is the one declared first.
    """

    order: Tuple[str, ...] = attrib(converter=_node_tuple)
    _positions: Mapping[str, int] = attrib(init=False, repr=False, eq=False, hash=False)
    kind = "node-order"
    lattice_semiring = True

    def __attrs_post_init__(self) -> None:
        if not self.order:
            raise DomainTypeError("A node-order domain needs at least one node")
        object.__setattr__(self, "_positions", _index_of(self.order))

    @property
    def bottom(self) -> Value:
        return NodeValue(self.order[-1])

    @property
    def top(self) -> Value:
        return NodeValue(self.order[0])

    def contains(self, value: Value) -> bool:
        return isinstance(value, NodeValue) and value.node in self._positions

    def position(self, value: Value) -> int:
        return self._positions[value.node]  # type: ignore

    def leq(self, a: Value, b: Value) -> bool:
        return self.position(a) >= self.position(b)

    def join(self, a: Value, b: Value) -> Value:
        return b if self.leq(a, b) else a

    def meet(self, a: Value, b: Value) -> Value:
        return a if self.leq(a, b) else b

    def sample(self, rng: Random) -> Value:
        return NodeValue(rng.choice(self.order))

    def to_json(self) -> Any:
        return {"kind": "node-order", "order": list(self.order)}

    def to_text(self) -> str:
        return f"nodes[{', '.join(self.order)}]"


@attrs(frozen=True, slots=True)
class FlatDomain(Domain):
    """
    Pairwise incomparable nodes between the ``bot`` and ``top`` symbols.
    """

    nodes: Tuple[str, ...] = attrib(converter=_node_tuple)
    kind = "flat"

    @property
    def bottom(self) -> Value:
        return BOTTOM_SYMBOL

    @property
    def top(self) -> Value:
        return TOP_SYMBOL

    def contains(self, value: Value) -> bool:
        if value in (BOTTOM_SYMBOL, TOP_SYMBOL):
            return True
        return isinstance(value, NodeValue) and value.node in self.nodes

    def leq(self, a: Value, b: Value) -> bool:
        return a == b or a == BOTTOM_SYMBOL or b == TOP_SYMBOL

    def join(self, a: Value, b: Value) -> Value:
        if self.leq(a, b):
            return b
        if self.leq(b, a):
            return a
        return TOP_SYMBOL

    def meet(self, a: Value, b: Value) -> Value:
        if self.leq(a, b):
            return a
        if self.leq(b, a):
            return b
        return BOTTOM_SYMBOL

    def sample(self, rng: Random) -> Value:
        roll = rng.random()
        if roll < 0.1 or not self.nodes:
            return BOTTOM_SYMBOL
        if roll < 0.2:
            return TOP_SYMBOL
        return NodeValue(rng.choice(self.nodes))

    def to_json(self) -> Any:
        return {"kind": "flat", "nodes": list(self.nodes)}

    def to_text(self) -> str:
        return f"flat[{', '.join(self.nodes)}]"


def _domain_tuple(domains: Iterable[Domain]) -> Tuple[Domain, ...]:
    return tuple(domains)


@attrs(frozen=True, slots=True)
class ProductDomain(Domain):
    """
    The Cartesian product, ordered componentwise.
    """

    components: Tuple[Domain, ...] = attrib(converter=_domain_tuple)
    kind = "product"

    def __attrs_post_init__(self) -> None:
        if not self.components:
            raise DomainTypeError("A product domain needs at least one component")

    @property
    def lattice_semiring(self) -> bool:  # type: ignore
        return all(component.lattice_semiring for component in self.components)

    @property
    def is_semiring(self) -> bool:
        return all(component.is_semiring for component in self.components)

    @property
    def finite_chains(self) -> bool:  # type: ignore
        return all(component.finite_chains for component in self.components)

    @property
    def bottom(self) -> Value:
        return TupleValue(component.bottom for component in self.components)

    @property
    def top(self) -> Value:
        return TupleValue(component.top for component in self.components)

    def contains(self, value: Value) -> bool:
        return (
            isinstance(value, TupleValue)
            and len(value) == len(self.components)
            and all(
                component.contains(element)
                for (component, element) in zip(self.components, value.elements)
            )
        )

    def _pointwise(
        self, operation: Callable[[Domain, Value, Value], Value], a: Value, b: Value
    ) -> TupleValue:
        return TupleValue(
            operation(component, x, y)
            for (component, x, y) in zip(
                self.components, a.elements, b.elements  # type: ignore
            )
        )

    def leq(self, a: Value, b: Value) -> bool:
        return all(
            component.leq(x, y)
            for (component, x, y) in zip(
                self.components, a.elements, b.elements  # type: ignore
            )
        )

    def join(self, a: Value, b: Value) -> Value:
        return self._pointwise(lambda d, x, y: d.join(x, y), a, b)

    def meet(self, a: Value, b: Value) -> Value:
        return self._pointwise(lambda d, x, y: d.meet(x, y), a, b)

    def plus(self, values: Iterable[Value]) -> Value:
        if not self.is_semiring:
            raise NotASemiringError(f"Domain {self.to_text()} has no semiring structure")
        values = list(values)
        return TupleValue(
            component.plus(value.elements[index] for value in values)  # type: ignore
            for (index, component) in enumerate(self.components)
        )

    def times(self, a: Value, b: Value) -> Value:
        if not self.is_semiring:
            raise NotASemiringError(f"Domain {self.to_text()} has no semiring structure")
        return self._pointwise(lambda d, x, y: d.times(x, y), a, b)

    def canonical(self, value: Value) -> Value:
        return TupleValue(
            component.canonical(element)
            for (component, element) in zip(
                self.components, value.elements  # type: ignore
            )
        )

    def sample(self, rng: Random) -> Value:
        return TupleValue(component.sample(rng) for component in self.components)

    def to_json(self) -> Any:
        return {
            "kind": "product",
            "of": [component.to_json() for component in self.components],
        }

    def to_text(self) -> str:
        texts = ", ".join(component.to_text() for component in self.components)
        return f"product({texts})"


@attrs(frozen=True, slots=True)
class LexProductDomain(Domain):
    """
    Pairs ordered lexicographically: the *first* component has priority
    and the *second* only breaks ties.
    """

    first: Domain = attrib()
    second: Domain = attrib()
    kind = "lexproduct"

    @property
    def finite_chains(self) -> bool:  # type: ignore
        return self.first.finite_chains and self.second.finite_chains

    @property
    def bottom(self) -> Value:
        return TupleValue((self.first.bottom, self.second.bottom))

    @property
    def top(self) -> Value:
        return TupleValue((self.first.top, self.second.top))

    def contains(self, value: Value) -> bool:
        return (
            isinstance(value, TupleValue)
            and len(value) == 2
            and self.first.contains(value[0])
            and self.second.contains(value[1])
        )

    def leq(self, a: Value, b: Value) -> bool:
        (a1, a2), (b1, b2) = a.elements, b.elements  # type: ignore
        if a1 == b1:
            return self.second.leq(a2, b2)
        return self.first.leq(a1, b1)

    def join(self, a: Value, b: Value) -> Value:
        (a1, a2), (b1, b2) = a.elements, b.elements  # type: ignore
        if a1 == b1:
            return TupleValue((a1, self.second.join(a2, b2)))
        if self.first.leq(a1, b1):
            return b
        if self.first.leq(b1, a1):
            return a
        return TupleValue((self.first.join(a1, b1), self.second.bottom))

    def meet(self, a: Value, b: Value) -> Value:
        (a1, a2), (b1, b2) = a.elements, b.elements  # type: ignore
        if a1 == b1:
            return TupleValue((a1, self.second.meet(a2, b2)))
        if self.first.leq(a1, b1):
            return a
        if self.first.leq(b1, a1):
            return b
        return TupleValue((self.first.meet(a1, b1), self.second.top))

    def sample(self, rng: Random) -> Value:
        return TupleValue((self.first.sample(rng), self.second.sample(rng)))

    def to_json(self) -> Any:
        return {"kind": "lexproduct", "of": [self.first.to_json(), self.second.to_json()]}

    def to_text(self) -> str:
        return f"lex({self.first.to_text()}, {self.second.to_text()})"


@attrs(frozen=True, slots=True)
class HoareDomain(Domain):
    """
    The Hoare power domain of *element*: down-closed sets ordered by inclusion.

    Values are antichains of maximal elements.
    The down-closure of an antichain is the set it denotes,
    so ``a`` is below ``b`` when every element of ``a`` is below some element of ``b``.
    """

    element: Domain = attrib()
    kind = "hoare"
    lattice_semiring = True

    @property
    def finite_chains(self) -> bool:  # type: ignore
        return self.element.finite_chains

    @property
    def bottom(self) -> Value:
        return AntichainValue(())

    @property
    def top(self) -> Value:
        return AntichainValue((self.element.top,))

    def make(self, elements: Iterable[Value]) -> AntichainValue:
        """
        Build the antichain of the maximal elements among *elements*.
        """
        candidates = list(immutableset(elements))
        maximal = [
            x
            for x in candidates
            if not any(y != x and self.element.leq(x, y) for y in candidates)
        ]
        return AntichainValue(maximal)

    def contains(self, value: Value) -> bool:
        if not isinstance(value, AntichainValue):
            return False
        if not all(self.element.contains(element) for element in value.elements):
            return False
        return all(
            x == y or not self.element.leq(x, y)
            for x in value.elements
            for y in value.elements
        )

    def leq(self, a: Value, b: Value) -> bool:
        return all(
            any(self.element.leq(x, y) for y in b.elements)  # type: ignore
            for x in a.elements  # type: ignore
        )

    def join(self, a: Value, b: Value) -> Value:
        return self.make(a.elements + b.elements)  # type: ignore

    def meet(self, a: Value, b: Value) -> Value:
        return self.make(
            self.element.meet(x, y)
            for x in a.elements  # type: ignore
            for y in b.elements  # type: ignore
        )

    def canonical(self, value: Value) -> Value:
        return self.make(value.elements)  # type: ignore

    def sample(self, rng: Random) -> Value:
        return self.make(self.element.sample(rng) for _ in range(rng.randint(0, 3)))

    def to_json(self) -> Any:
        return {"kind": "hoare", "of": self.element.to_json()}

    def to_text(self) -> str:
        return f"hoare({self.element.to_text()})"


@attrs(frozen=True, slots=True)
class ReversedDomain(Domain):
    """
    *inner* turned upside down.
    """

    inner: Domain = attrib()
    kind = "reverse"

    @property
    def lattice_semiring(self) -> bool:  # type: ignore
        return self.inner.lattice_semiring

    @property
    def finite_chains(self) -> bool:  # type: ignore
        return self.inner.finite_chains

    @property
    def bottom(self) -> Value:
        return self.inner.top

    @property
    def top(self) -> Value:
        return self.inner.bottom

    def contains(self, value: Value) -> bool:
        return self.inner.contains(value)

    def leq(self, a: Value, b: Value) -> bool:
        return self.inner.leq(b, a)

    def join(self, a: Value, b: Value) -> Value:
        return self.inner.meet(a, b)

    def meet(self, a: Value, b: Value) -> Value:
        return self.inner.join(a, b)

    def canonical(self, value: Value) -> Value:
        return self.inner.canonical(value)

    def sample(self, rng: Random) -> Value:
        return self.inner.sample(rng)

    def reversed(self) -> Domain:
        return self.inner

    def to_json(self) -> Any:
        return {"kind": "reverse", "of": self.inner.to_json()}

    def to_text(self) -> str:
        return f"reverse({self.inner.to_text()})"


def _checked(domain: Domain, *values: Value) -> None:
    for value in values:
        domain.check(value)


def leq(domain: Domain, a: Value, b: Value) -> bool:
    _checked(domain, a, b)
    return domain.leq(a, b)


def join(domain: Domain, a: Value, b: Value) -> Value:
    _checked(domain, a, b)
    return domain.join(a, b)


def meet(domain: Domain, a: Value, b: Value) -> Value:
    _checked(domain, a, b)
    return domain.meet(a, b)


def semiring_plus(domain: Domain, values: Iterable[Value]) -> Value:
    values = list(values)
    _checked(domain, *values)
    return domain.plus(values)


def semiring_times(domain: Domain, a: Value, b: Value) -> Value:
    _checked(domain, a, b)
    return domain.times(a, b)


def make_product(*components: Domain) -> Domain:
    return ProductDomain(components)


def make_lexproduct(first: Domain, second: Domain) -> Domain:
    return LexProductDomain(first, second)


def make_hoare(element: Domain) -> Domain:
    return HoareDomain(element)


def reverse(domain: Domain) -> Domain:
    return domain.reversed()


# Domain codecs

_SIMPLE_DOMAIN_NAMES: Mapping[str, Callable[[], Domain]] = {
    "bool": BoolDomain,
    "bool_rev": lambda: BoolDomain(True),
    "tropical": TropicalDomain,
    "tropical_rev": lambda: TropicalDomain(True),
    "fuzzy": lambda: IntervalDomain("min"),
    "probabilistic": lambda: IntervalDomain("product"),
    "powerset": FiniteSetDomain,
    "powerset_rev": lambda: FiniteSetDomain(None, reversed_order=True),
}

_NODE_LIST_DOMAIN_NAMES: Mapping[str, Callable[[Tuple[str, ...]], Domain]] = {
    "set": lambda nodes: FiniteSetDomain(NodeValue(node) for node in nodes),
    "set_rev": lambda nodes: FiniteSetDomain(
        (NodeValue(node) for node in nodes), reversed_order=True
    ),
    "path": PathDomain,
    "nodes": NodeOrderDomain,
    "flat": FlatDomain,
}

_CONSTRUCTOR_ARITIES: Mapping[str, Optional[int]] = {
    "product": None,
    "lex": 2,
    "hoare": 1,
    "reverse": 1,
}

DOMAIN_GRAMMAR = """\
domain ::= 'bool' | 'bool_rev' | 'tropical' | 'tropical_rev' | 'fuzzy' | 'probabilistic'
         | 'powerset' | 'powerset_rev'
         | ('set' | 'set_rev' | 'path' | 'nodes' | 'flat') [ '[' node {',' node} ']' ]
         | 'product' '(' domain {',' domain} ')'
         | 'lex' '(' domain ',' domain ')'
         | 'hoare' '(' domain ')' | 'reverse' '(' domain ')'
"""

_DOMAIN_TOKEN = re.compile(r"\s*([\[\](),]|[^\s\[\](),]+)")


class _DomainTextParser:
    def __init__(self, text: str, node_order: Sequence[str]) -> None:
        self._text = text
        self._node_order = tuple(node_order)
        self._tokens: List[str] = _DOMAIN_TOKEN.findall(text)
        self._pos = 0

    def parse(self) -> Domain:
        domain = self._domain()
        if self._pos != len(self._tokens):
            self._fail(f"unexpected trailing input {self._tokens[self._pos]!r}")
        return domain

    def _fail(self, message: str):
        raise DomainTypeError(
            f"Bad domain text {self._text!r}: {message}\n{DOMAIN_GRAMMAR}"
        )

    def _peek(self) -> Optional[str]:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def _advance(self) -> str:
        token = self._peek()
        if token is None:
            self._fail("unexpected end of input")
        self._pos += 1
        return token  # type: ignore

    def _consume(self, expected: str) -> None:
        token = self._advance()
        if token != expected:
            self._fail(f"expected {expected!r} but found {token!r}")

    def _domain(self) -> Domain:
        name = self._advance()
        if name in _SIMPLE_DOMAIN_NAMES:
            return _SIMPLE_DOMAIN_NAMES[name]()
        if name in _NODE_LIST_DOMAIN_NAMES:
            if self._peek() == "[":
                nodes = self._node_list()
            elif self._node_order:
                nodes = self._node_order
            else:
                self._fail(f"{name} needs an explicit node list outside of a field")
            return _NODE_LIST_DOMAIN_NAMES[name](nodes)
        if name in _CONSTRUCTOR_ARITIES:
            arguments = self._domain_list()
            arity = _CONSTRUCTOR_ARITIES[name]
            if arity is not None and len(arguments) != arity:
                self._fail(f"{name} takes {arity} domain(s), got {len(arguments)}")
            if name == "product":
                return ProductDomain(arguments)
            if name == "lex":
                return LexProductDomain(arguments[0], arguments[1])
            if name == "hoare":
                return HoareDomain(arguments[0])
            return arguments[0].reversed()
        return self._fail(f"unknown domain {name!r}")

    def _node_list(self) -> Tuple[str, ...]:
        self._consume("[")
        nodes = []
        while self._peek() != "]":
            nodes.append(self._advance().strip("\"'"))
            if self._peek() == ",":
                self._advance()
        self._consume("]")
        return tuple(nodes)

    def _domain_list(self) -> List[Domain]:
        self._consume("(")
        domains = [self._domain()]
        while self._peek() == ",":
            self._advance()
            domains.append(self._domain())
        self._consume(")")
        return domains


def parse_domain(text: str, *, node_order: Sequence[str] = ()) -> Domain:
    """
    Parse the compact text form of a domain, e.g. ``lex(tropical_rev, nodes[0, 1, 2])``.

    Node-indexed kinds written without a node list use *node_order*.
    """
    return _DomainTextParser(text, node_order).parse()


def domain_from_json(doc: Any, *, node_order: Sequence[str] = ()) -> Domain:
    """
    Decode a domain descriptor.

    Accepts either the tagged JSON object produced by `Domain.to_json`
    or a string in the text syntax of `parse_domain`.
    """
    if isinstance(doc, str):
        return parse_domain(doc, node_order=node_order)
    if not isinstance(doc, dict) or "kind" not in doc:
        raise DomainTypeError(
            f"A domain must be a string or an object with a kind: {doc!r}"
        )
    kind = doc["kind"]
    reversed_order = bool(doc.get("reversed", False))

    def nodes_for(key: str) -> Tuple[str, ...]:
        nodes = tuple(str(node) for node in doc.get(key, node_order))
        if not nodes:
            raise DomainTypeError(f"Domain {kind} needs a non-empty '{key}'")
        return nodes

    if kind == "bool":
        return BoolDomain(reversed_order)
    if kind == "tropical":
        return TropicalDomain(reversed_order)
    if kind == "interval":
        return IntervalDomain(doc.get("times", "min"))
    if kind == "finite-set":
        universe = doc.get("universe")
        return FiniteSetDomain(
            None
            if universe is None
            else [value_from_json(element) for element in universe],
            reversed_order=reversed_order,
        )
    if kind == "path":
        return PathDomain(nodes_for("node_order"))
    if kind == "node-order":
        return NodeOrderDomain(nodes_for("order"))
    if kind == "flat":
        return FlatDomain(nodes_for("nodes"))
    if kind == "product":
        return ProductDomain(
            domain_from_json(component, node_order=node_order) for component in doc["of"]
        )
    if kind == "lexproduct":
        first, second = doc["of"]
        return LexProductDomain(
            domain_from_json(first, node_order=node_order),
            domain_from_json(second, node_order=node_order),
        )
    if kind == "hoare":
        return HoareDomain(domain_from_json(doc["of"], node_order=node_order))
    if kind == "reverse":
        return domain_from_json(doc["of"], node_order=node_order).reversed()
    raise DomainTypeError(f"Unknown domain kind {kind!r}")


# Law checks, shared by the `check` command and the test-suite.


@attrs(frozen=True, slots=True)
class LawViolation:
    law: str = attrib(validator=instance_of(str))
    witnesses: Tuple[Value, ...] = attrib(converter=tuple)

    def __str__(self) -> str:
        return f"{self.law} fails on {', '.join(repr(w) for w in self.witnesses)}"


def check_laws(domain: Domain, rng: Random, *, cases: int = 200) -> List[LawViolation]:
    """
    Check the partial-order, lattice and (where applicable) semiring laws
    of *domain* on *cases* random triples.
    """
    violations: List[LawViolation] = []

    def expect(law: str, holds: bool, *witnesses: Value) -> None:
        if not holds:
            violations.append(LawViolation(law, witnesses))

    for _ in range(cases):
        a, b, c = domain.sample(rng), domain.sample(rng), domain.sample(rng)
        expect("bottom", domain.leq(domain.bottom, a), a)
        expect("top", domain.leq(a, domain.top), a)
        expect("reflexivity", domain.leq(a, a), a)
        expect(
            "antisymmetry", not (domain.leq(a, b) and domain.leq(b, a)) or a == b, a, b
        )
        expect(
            "transitivity",
            not (domain.leq(a, b) and domain.leq(b, c)) or domain.leq(a, c),
            a,
            b,
            c,
        )
        expect("join commutes", domain.join(a, b) == domain.join(b, a), a, b)
        expect("meet commutes", domain.meet(a, b) == domain.meet(b, a), a, b)
        expect(
            "join associates",
            domain.join(domain.join(a, b), c) == domain.join(a, domain.join(b, c)),
            a,
            b,
            c,
        )
        expect("join idempotent", domain.join(a, a) == a, a)
        expect("meet idempotent", domain.meet(a, a) == a, a)
        expect(
            "order agrees with join", domain.leq(a, b) == (domain.join(a, b) == b), a, b
        )
        expect("join is an upper bound", domain.leq(a, domain.join(a, b)), a, b)
        expect("meet is a lower bound", domain.leq(domain.meet(a, b), a), a, b)
        if domain.is_semiring:
            expect("plus of nothing", domain.plus([]) == domain.bottom)
            expect("bottom is the unit of plus", domain.plus([domain.bottom, a]) == a, a)
            expect("top absorbs plus", domain.plus([domain.top, a]) == domain.top, a)
            expect(
                "bottom absorbs times", domain.times(domain.bottom, a) == domain.bottom, a
            )
            expect("top is the unit of times", domain.times(domain.top, a) == a, a)
            expect(
                "times distributes over plus",
                domain.times(a, domain.plus([b, c]))
                == domain.plus([domain.times(a, b), domain.times(a, c)]),
                a,
                b,
                c,
            )
            expect("times commutes", domain.times(a, b) == domain.times(b, a), a, b)
            expect(
                "plus induces the order",
                domain.leq(a, b) == (domain.plus([a, b]) == b),
                a,
                b,
            )
    return violations


def measure_chain_height(domain: Domain, rng: Random, *, attempts: int = 500) -> int:
    """
    Count strict increases of a chain built by repeatedly joining random samples
    onto bottom.
    """
    current = domain.bottom
    height = 0
    for _ in range(attempts):
        joined = domain.join(current, domain.sample(rng))
        if joined != current:
            height += 1
            current = joined
    return height


def down_closure(domain: Domain, value: Value, universe: Iterable[Value]) -> Any:
    """
    The down-closure of a Hoare value within a finite *universe* of element values.
    """
    hoare = domain if isinstance(domain, HoareDomain) else None
    if hoare is None:
        raise DomainTypeError("Down-closures are only defined for Hoare power domains")
    return immutableset(
        candidate
        for candidate in universe
        if any(
            hoare.element.leq(candidate, maximal)
            for maximal in value.elements  # type: ignore
        )
    )


def all_values(domain: Domain) -> List[Value]:
    """
    Enumerate a small finite domain; used by exhaustive checks.
    """
    if isinstance(domain, BoolDomain):
        return [FALSE, TRUE]
    if isinstance(domain, NodeOrderDomain):
        return [NodeValue(node) for node in domain.order]
    if isinstance(domain, FlatDomain):
        return [BOTTOM_SYMBOL, TOP_SYMBOL] + [NodeValue(node) for node in domain.nodes]
    if isinstance(domain, FiniteSetDomain) and domain.universe is not None:
        universe = domain.universe
        return [
            SetValue(element for (element, keep) in zip(universe, mask) if keep)
            for mask in cartesian_product((False, True), repeat=len(universe))
        ]
    if isinstance(domain, ProductDomain):
        return [
            TupleValue(combination)
            for combination in cartesian_product(
                *(all_values(component) for component in domain.components)
            )
        ]
    if isinstance(domain, LexProductDomain):
        return [
            TupleValue(combination)
            for combination in cartesian_product(
                all_values(domain.first), all_values(domain.second)
            )
        ]
    if isinstance(domain, ReversedDomain):
        return all_values(domain.inner)
    raise DomainTypeError(f"Domain {domain.to_text()} is not finitely enumerable")
