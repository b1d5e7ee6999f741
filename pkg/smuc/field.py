"""
Graph-shaped computational fields.

A `Field` is a directed graph whose nodes carry labels valued in per-label domains
and whose edges carry labels interpreted as capabilities.
Fields are immutable: assignments produce new fields.
"""
import json
import logging
from pathlib import Path
from random import Random
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from attr import attrib, attrs, evolve

from immutablecollections import (
    ImmutableDict,
    ImmutableSet,
    ImmutableSetMultiDict,
    immutabledict,
    immutableset,
    immutablesetmultidict,
)

from smuc.capabilities import (
    Capability,
    CapabilityRef,
    EdgeContext,
    build_capability,
    sample_monotone,
)
from smuc.domains import (
    Domain,
    FiniteSetDomain,
    FlatDomain,
    HoareDomain,
    LexProductDomain,
    NodeOrderDomain,
    PathDomain,
    ProductDomain,
    ReversedDomain,
    domain_from_json,
)
from smuc.errors import (
    DanglingEdgeError,
    DomainTypeError,
    FieldSchemaError,
    NonTotalLabelError,
    UndefinedLabelError,
    UnknownLabelError,
)
from smuc.functions import DomainScope
from smuc.values import (
    BOTTOM_SYMBOL,
    TOP_SYMBOL,
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

from networkx import DiGraph

Edge = Tuple[str, str]
NodeValuation = ImmutableDict[str, Value]

AUXILIARY_PREFIX = "$aux:"


def is_auxiliary(label: str) -> bool:
    return label.startswith(AUXILIARY_PREFIX)


@attrs(frozen=True, slots=True)
class NodeLabel:
    domain: Domain = attrib()
    values: NodeValuation = attrib(converter=immutabledict)


@attrs(frozen=True, slots=True)
class EdgeLabel:
    """
    An edge label: a capability per edge and, optionally,
    the domain of the values it transforms.

    Without a domain, modalities over the label take the domain of their body.
    """

    domain: Optional[Domain] = attrib()
    refs: ImmutableDict[Edge, CapabilityRef] = attrib(converter=immutabledict)
    capabilities: ImmutableDict[Edge, Capability] = attrib(
        init=False, eq=False, repr=False
    )

    def __attrs_post_init__(self) -> None:
        object.__setattr__(
            self,
            "capabilities",
            immutabledict(
                (edge, build_capability(ref)) for (edge, ref) in self.refs.items()
            ),
        )

    def reads(self) -> ImmutableSet[str]:
        return immutableset(
            label
            for capability in self.capabilities.values()
            for label in capability.reads()
        )


def _edge_tuple(edges: Iterable[Sequence[str]]) -> Tuple[Edge, ...]:
    return tuple(immutableset((str(source), str(target)) for (source, target) in edges))


@attrs(frozen=True, slots=True)
class Field:
    """
    Nodes, in their declared total order, directed edges and label interpretations.

    *released* names labels removed by ``free``; reading them is an error.
    """

    nodes: Tuple[str, ...] = attrib(converter=tuple)
    edges: Tuple[Edge, ...] = attrib(converter=_edge_tuple)
    node_labels: ImmutableDict[str, NodeLabel] = attrib(
        converter=immutabledict, factory=immutabledict
    )
    edge_labels: ImmutableDict[str, EdgeLabel] = attrib(
        converter=immutabledict, factory=immutabledict
    )
    released: ImmutableSet[str] = attrib(converter=immutableset, factory=immutableset)
    _out_edges: ImmutableSetMultiDict[str, str] = attrib(init=False, eq=False, repr=False)
    _in_edges: ImmutableSetMultiDict[str, str] = attrib(init=False, eq=False, repr=False)

    def __attrs_post_init__(self) -> None:
        if len(immutableset(self.nodes)) != len(self.nodes):
            raise FieldSchemaError(f"Duplicate node identifiers in {self.nodes}")
        node_set = immutableset(self.nodes)
        for (source, target) in self.edges:
            if source not in node_set or target not in node_set:
                raise DanglingEdgeError(
                    f"Edge ({source},{target}) has an endpoint not in the field"
                )
        for (label, node_label) in self.node_labels.items():
            missing = [node for node in self.nodes if node not in node_label.values]
            if missing:
                raise NonTotalLabelError(
                    f"Node label {label} has no value at nodes {missing}"
                )
            extra = [node for node in node_label.values if node not in node_set]
            if extra:
                raise FieldSchemaError(
                    f"Node label {label} has values at unknown nodes {extra}"
                )
        for (label, edge_label) in self.edge_labels.items():
            missing_edges = [edge for edge in self.edges if edge not in edge_label.refs]
            if missing_edges:
                raise NonTotalLabelError(
                    f"Edge label {label} has no capability on edges {missing_edges}"
                )
        object.__setattr__(self, "_out_edges", immutablesetmultidict(self.edges))
        object.__setattr__(
            self,
            "_in_edges",
            immutablesetmultidict((target, source) for (source, target) in self.edges),
        )

    def successors(self, node: str) -> ImmutableSet[str]:
        return self._out_edges[node]

    def predecessors(self, node: str) -> ImmutableSet[str]:
        return self._in_edges[node]

    def neighbors(self, node: str) -> ImmutableSet[str]:
        """
        The in- and out-neighbours of *node*.
        """
        return immutableset(list(self._out_edges[node]) + list(self._in_edges[node]))

    def has_label(self, label: str) -> bool:
        return label in self.node_labels

    def node_label(self, label: str) -> NodeLabel:
        if label not in self.node_labels:
            if label in self.released:
                raise UndefinedLabelError(f"Label {label} was read after being freed")
            raise UnknownLabelError(f"Unknown node label {label}")
        return self.node_labels[label]

    def edge_label(self, label: str) -> EdgeLabel:
        if label not in self.edge_labels:
            raise UnknownLabelError(f"Unknown edge label {label}")
        return self.edge_labels[label]

    def label_domain(self, label: str) -> Domain:
        return self.node_label(label).domain

    def valuation(self, label: str) -> NodeValuation:
        return self.node_label(label).values

    def read(self, label: str, node: str) -> Value:
        return self.node_label(label).values[node]

    def capability(self, label: str, edge: Edge) -> Capability:
        return self.edge_label(label).capabilities[edge]

    def scope(self) -> DomainScope:
        return DomainScope(
            self.nodes,
            {
                label: node_label.domain
                for (label, node_label) in self.node_labels.items()
            },
        )

    def with_label(
        self, label: str, domain: Domain, values: Mapping[str, Value]
    ) -> "Field":
        """
        A copy of this field with *label* (re)defined.
        """
        labels = dict(self.node_labels)
        labels[label] = NodeLabel(domain, values)
        return evolve(
            self,
            node_labels=labels,
            released=immutableset(name for name in self.released if name != label),
        )

    def without_labels(self, labels: Iterable[str]) -> "Field":
        removed = immutableset(labels)
        return evolve(
            self,
            node_labels={
                name: node_label
                for (name, node_label) in self.node_labels.items()
                if name not in removed
            },
            released=immutableset(list(self.released) + list(removed)),
        )

    def erase_auxiliaries(self) -> "Field":
        """
        This field without auxiliary labels and without memory of released auxiliaries.
        """
        return evolve(
            self,
            node_labels={
                name: node_label
                for (name, node_label) in self.node_labels.items()
                if not is_auxiliary(name)
            },
            released=immutableset(
                name for name in self.released if not is_auxiliary(name)
            ),
        )

    def to_networkx(self) -> DiGraph:
        graph = DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(self.edges)
        return graph


def _node_shorthand(text: str) -> Value:
    if text == "bot":
        return BOTTOM_SYMBOL
    if text == "top":
        return TOP_SYMBOL
    return NodeValue(text)


def decode_value(doc: Any, domain: Optional[Domain]) -> Value:
    """
    Decode a label value, guided by its domain.

    Tagged objects (see `value_from_json`) are always accepted.
    Plain JSON is read as follows: booleans are booleans, integers and number strings
    are numbers unless the domain holds nodes, lists are sets, tuples or antichains
    depending on the domain, and strings in a path domain are ``·``-separated words.
    """
    if isinstance(doc, dict):
        return value_from_json(doc)
    if isinstance(doc, bool):
        return BoolValue(doc)
    if isinstance(doc, float):
        raise DomainTypeError(f"Refusing inexact float {doc}; write numbers as strings")
    inner = domain.inner if isinstance(domain, ReversedDomain) else domain
    if isinstance(inner, (NodeOrderDomain, FlatDomain)):
        return _node_shorthand(str(doc))
    if isinstance(inner, PathDomain):
        if doc in ("top", "•"):
            return PathValue.top_path()
        text = str(doc)
        return PathValue(node for node in text.replace("·", ".").split(".") if node)
    if isinstance(doc, int):
        return NumValue(doc)
    if isinstance(doc, str):
        return NumValue.parse(doc)
    if isinstance(doc, list):
        if isinstance(inner, ProductDomain):
            return TupleValue(
                decode_value(element, component)
                for (element, component) in zip(doc, inner.components)
            )
        if isinstance(inner, LexProductDomain):
            first, second = doc
            return TupleValue(
                (decode_value(first, inner.first), decode_value(second, inner.second))
            )
        if isinstance(inner, HoareDomain):
            return inner.make(decode_value(element, inner.element) for element in doc)
        if isinstance(inner, FiniteSetDomain):
            return SetValue(_decode_set_element(element) for element in doc)
    raise DomainTypeError(f"Cannot decode {doc!r} in domain {domain}")


def _decode_set_element(doc: Any) -> Value:
    if isinstance(doc, str):
        return NodeValue(doc)
    if isinstance(doc, list):
        return TupleValue(_decode_set_element(element) for element in doc)
    return decode_value(doc, None)


def _parse_edge_key(key: str) -> Edge:
    parts = [part.strip() for part in key.split(",")]
    if len(parts) != 2:
        raise FieldSchemaError(f"Edge keys look like 'source,target', got {key!r}")
    return (parts[0], parts[1])


_FIELD_KEYS = {"nodes", "node_order", "edges", "node_labels", "edge_labels"}


def load_field(doc: Mapping[str, Any]) -> Field:
    """
    Build a validated `Field` from a field document.
    """
    if not isinstance(doc, Mapping):
        raise FieldSchemaError("A field document must be a JSON object")
    unknown_keys = set(doc) - _FIELD_KEYS
    if unknown_keys:
        raise FieldSchemaError(f"Unknown field document keys {sorted(unknown_keys)}")
    nodes: List[str] = []
    for entry in doc.get("nodes", ()):
        if isinstance(entry, Mapping):
            if "id" not in entry:
                raise FieldSchemaError(f"Node entry without an id: {entry!r}")
            nodes.append(str(entry["id"]))
        else:
            nodes.append(str(entry))
    if "node_order" in doc:
        order = [str(node) for node in doc["node_order"]]
        if sorted(order) != sorted(nodes):
            raise FieldSchemaError("node_order must be a permutation of the nodes")
        nodes = order
    edges = []
    for edge in doc.get("edges", ()):
        if len(edge) != 2:
            raise FieldSchemaError(f"An edge is a [source, target] pair, got {edge!r}")
        edges.append((str(edge[0]), str(edge[1])))

    node_labels: Dict[str, NodeLabel] = {}
    for (label, label_doc) in doc.get("node_labels", {}).items():
        if "domain" not in label_doc or "values" not in label_doc:
            raise FieldSchemaError(f"Node label {label} needs a domain and values")
        domain = domain_from_json(label_doc["domain"], node_order=nodes)
        values = {}
        for (node, value_doc) in label_doc["values"].items():
            value = domain.canonical(decode_value(value_doc, domain))
            if not domain.contains(value):
                raise DomainTypeError(
                    f"Value {value!r} of label {label} at node {node} is not in {domain}"
                )
            values[str(node)] = value
        node_labels[label] = NodeLabel(domain, values)

    edge_labels: Dict[str, EdgeLabel] = {}
    for (label, label_doc) in doc.get("edge_labels", {}).items():
        edge_domain = (
            domain_from_json(label_doc["domain"], node_order=nodes)
            if "domain" in label_doc
            else None
        )
        refs = {}
        if "default" in label_doc:
            default = CapabilityRef.from_json(label_doc["default"])
            refs = {edge: default for edge in edges}
        for (key, ref_doc) in label_doc.get("caps", {}).items():
            edge = _parse_edge_key(key)
            if edge not in immutableset(edges):
                raise DanglingEdgeError(f"Edge label {label} names a missing edge {key}")
            refs[edge] = CapabilityRef.from_json(ref_doc)
        edge_labels[label] = EdgeLabel(edge_domain, refs)

    field = Field(nodes, edges, node_labels, edge_labels)
    logging.info(
        "Loaded field with %s nodes, %s edges, node labels %s and edge labels %s",
        len(field.nodes),
        len(field.edges),
        sorted(field.node_labels),
        sorted(field.edge_labels),
    )
    return field


def dump_field(field: Field) -> Dict[str, Any]:
    """
    The field document of *field*, with every value in tagged form.
    """
    return {
        "nodes": [{"id": node} for node in field.nodes],
        "node_order": list(field.nodes),
        "edges": [[source, target] for (source, target) in field.edges],
        "node_labels": {
            label: {
                "domain": node_label.domain.to_json(),
                "values": {
                    node: value_to_json(node_label.values[node]) for node in field.nodes
                },
            }
            for (label, node_label) in field.node_labels.items()
        },
        "edge_labels": {
            label: _dump_edge_label(edge_label)
            for (label, edge_label) in field.edge_labels.items()
        },
    }


def _dump_edge_label(edge_label: EdgeLabel) -> Dict[str, Any]:
    ret: Dict[str, Any] = {
        "caps": {
            f"{source},{target}": ref.to_json()
            for ((source, target), ref) in edge_label.refs.items()
        }
    }
    if edge_label.domain is not None:
        ret["domain"] = edge_label.domain.to_json()
    return ret


def load_field_file(path: Path) -> Field:
    with path.open() as field_file:
        return load_field(json.load(field_file))


def write_field_file(field: Field, path: Path) -> None:
    with path.open("w") as field_file:
        json.dump(dump_field(field), field_file, indent=2, sort_keys=True)


def _check_same_nodes(f1: Mapping[str, Value], f2: Mapping[str, Value]) -> None:
    if immutableset(f1) != immutableset(f2):
        raise FieldSchemaError("Node valuations are defined on different node sets")


def lift_order(f1: Mapping[str, Value], f2: Mapping[str, Value], domain: Domain) -> bool:
    """
    Whether *f1* is below *f2* at every node.
    """
    _check_same_nodes(f1, f2)
    return all(domain.leq(f1[node], f2[node]) for node in f1)


def bottom_valuation(nodes: Iterable[str], domain: Domain) -> NodeValuation:
    bottom = domain.bottom
    return immutabledict((node, bottom) for node in nodes)


def top_valuation(nodes: Iterable[str], domain: Domain) -> NodeValuation:
    top = domain.top
    return immutabledict((node, top) for node in nodes)


def valuation_to_json(valuation: Mapping[str, Value]) -> Dict[str, Any]:
    return {node: value_to_json(value) for (node, value) in valuation.items()}


def valuation_text(valuation: Mapping[str, Value], nodes: Sequence[str]) -> str:
    return " ".join(f"{node}:{valuation[node]!r}" for node in nodes)


def check_edge_monotonicity(
    field: Field, rng: Random, *, samples: int = 50
) -> List[Tuple[str, Edge, Value, Value]]:
    """
    Sample every edge capability for monotonicity over its label's domain.
    """
    violations = []
    for (label, edge_label) in field.edge_labels.items():
        if edge_label.domain is None:
            continue
        for (edge, capability) in edge_label.capabilities.items():
            context = EdgeContext(
                edge[0], edge[1], domain=edge_label.domain, reader=field.read
            )
            witness = sample_monotone(
                capability, edge_label.domain, rng, contexts=[context], samples=samples
            )
            if witness is not None:
                violations.append((label, edge, witness[0], witness[1]))
    return violations


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(
    field: Field,
    *,
    name: str = "field",
    labels: Optional[Iterable[str]] = None,
    extra: Optional[Mapping[str, Mapping[str, Value]]] = None,
    highlighted_nodes: Iterable[str] = (),
    highlighted_edges: Iterable[Edge] = (),
) -> str:
    """
    Render *field* in Graphviz DOT, annotating each node with label values.

    *extra* adds valuations which are not labels of the field, e.g. a fixpoint iterate.
    """
    shown = list(field.node_labels) if labels is None else list(labels)
    extra = extra or {}
    bold_nodes = immutableset(highlighted_nodes)
    bold_edges = immutableset(highlighted_edges)
    lines = [f"digraph {_dot_quote(name)} {{"]
    for node in field.nodes:
        annotations = [node]
        for label in shown:
            if label in field.node_labels:
                annotations.append(f"{label}={field.read(label, node)!r}")
        for (label, valuation) in extra.items():
            annotations.append(f"{label}={valuation[node]!r}")
        style = ", style=bold" if node in bold_nodes else ""
        text = _dot_quote("\n".join(annotations))
        lines.append(f"  {_dot_quote(node)} [label={text}{style}];")
    for (source, target) in field.edges:
        edge_annotations = [
            str(edge_label.refs[(source, target)])
            for edge_label in field.edge_labels.values()
        ]
        attributes = [f"label={_dot_quote(', '.join(edge_annotations))}"]
        if (source, target) in bold_edges:
            attributes.append("style=bold")
        arrow = f"{_dot_quote(source)} -> {_dot_quote(target)}"
        lines.append(f"  {arrow} [{', '.join(attributes)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
