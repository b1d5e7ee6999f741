"""
Message-level distributed execution of simple assignment programs.

Every node runs a *fragment*: its residual program, the values it knows for its own
labels and its neighbours' labels, and the state of the agreement protocol that decides
guards.  A guard is decided along a spanning tree of the field: leaves report to
their parents whether their whole subtree holds the guard true, the root decides, and
the decision flows back down.

Value messages carry the number of times the sender has assigned the label.
A node evaluating a modality reads, for each neighbour, the value with the same
assignment count as its own copy of the label, so fragments may run ahead of their
neighbours without corrupting each other's reads.
"""
import json
import logging
from pathlib import Path
from random import Random
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from attr import attrib, attrs, evolve
from attr.validators import in_, instance_of

from immutablecollections import (
    ImmutableDict,
    ImmutableSet,
    ImmutableSetMultiDict,
    immutabledict,
    immutableset,
    immutablesetmultidict,
)

from smuc.capabilities import EdgeContext
from smuc.domains import Domain
from smuc.errors import FuelExhaustedError, InfrastructureError, InvariantViolation
from smuc.evaluation import canonical_value
from smuc.field import Field, NodeLabel
from smuc.formula import (
    Apply,
    Bottom,
    Const,
    DomainTyping,
    Formula,
    Label,
    ModalIn,
    ModalOut,
    Top,
    infer_domains,
    labels_of,
    resolve_capability,
)
from smuc.functions import FUNCTION_REGISTRY, CallContext, DomainScope
from smuc.program import (
    SKIP,
    Assign,
    Free,
    If,
    Program,
    Seq,
    Skip,
    Until,
    program_to_text,
)
from smuc.saf import first_difference, is_saf
from smuc.values import BoolValue, SymbolValue, Value

from networkx import Graph, bfs_edges, is_connected

UNDEF = SymbolValue("undef")

# agreement states of one node, for one guard label, at one iteration
MAYBE_TRUE = "?true"
AGREED_TRUE = "true"
AGREED_FALSE = "false"
_DECIDED = (AGREED_TRUE, AGREED_FALSE)


# Infrastructure


@attrs(frozen=True, slots=True)
class Infrastructure:
    """
    A field with a spanning tree of its underlying undirected graph.
    """

    field: Field = attrib(validator=instance_of(Field))
    root: str = attrib(validator=instance_of(str))
    parents: ImmutableDict[str, str] = attrib(converter=immutabledict)
    children: ImmutableSetMultiDict[str, str] = attrib(init=False, eq=False, repr=False)

    def __attrs_post_init__(self) -> None:
        nodes = immutableset(self.field.nodes)
        if self.root not in nodes:
            raise InfrastructureError(f"Tree root {self.root} is not a node of the field")
        if self.root in self.parents:
            raise InfrastructureError(f"Tree root {self.root} cannot have a parent")
        for node in self.field.nodes:
            if node != self.root and node not in self.parents:
                raise InfrastructureError(
                    f"Node {node} is not attached to the spanning tree"
                )
        for (child, parent) in self.parents.items():
            if child not in nodes or parent not in nodes:
                raise InfrastructureError(
                    f"Tree edge ({parent},{child}) leaves the field"
                )
            if parent not in self.field.neighbors(child):
                raise InfrastructureError(
                    f"Tree edge ({parent},{child}) is not an edge of the field "
                    "in either direction"
                )
        for node in self.field.nodes:
            seen = [node]
            while seen[-1] != self.root:
                seen.append(self.parents[seen[-1]])
                if len(seen) > len(nodes):
                    raise InfrastructureError(f"Tree parents of {node} form a cycle")
        object.__setattr__(
            self,
            "children",
            immutablesetmultidict(
                (parent, child) for (child, parent) in self.parents.items()
            ),
        )

    def parent(self, node: str) -> Optional[str]:
        return self.parents.get(node)

    def is_root(self, node: str) -> bool:
        return node == self.root

    def relatives(self, node: str) -> ImmutableSet[str]:
        parent = self.parents.get(node)
        above = [parent] if parent is not None else []
        return immutableset(above + list(self.children[node]))

    def to_json(self) -> Dict[str, Any]:
        return {"root": self.root, "parents": dict(self.parents)}


def _undirected(field: Field) -> Graph:
    # insertion order fixes the BFS visiting order
    graph = Graph()
    graph.add_nodes_from(sorted(field.nodes))
    for node in sorted(field.nodes):
        for neighbour in sorted(field.neighbors(node)):
            graph.add_edge(node, neighbour)
    return graph


def bfs_infrastructure(field: Field) -> Infrastructure:
    """
    The breadth-first spanning tree rooted at the lexicographically least node of *field*,
    visiting neighbours in lexicographic order.
    """
    if not field.nodes:
        raise InfrastructureError("A field without nodes has no spanning tree")
    graph = _undirected(field)
    if not is_connected(graph):
        raise InfrastructureError(
            "The field is not connected, so it has no spanning tree"
        )
    root = min(field.nodes)
    return Infrastructure(
        field, root, {child: parent for (parent, child) in bfs_edges(graph, root)}
    )


def load_infrastructure(field: Field, doc: Mapping[str, Any]) -> Infrastructure:
    """
    Read ``{"root": n, "parents": {child: parent}}``.
    """
    try:
        return Infrastructure(
            field,
            str(doc["root"]),
            {str(child): str(parent) for (child, parent) in doc["parents"].items()},
        )
    except KeyError as e:
        raise InfrastructureError(f"Spanning tree document lacks {e}")


# Messages


@attrs(frozen=True, slots=True)
class ValueMsg:
    sender: str = attrib(validator=instance_of(str))
    label: str = attrib(validator=instance_of(str))
    version: int = attrib(validator=instance_of(int))
    value: Value = attrib()
    recipients: ImmutableSet[str] = attrib(converter=immutableset)

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": "value",
            "sender": self.sender,
            "label": self.label,
            "version": self.version,
            "value": repr(self.value),
            "to": sorted(self.recipients),
        }


@attrs(frozen=True, slots=True)
class AgreeMsg:
    sender: str = attrib(validator=instance_of(str))
    label: str = attrib(validator=instance_of(str))
    iteration: int = attrib(validator=instance_of(int))
    state: str = attrib(validator=in_((MAYBE_TRUE, AGREED_TRUE, AGREED_FALSE)))
    recipients: ImmutableSet[str] = attrib(converter=immutableset)

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": "agree",
            "sender": self.sender,
            "label": self.label,
            "iteration": self.iteration,
            "state": self.state,
            "to": sorted(self.recipients),
        }


Message = Union[ValueMsg, AgreeMsg]


# Fragments

Versioned = Tuple[int, Value]


@attrs(frozen=True, slots=True)
class Fragment:
    """
    The state of one node.

    *own* maps each label to its assignment count at this node and its value here
    (`UNDEF` once freed); *cached* holds neighbours' values by assignment count;
    *agreement* maps ``(node, label, iteration)`` to an agreement state and
    *counters* counts the guard decisions taken on each label.
    """

    node: str = attrib(validator=instance_of(str))
    program: Program = attrib()
    own: ImmutableDict[str, Versioned] = attrib(converter=immutabledict)
    domains: ImmutableDict[str, Domain] = attrib(converter=immutabledict)
    cached: ImmutableDict[Tuple[str, str], ImmutableDict[int, Value]] = attrib(
        converter=immutabledict, factory=immutabledict
    )
    agreement: ImmutableDict[Tuple[str, str, int], str] = attrib(
        converter=immutabledict, factory=immutabledict
    )
    counters: ImmutableDict[str, int] = attrib(
        converter=immutabledict, factory=immutabledict
    )

    @property
    def terminated(self) -> bool:
        return isinstance(self.program, Skip)

    def version(self, label: str) -> int:
        return self.own[label][0] if label in self.own else 0

    def value(self, label: str) -> Value:
        if label not in self.own:
            return UNDEF
        return self.own[label][1]

    def counter(self, label: str) -> int:
        return self.counters.get(label, 0)

    def state(self, node: str, label: str, iteration: int) -> Optional[str]:
        return self.agreement.get((node, label, iteration))


@attrs(frozen=True, slots=True)
class DistExecution:
    fragments: ImmutableDict[str, Fragment] = attrib(converter=immutabledict)
    pending: Tuple[Message, ...] = attrib(converter=tuple, factory=tuple)

    @property
    def terminated(self) -> bool:
        return not self.pending and all(
            fragment.terminated for fragment in self.fragments.values()
        )


def project(field: Field, program: Program) -> DistExecution:
    """
    Give every node *program* and the labels of *field* at itself and its neighbours.
    """
    if not is_saf(program):
        raise InfrastructureError(
            "Only programs in simple assignment form can be distributed"
        )
    domains = {
        label: node_label.domain for (label, node_label) in field.node_labels.items()
    }
    fragments = {}
    for node in field.nodes:
        fragments[node] = Fragment(
            node,
            program,
            own={
                label: (0, node_label.values[node])
                for (label, node_label) in field.node_labels.items()
            },
            domains=domains,
            cached={
                (label, neighbour): immutabledict([(0, node_label.values[neighbour])])
                for (label, node_label) in field.node_labels.items()
                for neighbour in field.neighbors(node)
            },
        )
    return DistExecution(fragments)


class _Blocked(Exception):
    """
    Raised while evaluating at a node when a needed value has not arrived.
    """


class LocalTyping:
    """
    Domain inference for assignments at single nodes, memoized on the domains involved.
    """

    def __init__(self, field: Field) -> None:
        self._field = field
        self._cache: Dict[Any, DomainTyping] = {}

    def typing(self, assignment: Assign, domains: Mapping[str, Domain]) -> DomainTyping:
        read = sorted(labels_of(assignment.formula))
        key = (
            assignment,
            domains.get(assignment.label),
            tuple((label, domains.get(label)) for label in read),
        )
        if key not in self._cache:
            self._cache[key] = infer_domains(
                assignment.formula,
                self._field,
                scope=DomainScope(
                    self._field.nodes,
                    {label: domains[label] for label in read if label in domains},
                ),
                expected=domains.get(assignment.label),
            )
        return self._cache[key]


def _read(fragment: Fragment, label: str, node: str) -> Value:
    if node == fragment.node:
        value = fragment.value(label)
    else:
        value = fragment.cached.get((label, node), immutabledict()).get(
            fragment.version(label), UNDEF
        )
    if value == UNDEF:
        raise _Blocked(f"{label}@{node}")
    return value


def _evaluate_at(
    fragment: Fragment, formula: Formula, typing: DomainTyping, field: Field
) -> Value:
    """
    The value of an elementary formula at the fragment's node.
    """
    node = fragment.node

    def reader(label: str, at: str) -> Value:
        return _read(fragment, label, at)

    domain = typing.domain(())
    if isinstance(formula, Label):
        return _read(fragment, formula.name, node)
    if isinstance(formula, Const):
        return formula.value
    if isinstance(formula, Bottom):
        return domain.bottom
    if isinstance(formula, Top):
        return domain.top
    if isinstance(formula, Apply):
        spec = FUNCTION_REGISTRY.lookup(formula.function)
        arguments = [
            _read(fragment, arg.name, node)
            if isinstance(arg, Label)
            else arg.value  # type: ignore
            for arg in formula.args
        ]
        context = CallContext(
            node,
            domain,
            [typing.domain((index,)) for index in range(len(formula.args))],
            reader=reader,
            node_order=field.nodes,
        )
        return canonical_value(domain, spec.apply(arguments, context))
    if isinstance(formula, (ModalOut, ModalIn)):
        carried = typing.input_domain(())
        label = formula.body.name  # type: ignore
        if isinstance(formula, ModalOut):
            edges = [(node, successor) for successor in field.successors(node)]
        else:
            edges = [(predecessor, node) for predecessor in field.predecessors(node)]
        received = []
        for (source, target) in edges:
            neighbour = target if isinstance(formula, ModalOut) else source
            capability = resolve_capability(field, formula.capability, (source, target))
            context = EdgeContext(source, target, domain=carried, reader=reader)
            received.append(
                carried.canonical(
                    capability.apply(_read(fragment, label, neighbour), context)
                )
            )
        aggregator = FUNCTION_REGISTRY.lookup_aggregator(formula.aggregator)
        aggregation = CallContext(
            node, domain, [carried], reader=reader, node_order=field.nodes
        )
        return canonical_value(domain, aggregator.apply(received, aggregation))
    raise InfrastructureError(f"Formula {formula!r} is not elementary")


@attrs(frozen=True, slots=True)
class Firing:
    """
    One enabled local rule: its name, the fragment after it and the messages it sends.
    """

    rule: str = attrib(validator=instance_of(str))
    fragment: Fragment = attrib(validator=instance_of(Fragment))
    messages: Tuple[Message, ...] = attrib(converter=tuple, factory=tuple)
    details: ImmutableDict[str, Any] = attrib(
        converter=immutabledict, factory=immutabledict
    )


_FORWARD = {
    None: (MAYBE_TRUE, AGREED_TRUE, AGREED_FALSE),
    MAYBE_TRUE: (AGREED_TRUE, AGREED_FALSE),
}


def _record(fragment: Fragment, label: str, iteration: int, state: str) -> Fragment:
    key = (fragment.node, label, iteration)
    previous = fragment.agreement.get(key)
    if state not in _FORWARD.get(previous, ()):  # type: ignore
        raise InvariantViolation(
            f"Agreement state of {fragment.node} on {label} at iteration {iteration} "
            f"would go from {previous} to {state}"
        )
    return evolve(fragment, agreement={**fragment.agreement, key: state})


def _head(program: Program) -> Program:
    while isinstance(program, Seq):
        if isinstance(program.first, Skip):
            program = program.second
        else:
            program = program.first
    return program


def _replace_head(program: Program, replacement: Program) -> Program:
    """
    *program* with its first statement replaced, dropping leading ``skip``s.
    """
    if isinstance(program, Seq):
        if isinstance(program.first, Skip):
            return _replace_head(program.second, replacement)
        first = _replace_head(program.first, replacement)
        if isinstance(first, Skip):
            return program.second
        return Seq(first, program.second)
    return replacement


def _guard_rule(
    fragment: Fragment, head: Union[If, Until], infrastructure: Infrastructure
) -> Optional[Firing]:
    node = fragment.node
    label = head.guard.name  # type: ignore
    iteration = fragment.counter(label)
    own_state = fragment.state(node, label, iteration)
    details = {"label": label, "iteration": iteration}
    if own_state in _DECIDED:
        counters = {**fragment.counters, label: iteration + 1}
        holds = own_state == AGREED_TRUE
        if isinstance(head, If):
            if holds:
                (rule, residual) = ("D-IfT", head.then)
            else:
                (rule, residual) = ("D-IfF", head.otherwise)
        elif holds:
            (rule, residual) = ("D-UntilT", SKIP)
        else:
            (rule, residual) = ("D-UntilF", Seq(head.body, head))
        return Firing(
            rule,
            evolve(
                fragment,
                program=_replace_head(fragment.program, residual),
                counters=counters,
            ),
            details=details,
        )
    children = infrastructure.children[node]
    relatives = infrastructure.relatives(node)
    if own_state == MAYBE_TRUE:
        parent = infrastructure.parent(node)
        decided = fragment.state(parent, label, iteration) if parent is not None else None
        if decided in _DECIDED:
            return Firing(
                "D-AgreeP",
                _record(fragment, label, iteration, decided),  # type: ignore
                [AgreeMsg(node, label, iteration, decided, children)],  # type: ignore
                details=details,
            )
        return None
    try:
        local = _read(fragment, label, node)
    except _Blocked:
        return None
    if not isinstance(local, BoolValue):
        raise InvariantViolation(f"Guard {label} at {node} holds non-Boolean {local!r}")
    details = {**details, "local": local.value}
    if not local.value:
        return Firing(
            "D-AgreeF1",
            _record(fragment, label, iteration, AGREED_FALSE),
            [AgreeMsg(node, label, iteration, AGREED_FALSE, relatives)],
            details=details,
        )
    child_states = [fragment.state(child, label, iteration) for child in children]
    if any(state == AGREED_FALSE for state in child_states):
        return Firing(
            "D-AgreeF2",
            _record(fragment, label, iteration, AGREED_FALSE),
            [AgreeMsg(node, label, iteration, AGREED_FALSE, relatives)],
            details=details,
        )
    if all(state == MAYBE_TRUE for state in child_states):
        if infrastructure.is_root(node):
            return Firing(
                "D-AgreeN1",
                _record(fragment, label, iteration, AGREED_TRUE),
                [AgreeMsg(node, label, iteration, AGREED_TRUE, children)],
                details=details,
            )
        return Firing(
            "D-AgreeT",
            _record(fragment, label, iteration, MAYBE_TRUE),
            [AgreeMsg(node, label, iteration, MAYBE_TRUE, [infrastructure.parent(node)])],
            details=details,
        )
    return None


def frag_step(
    fragment: Fragment,
    infrastructure: Infrastructure,
    typing: Optional[LocalTyping] = None,
) -> Optional[Firing]:
    """
    The local rule enabled at *fragment*, if any.

    At most one rule is enabled at a time, so fragments are deterministic on their own.
    """
    head = _head(fragment.program)
    if isinstance(head, Skip):
        return None
    field = infrastructure.field
    node = fragment.node
    if isinstance(head, Free):
        own = dict(fragment.own)
        for label in head.labels:
            own[label] = (fragment.version(label), UNDEF)
        cached = {
            key: versions
            for (key, versions) in fragment.cached.items()
            if key[0] not in head.labels
            or any(version > fragment.version(key[0]) for version in versions)
        }
        return Firing(
            "D-Free",
            evolve(
                fragment,
                program=_replace_head(fragment.program, SKIP),
                own=own,
                cached=cached,
            ),
            details={"labels": sorted(head.labels)},
        )
    if isinstance(head, Assign):
        typing = typing or LocalTyping(field)
        domains = fragment.domains
        assignment_typing = typing.typing(head, domains)
        try:
            value = _evaluate_at(fragment, head.formula, assignment_typing, field)
        except _Blocked:
            return None
        label = head.label
        version = fragment.version(label) + 1
        cached = {
            key: (
                immutabledict(
                    (v, value) for (v, value) in versions.items() if v >= version
                )
                if key[0] == label
                else versions
            )
            for (key, versions) in fragment.cached.items()
        }
        updated = evolve(
            fragment,
            program=_replace_head(fragment.program, SKIP),
            own={**fragment.own, label: (version, value)},
            domains={**domains, label: assignment_typing.result},
            cached=cached,
        )
        return Firing(
            "D-Step",
            updated,
            [ValueMsg(node, label, version, value, field.neighbors(node))],
            details={"label": label, "version": version},
        )
    if isinstance(head, (If, Until)):
        return _guard_rule(fragment, head, infrastructure)
    raise InfrastructureError(f"Unexpected statement {head!r}")


def _receive(fragment: Fragment, message: Message) -> Fragment:
    if isinstance(message, ValueMsg):
        key = (message.label, message.sender)
        if message.version < fragment.version(message.label):
            return fragment
        versions = dict(fragment.cached.get(key, immutabledict()))
        versions[message.version] = message.value
        return evolve(fragment, cached={**fragment.cached, key: versions})
    key_agree = (message.sender, message.label, message.iteration)
    return evolve(fragment, agreement={**fragment.agreement, key_agree: message.state})


def deliver(execution: DistExecution, message: Message) -> DistExecution:
    """
    Hand *message* to each of its recipients and drop it from the pending messages.
    """
    fragments = dict(execution.fragments)
    for recipient in message.recipients:
        fragments[recipient] = _receive(fragments[recipient], message)
    pending = list(execution.pending)
    if message in pending:
        pending.remove(message)
    return DistExecution(fragments, pending)


# Lifting back to a field


def lift(execution: DistExecution, field: Field) -> Field:
    """
    The field whose labels hold each node's own values.

    Labels undefined at some node are treated as freed.
    """
    fragments = [execution.fragments[node] for node in field.nodes]
    labels = immutableset(label for fragment in fragments for label in fragment.own)
    node_labels = {}
    released = []
    for label in labels:
        values = {fragment.node: fragment.value(label) for fragment in fragments}
        if any(value == UNDEF for value in values.values()):
            released.append(label)
            continue
        node_labels[label] = NodeLabel(fragments[0].domains[label], values)
    return Field(field.nodes, field.edges, node_labels, field.edge_labels, released)


def agrees_with(execution: DistExecution, field: Field) -> bool:
    """
    Whether the lifted execution matches *field* on all non-auxiliary labels.
    """
    lifted = lift(execution, field).erase_auxiliaries()
    return first_difference(lifted, field.erase_auxiliaries()) is None


# Simulation


@attrs(frozen=True, slots=True)
class Simulation:
    execution: DistExecution = attrib(validator=instance_of(DistExecution))
    events: Tuple[Dict[str, Any], ...] = attrib(converter=tuple)
    steps: int = attrib(validator=instance_of(int))

    def write_events(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as out:
            for event in self.events:
                out.write(json.dumps(event, sort_keys=True))
                out.write("\n")


def _residual_dump(execution: DistExecution) -> str:
    return "\n".join(
        f"{node}: {program_to_text(fragment.program)}"
        for (node, fragment) in execution.fragments.items()
        if not fragment.terminated
    )


def simulate(
    field: Field,
    infrastructure: Infrastructure,
    program: Program,
    seed: int,
    fuel: int = 10 ** 6,
) -> Simulation:
    """
    Run *program* on every node, firing a uniformly chosen enabled rule or pending message
    delivery at each step, until all fragments terminate and no messages are in flight.
    """
    rng = Random(seed)
    typing = LocalTyping(field)
    execution = project(field, program)
    fragments = dict(execution.fragments)
    pending: List[Message] = []
    enabled: Dict[str, Optional[Firing]] = {
        node: frag_step(fragment, infrastructure, typing)
        for (node, fragment) in fragments.items()
    }
    events: List[Dict[str, Any]] = []
    for steps in range(fuel):
        ready = [node for node in field.nodes if enabled[node] is not None]
        choices = len(ready) + len(pending)
        if choices == 0:
            final = DistExecution(fragments, pending)
            if final.terminated:
                logging.info(
                    "Distributed run with seed %s terminated after %s steps", seed, steps
                )
                return Simulation(final, events, steps)
            raise FuelExhaustedError(
                "No rule is enabled but some fragments have not terminated",
                diagnostic=_residual_dump(final),
            )
        choice = rng.randrange(choices)
        if choice < len(ready):
            node = ready[choice]
            firing = enabled[node]
            fragments[node] = firing.fragment  # type: ignore
            pending.extend(firing.messages)  # type: ignore
            events.append(
                {
                    "event": "fire",
                    "node": node,
                    "rule": firing.rule,  # type: ignore
                    **firing.details,  # type: ignore
                }
            )
            for message in firing.messages:  # type: ignore
                events.append({"event": "send", **message.to_json()})
            changed: Iterable[str] = [node]
        else:
            message = pending.pop(choice - len(ready))
            for recipient in message.recipients:
                fragments[recipient] = _receive(fragments[recipient], message)
            events.append({"event": "deliver", **message.to_json()})
            changed = message.recipients
        for node in changed:
            enabled[node] = frag_step(fragments[node], infrastructure, typing)
    raise FuelExhaustedError(
        f"Distributed run did not terminate within {fuel} steps",
        diagnostic=_residual_dump(DistExecution(fragments, pending)),
    )


def check_termination_soundness(events: Sequence[Mapping[str, Any]]) -> Optional[str]:
    """
    Check that every loop exit and true branch was taken only for a guard which
    was true at every node in that iteration.

    Returns a description of the first violation, or `None`.
    """
    local_values: Dict[Tuple[str, int], Dict[str, bool]] = {}
    for event in events:
        if event.get("event") == "fire" and "local" in event:
            local_values.setdefault((event["label"], event["iteration"]), {})[
                event["node"]
            ] = event["local"]
    nodes = immutableset(
        event["node"] for event in events if event.get("event") == "fire"
    )
    for event in events:
        if event.get("event") == "fire" and event["rule"] in ("D-UntilT", "D-IfT"):
            key = (event["label"], event["iteration"])
            values = local_values.get(key, {})
            missing = [node for node in nodes if node not in values]
            false_at = [node for (node, value) in values.items() if not value]
            if missing or false_at:
                return (
                    f"{event['rule']} at {event['node']} on {key[0]} iteration {key[1]} "
                    f"without the guard being true everywhere "
                    f"(false at {sorted(false_at)}, unknown at {sorted(missing)})"
                )
    return None


def check_tree_locality(
    events: Sequence[Mapping[str, Any]], infrastructure: Infrastructure
) -> Optional[str]:
    """
    Agreement messages must follow tree edges and value messages field edges.
    """
    field = infrastructure.field
    for event in events:
        if event.get("event") != "send":
            continue
        allowed = (
            infrastructure.relatives(event["sender"])
            if event["kind"] == "agree"
            else field.neighbors(event["sender"])
        )
        stray = [node for node in event["to"] if node not in allowed]
        if stray:
            return f"{event['kind']} message from {event['sender']} sent to {stray}"
    return None
