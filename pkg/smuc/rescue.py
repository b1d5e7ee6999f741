"""
Coordinating rescuers towards victims.

Every round, each rescuer finds its closest victim, each victim collects the paths of the
rescuers that chose it and, if enough have, engages its cheapest ones.
Victims that were helped and rescuers that were engaged drop out, and the rounds repeat
until a round saves nobody.

Paths are recorded from the victim's side: the path stored at a victim starts with the
victim's neighbour on the route and ends with the rescuer.
"""
import logging
from fractions import Fraction
from math import log, pi, sqrt
from random import Random
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from attr import attrib, attrs
from attr.validators import instance_of

from immutablecollections import ImmutableDict, ImmutableSet, immutabledict, immutableset

from smuc.capabilities import CapabilityRef
from smuc.config import SmucSettings
from smuc.domains import BoolDomain, FiniteSetDomain, LexProductDomain, TropicalDomain
from smuc.errors import DomainTypeError, ScenarioError
from smuc.field import Edge, EdgeLabel, Field, NodeLabel, to_dot
from smuc.functions import (
    CallContext,
    FunctionSpec,
    ScopeRule,
    node_order_domain,
    register_function,
)
from smuc.program import Program, parse_program, run
from smuc.values import (
    BoolValue,
    NodeValue,
    NumValue,
    PathValue,
    SetValue,
    TupleValue,
    Value,
)

from more_itertools import pairwise
from networkx import (
    DiGraph,
    is_connected,
    multi_source_dijkstra_path_length,
    random_geometric_graph,
)

_BOOL = BoolDomain()
_COST = TropicalDomain(True)
_PATHS = FiniteSetDomain()

RESCUE_PROGRAM_TEMPLATE = """\
assigned <- bot : powerset;
finish <- false;
until finish do {{
  source <- origin(victim);
  D <- mu z. min1(source, <out dst:min1> z);
  rescuers <- mu z. cup(init(rescuer, D), <in grd:cup> z);
  engaged <- mu z. cup({choose}(victim, rescuers, howMany), <out cgr:cup> z);
  assigned <- cup(assigned, {choose}(victim, rescuers, howMany));
  previous <- victim;
  victim <- and(victim, not({saved}(rescuers, howMany)));
  rescuer <- and(rescuer, empty(engaged));
  finish <- same(previous, victim)
}};
if not(victim) then success <- true else success <- false
"""


def _cost(value: Value) -> NumValue:
    if not isinstance(value, NumValue):
        raise DomainTypeError(f"Expected a cost, got {value!r}")
    return value


def candidate_key(candidate: Value, node_order: Sequence[str]) -> Tuple:
    """
    Orders ``(cost, path)`` pairs by cost, then path length, then the declared node order.
    """
    (cost, path) = candidate.elements  # type: ignore
    positions = {node: index for (index, node) in enumerate(node_order)}
    return (
        (1, Fraction(0)) if cost.infinite else (0, cost.quantity),
        len(path.nodes),
        tuple(positions.get(node, len(positions)) for node in path.nodes),
    )


def _wanted(how_many: Value) -> Optional[int]:
    count = _cost(how_many)
    return None if count.infinite else int(count.quantity)


def _enough(candidates: SetValue, how_many: Value, literal: bool) -> bool:
    wanted = _wanted(how_many)
    if literal:
        return wanted is None or len(candidates) <= wanted
    return wanted is not None and len(candidates) >= wanted


def opt(candidates: SetValue, how_many: Value, node_order: Sequence[str]) -> SetValue:
    """
    The paths of the *how_many* best candidates.
    """
    wanted = _wanted(how_many)
    ranked = sorted(
        candidates.elements, key=lambda candidate: candidate_key(candidate, node_order)
    )
    if wanted is not None:
        ranked = ranked[:wanted]
    return SetValue(candidate[1] for candidate in ranked)  # type: ignore


def _origin(values: Sequence[Value], context: CallContext) -> Value:
    victim = values[0]
    cost = NumValue.infinity()
    if isinstance(victim, BoolValue) and victim.value:
        cost = NumValue(0)
    return TupleValue((cost, NodeValue(context.node)))


def _init(values: Sequence[Value], context: CallContext) -> Value:
    (rescuer, distance) = values
    if not (isinstance(rescuer, BoolValue) and rescuer.value):
        return SetValue()
    cost = _cost(distance[0])  # type: ignore
    if cost.infinite:
        return SetValue()
    return SetValue([TupleValue((cost, PathValue(())))])


def _saved(literal: bool):
    def implementation(values: Sequence[Value], context: CallContext) -> Value:
        (candidates, how_many) = values
        return BoolValue(_enough(candidates, how_many, literal))  # type: ignore

    return implementation


def _choose(literal: bool):
    def implementation(values: Sequence[Value], context: CallContext) -> Value:
        (victim, candidates, how_many) = values
        if not (isinstance(victim, BoolValue) and victim.value):
            return SetValue()
        if not _enough(candidates, how_many, literal):  # type: ignore
            return SetValue()
        return opt(candidates, how_many, context.node_order)  # type: ignore

    return implementation


def _opt(values: Sequence[Value], context: CallContext) -> Value:
    return opt(values[0], values[1], context.node_order)  # type: ignore


for _spec in (
    FunctionSpec(
        "origin",
        implementation=_origin,
        monotone=True,
        result_domain=ScopeRule(
            lambda scope: LexProductDomain(_COST, node_order_domain(scope))
        ),
        min_arity=1,
        max_arity=1,
    ),
    FunctionSpec(
        "init",
        implementation=_init,
        monotone=False,
        result_domain=ScopeRule(lambda scope: _PATHS),
        min_arity=2,
        max_arity=2,
    ),
    FunctionSpec(
        "opt",
        implementation=_opt,
        monotone=False,
        result_domain=ScopeRule(lambda scope: _PATHS),
        min_arity=2,
        max_arity=2,
    ),
    FunctionSpec(
        "saved",
        implementation=_saved(False),
        monotone=False,
        result_domain=ScopeRule(lambda scope: _BOOL),
        min_arity=2,
        max_arity=2,
    ),
    FunctionSpec(
        "saved_literal",
        implementation=_saved(True),
        monotone=False,
        result_domain=ScopeRule(lambda scope: _BOOL),
        min_arity=2,
        max_arity=2,
    ),
    FunctionSpec(
        "choose",
        implementation=_choose(False),
        monotone=False,
        result_domain=ScopeRule(lambda scope: _PATHS),
        min_arity=3,
        max_arity=3,
    ),
    FunctionSpec(
        "choose_literal",
        implementation=_choose(True),
        monotone=False,
        result_domain=ScopeRule(lambda scope: _PATHS),
        min_arity=3,
        max_arity=3,
    ),
):
    register_function(_spec)


def rescue_program_text(*, saved_literal: bool = False) -> str:
    """
    With *saved_literal*, a victim counts as saved when at most as many rescuers as it
    needs have chosen it, instead of at least as many.
    """
    suffix = "_literal" if saved_literal else ""
    return RESCUE_PROGRAM_TEMPLATE.format(
        choose=f"choose{suffix}", saved=f"saved{suffix}"
    )


def rescue_program(*, saved_literal: bool = False) -> Program:
    return parse_program(rescue_program_text(saved_literal=saved_literal))


# Scenarios


def scenario_field(
    nodes: Sequence[str],
    weighted_edges: Mapping[Edge, int],
    victims: Mapping[str, int],
    rescuers: Sequence[str],
) -> Field:
    """
    A rescue field: every edge gets its reverse with the same weight,
    *victims* maps each victim to the number of rescuers it needs.
    """
    weights: Dict[Edge, int] = {}
    for ((source, target), weight) in weighted_edges.items():
        if weight <= 0:
            raise ScenarioError(
                f"Edge ({source},{target}) needs a positive weight, got {weight}"
            )
        weights[(source, target)] = weight
        weights.setdefault((target, source), weight)
    rescuer_set = immutableset(rescuers)
    return Field(
        nodes,
        list(weights),
        {
            "victim": NodeLabel(
                _BOOL, {node: BoolValue(node in victims) for node in nodes}
            ),
            "rescuer": NodeLabel(
                _BOOL, {node: BoolValue(node in rescuer_set) for node in nodes}
            ),
            "howMany": NodeLabel(
                TropicalDomain(), {node: NumValue(victims.get(node, 0)) for node in nodes}
            ),
        },
        {
            "dst": EdgeLabel(
                None,
                {
                    edge: CapabilityRef("dst", [str(weight)])
                    for (edge, weight) in weights.items()
                },
            )
        },
    )


def gen_scenario(
    landmarks: int,
    victims: Union[int, Sequence[int]],
    rescuers: int,
    seed: int,
    *,
    radius: Optional[float] = None,
    retries: int = 25,
    scale: int = 1000,
) -> Field:
    """
    A connected random geometric graph in the unit square.

    *victims* is either a number of victims needing one rescuer each or the list of how
    many rescuers each victim needs.  Edge weights are the Euclidean distances scaled by
    *scale* and rounded up to positive integers.
    """
    needs = [1] * victims if isinstance(victims, int) else list(victims)
    if landmarks < 0 or rescuers < 0 or any(need < 0 for need in needs):
        raise ScenarioError("Scenario sizes must not be negative")
    size = landmarks + len(needs) + rescuers
    if size == 0:
        raise ScenarioError("A scenario needs at least one node")
    width = len(str(max(size - 1, 0)))
    if radius is None:
        radius = min(1.5, sqrt(2.5 * log(max(size, 2)) / (pi * size)))
    rng = Random(seed)
    for attempt in range(retries):
        graph = random_geometric_graph(size, radius, seed=rng.randrange(2 ** 31))
        if not is_connected(graph):
            logging.debug("Scenario draw %s with seed %s is disconnected", attempt, seed)
            continue
        names = {index: f"n{index:0{width}d}" for index in graph.nodes}
        roles = list(graph.nodes)
        rng.shuffle(roles)
        victim_nodes = roles[: len(needs)]
        rescuer_nodes = roles[len(needs) : len(needs) + rescuers]
        weighted_edges = {}
        for (a, b) in graph.edges:
            (xa, ya) = graph.nodes[a]["pos"]
            (xb, yb) = graph.nodes[b]["pos"]
            weighted_edges[(names[a], names[b])] = max(
                1, int(round(sqrt((xa - xb) ** 2 + (ya - yb) ** 2) * scale))
            )
        logging.info(
            "Drew a %s-node scenario with %s edges after %s attempt(s)",
            size,
            len(weighted_edges),
            attempt + 1,
        )
        return scenario_field(
            [names[index] for index in sorted(graph.nodes)],
            weighted_edges,
            {names[node]: need for (node, need) in zip(victim_nodes, needs)},
            [names[node] for node in rescuer_nodes],
        )
    raise ScenarioError(
        f"No connected scenario with {size} nodes and radius {radius} in {retries} draws"
    )


# Running and checking


Assignment = ImmutableDict[str, ImmutableSet[str]]


def _rescuer_of(path: PathValue, victim: str) -> str:
    return path.nodes[-1] if path.nodes else victim


def assignment_from_field(field: Field) -> Assignment:
    """
    The rescuers each victim engaged, read from the ``assigned`` label.
    """
    ret = {}
    for node in field.nodes:
        paths = field.read("assigned", node)
        if paths.elements:  # type: ignore
            ret[node] = immutableset(
                sorted(_rescuer_of(path, node) for path in paths.elements)  # type: ignore
            )
    return immutabledict(ret)


def assigned_routes(field: Field) -> List[Tuple[str, Tuple[str, ...]]]:
    """
    ``(victim, route)`` pairs, each route running from the rescuer to the victim.
    """
    return [
        (node, tuple(reversed(path.nodes)) + (node,))  # type: ignore
        for node in field.nodes
        for path in field.read("assigned", node).elements  # type: ignore
    ]


@attrs(frozen=True, slots=True)
class RescueOutcome:
    field: Field = attrib(validator=instance_of(Field))
    assignment: Assignment = attrib(converter=immutabledict)
    success: bool = attrib(validator=instance_of(bool))
    victims_by_round: Tuple[ImmutableSet[str], ...] = attrib(converter=tuple)

    def to_json(self) -> Dict:
        return {
            "success": self.success,
            "assignment": {
                victim: list(rescuers) for (victim, rescuers) in self.assignment.items()
            },
            "victims_by_round": [list(victims) for victims in self.victims_by_round],
        }


def _victims(field: Field) -> ImmutableSet[str]:
    return immutableset(
        node for node in field.nodes if field.read("victim", node) == BoolValue(True)
    )


def run_rescue(
    field: Field,
    *,
    saved_literal: bool = False,
    settings: Optional[SmucSettings] = None,
) -> RescueOutcome:
    history = [_victims(field)]

    def observe(step: int, residual: Program, current: Field) -> None:
        victims = _victims(current)
        if victims != history[-1]:
            history.append(victims)

    result = run(
        rescue_program(saved_literal=saved_literal),
        field,
        settings=settings,
        observer=observe,
    )
    outcome = RescueOutcome(
        result.field,
        assignment_from_field(result.field),
        result.field.read("success", result.field.nodes[0]) == BoolValue(True),
        history,
    )
    logging.info(
        "Rescue %s: %s victim(s) helped, %s left",
        "succeeded" if outcome.success else "failed",
        len(outcome.assignment),
        len(history[-1]),
    )
    return outcome


def check_routes(field: Field, outcome: RescueOutcome) -> Optional[str]:
    """
    Every route must follow edges of *field*, and no rescuer may serve two victims.
    """
    edges = immutableset(field.edges)
    served: Dict[str, str] = {}
    for (victim, route) in assigned_routes(outcome.field):
        for hop in pairwise(route):
            if hop not in edges:
                return f"Route {route} to {victim} uses the missing edge {hop}"
        rescuer = route[0]
        if served.setdefault(rescuer, victim) != victim:
            return f"Rescuer {rescuer} serves both {served[rescuer]} and {victim}"
    return None


def _weights(field: Field) -> Dict[Edge, Fraction]:
    capabilities = field.edge_labels["dst"].capabilities
    return {
        edge: capabilities[edge].amount.quantity  # type: ignore
        for edge in field.edges
    }


def oracle_assignment(field: Field, *, saved_literal: bool = False) -> Assignment:
    """
    The same rounds computed directly with Dijkstra's algorithm.

    Ties between next hops go to the neighbour declared first
    and ties between candidates follow `candidate_key`.
    """
    weights = _weights(field)
    reversed_graph = DiGraph()
    reversed_graph.add_nodes_from(field.nodes)
    for ((source, target), weight) in weights.items():
        reversed_graph.add_edge(target, source, weight=weight)
    position = {node: index for (index, node) in enumerate(field.nodes)}
    victims = list(_victims(field))
    free = [
        node for node in field.nodes if field.read("rescuer", node) == BoolValue(True)
    ]
    needs = {node: field.read("howMany", node) for node in victims}
    assignment: Dict[str, ImmutableSet[str]] = {}
    while True:
        distance = (
            multi_source_dijkstra_path_length(reversed_graph, victims, weight="weight")
            if victims
            else {}
        )
        candidates: Dict[str, List[Value]] = {victim: [] for victim in victims}
        for rescuer in free:
            if rescuer not in distance:
                continue
            route = [rescuer]
            while route[-1] not in candidates:
                here = route[-1]
                route.append(
                    min(
                        (
                            target
                            for target in field.successors(here)
                            if target in distance
                            and distance[target] + weights[(here, target)]
                            == distance[here]
                        ),
                        key=position.__getitem__,
                    )
                )
            stored = PathValue(reversed(route[:-1]))
            candidates[route[-1]].append(
                TupleValue((NumValue(distance[rescuer]), stored))
            )
        helped = []
        engaged = []
        for victim in victims:
            pool = SetValue(candidates[victim])
            if not _enough(pool, needs[victim], saved_literal):
                continue
            helped.append(victim)
            chosen = opt(pool, needs[victim], field.nodes)
            if chosen.elements:
                assignment[victim] = immutableset(
                    sorted(
                        _rescuer_of(path, victim)
                        for path in chosen.elements  # type: ignore
                    )
                )
            engaged.extend(
                node for path in chosen.elements for node in path.nodes  # type: ignore
            )
        if not helped:
            return immutabledict(assignment)
        victims = [victim for victim in victims if victim not in helped]
        free = [rescuer for rescuer in free if rescuer not in engaged]


def rescue_to_dot(outcome: RescueOutcome, *, name: str = "rescue") -> str:
    """
    Victims and rescuers in bold, and the routes of engaged rescuers.
    """
    field = outcome.field
    marked = [
        node
        for node in field.nodes
        if outcome.victims_by_round
        and (node in outcome.victims_by_round[0] or node in outcome.assignment)
    ]
    marked.extend(
        rescuer for rescuers in outcome.assignment.values() for rescuer in rescuers
    )
    routes = [
        hop for (_, route) in assigned_routes(field) for hop in pairwise(route)
    ]
    return to_dot(
        field,
        name=name,
        labels=["victim", "rescuer", "howMany", "D"],
        highlighted_nodes=marked,
        highlighted_edges=routes,
    )
