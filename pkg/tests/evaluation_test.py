from itertools import product
from pathlib import Path

from smuc.config import SmucSettings
from smuc.domains import BoolDomain
from smuc.errors import (
    DomainInferenceError,
    InfiniteChainError,
    NonMonotoneFormulaError,
    UnknownLabelError,
)
from smuc.evaluation import (
    EMPTY_ENVIRONMENT,
    Environment,
    Evaluator,
    eval_formula,
    eval_trace,
)
from smuc.field import load_field, load_field_file, valuation_text
from smuc.formula import parse_formula
from smuc.values import FALSE, TRUE, NodeValue

import pytest

FIXTURES = Path(__file__).parent.parent / "fixtures"


def _trace_text(field_name, formula_text):
    field = load_field_file(FIXTURES / field_name)
    trace = eval_trace(field, EMPTY_ENVIRONMENT, parse_formula(formula_text))
    return [valuation_text(row, field.nodes) for row in trace]


def test_reachability_trace():
    assert _trace_text("cycle.json", "mu z. or(i, <out:or> z)") == [
        "0:false 1:false 2:false 3:false",
        "0:true 1:false 2:false 3:false",
        "0:true 1:true 2:false 3:false",
        "0:true 1:true 2:true 3:true",
    ]


def test_minimum_identifier_trace():
    assert _trace_text("cycle.json", "mu z. min(ids, <out:min> z)") == [
        "0:inf 1:inf 2:inf 3:inf",
        "0:0 1:1 2:2 3:3",
        "0:0 1:0 2:1 3:1",
        "0:0 1:0 2:0 3:0",
    ]


def test_gathering_identifiers_trace():
    assert _trace_text("cycle.json", "mu z. cup(known, <out:cup> z)") == [
        "0:{} 1:{} 2:{} 3:{}",
        "0:{0} 1:{1} 2:{2} 3:{3}",
        "0:{0, 2} 1:{0, 1} 2:{1, 2, 3} 3:{1, 3}",
        "0:{0, 1, 2, 3} 1:{0, 1, 2} 2:{0, 1, 2, 3} 3:{0, 1, 3}",
        "0:{0, 1, 2, 3} 1:{0, 1, 2, 3} 2:{0, 1, 2, 3} 3:{0, 1, 2, 3}",
    ]


def test_backward_reachability():
    assert _trace_text("cycle.json", "mu z. or(i, <in:or> z)")[-1] == (
        "0:true 1:true 2:true 3:true"
    )
    assert _trace_text("cycle.json", "mu z. or(i, <in:or> z)")[2] == (
        "0:true 1:false 2:true 3:false"
    )


def test_greatest_fixpoint_starts_from_top():
    rows = _trace_text("cycle.json", "nu z. and(i, <out:and> z)")
    assert rows[0] == "0:true 1:true 2:true 3:true"
    assert rows[-1] == "0:false 1:false 2:false 3:false"


def test_shortest_distance_trace():
    rows = _trace_text("weighted.json", "mu z. min(i, <out w:min> z)")
    assert len(rows) == 5
    assert rows[3] == "0:0 1:1 2:4 3:2"
    assert rows[4] == "0:0 1:1 2:3 3:2"


def test_distances_to_goals():
    field = load_field_file(FIXTURES / "weighted.json")
    trace = eval_trace(
        field, EMPTY_ENVIRONMENT, parse_formula("mu z. join(goals, <out wpairs:join> z)")
    )
    assert len(trace) == 5
    assert repr(trace[3]["2"]) == "{(0, 4)}"
    assert repr(trace[4]["2"]) == "{(0, 3)}"
    assert repr(trace[4]["0"]) == "{(0, 0)}"


def test_shortest_routes():
    field = load_field_file(FIXTURES / "weighted.json")
    trace = eval_trace(
        field, EMPTY_ENVIRONMENT, parse_formula("mu z. join(routes, <out wpaths:join> z)")
    )
    assert repr(trace[2]["1"]) == "{(1, 1·0)}"
    assert repr(trace[3]["2"]) == "{(4, 2·1·0)}"
    # the longer route through 3 is cheaper and replaces the direct one
    assert repr(trace[4]["2"]) == "{(3, 2·3·1·0)}"
    assert repr(trace[-1]["3"]) == "{(2, 3·1·0)}"


def test_spanning_tree_trace():
    rows = _trace_text("spanning_tree.json", "mu z. min1(i, <out alpha:min1> z)")
    assert rows[0] == "0:(inf, 3) 1:(inf, 3) 2:(inf, 3) 3:(inf, 3)"
    assert rows[1] == "0:(0, 0) 1:(inf, 1) 2:(inf, 2) 3:(inf, 3)"
    assert rows[-1] == "0:(0, 0) 1:(1, 0) 2:(3, 3) 3:(2, 1)"
    assert len(rows) == 5


def test_evaluate_agrees_with_trace():
    field = load_field_file(FIXTURES / "weighted.json")
    formula = parse_formula("mu z. min(i, <out w:min> z)")
    evaluator = Evaluator(field)
    assert evaluator.evaluate(formula) == evaluator.trace(formula)[-1]


def test_iterates_increase():
    field = load_field_file(FIXTURES / "cycle.json")
    for text in ("mu z. cup(known, <out:cup> z)", "nu z. and(i, <out:and> z)"):
        step = Evaluator(field).fixpoint_step(parse_formula(text))
        trace = step.iterate()
        for (earlier, later) in zip(trace, trace[1:]):
            assert step.below(earlier, later)
        assert step(step.fixpoint()) == step.fixpoint()


def test_only_fixpoints_have_steps():
    field = load_field_file(FIXTURES / "cycle.json")
    with pytest.raises(DomainInferenceError):
        Evaluator(field).fixpoint_step(parse_formula("or(i, i)"))


def test_environment_variables():
    field = load_field_file(FIXTURES / "cycle.json")
    formula = parse_formula("or(x, <out:or> x)", free_variables=["x"])
    environment = Environment().bind(
        "x", {"0": FALSE, "1": TRUE, "2": FALSE, "3": FALSE}, BoolDomain()
    )
    assert valuation_text(eval_formula(field, environment, formula), field.nodes) == (
        "0:false 1:true 2:true 3:true"
    )
    with pytest.raises(DomainInferenceError):
        eval_formula(field, EMPTY_ENVIRONMENT, formula)


def test_self():
    field = load_field_file(FIXTURES / "cycle.json")
    valuation = eval_formula(field, EMPTY_ENVIRONMENT, parse_formula("self()"))
    assert valuation["2"] == NodeValue("2")


def test_unknown_label():
    field = load_field_file(FIXTURES / "cycle.json")
    with pytest.raises(UnknownLabelError):
        eval_formula(
            field, EMPTY_ENVIRONMENT, parse_formula("mu z. or(nothing, <out:or> z)")
        )


def test_non_monotone_fixpoints_are_rejected():
    field = load_field_file(FIXTURES / "cycle.json")
    with pytest.raises(NonMonotoneFormulaError):
        eval_formula(field, EMPTY_ENVIRONMENT, parse_formula("mu z. not(z)"))
    with pytest.raises(NonMonotoneFormulaError):
        eval_formula(
            field,
            EMPTY_ENVIRONMENT,
            parse_formula("mu z : lex(bool, bool). tuple(i, snd(z))"),
        )


def test_iteration_cap():
    field = load_field_file(FIXTURES / "cycle.json")
    # counting up around the cycle 0 -> 2 -> 1 -> 0 never stabilizes
    with pytest.raises(InfiniteChainError):
        eval_formula(
            field,
            EMPTY_ENVIRONMENT,
            parse_formula("mu z : tropical. add(1, <out:max> z)"),
            settings=SmucSettings(max_iterations=20),
        )


def test_dense_domains_cannot_be_iterated():
    field = load_field_file(FIXTURES / "cycle.json")
    with pytest.raises(InfiniteChainError):
        eval_formula(field, EMPTY_ENVIRONMENT, parse_formula("mu z : fuzzy. z"))


def _least_solution(nodes, successors, initial):
    # every valuation is tried; the least fixed point is below all the others
    solutions = []
    for bits in product([False, True], repeat=len(nodes)):
        candidate = dict(zip(nodes, bits))
        stepped = {
            node: initial[node] or any(candidate[other] for other in successors[node])
            for node in nodes
        }
        if stepped == candidate:
            solutions.append(candidate)
    (least,) = [
        solution
        for solution in solutions
        if all(
            all(other[node] or not solution[node] for node in nodes)
            for other in solutions
        )
    ]
    return least


def test_least_fixpoints_are_least_on_small_boolean_fields():
    formula = parse_formula("mu z. or(i, <out:or> z)")
    for size in range(1, 4):
        nodes = [str(node) for node in range(size)]
        possible_edges = list(product(nodes, nodes))
        for edge_bits in product([False, True], repeat=len(possible_edges)):
            edges = [edge for (edge, kept) in zip(possible_edges, edge_bits) if kept]
            successors = {
                node: [target for (source, target) in edges if source == node]
                for node in nodes
            }
            for initial_bits in product([False, True], repeat=size):
                initial = dict(zip(nodes, initial_bits))
                field = load_field(
                    {
                        "nodes": nodes,
                        "edges": [list(edge) for edge in edges],
                        "node_labels": {"i": {"domain": "bool", "values": initial}},
                    }
                )
                valuation = eval_formula(field, EMPTY_ENVIRONMENT, formula)
                expected = _least_solution(nodes, successors, initial)
                assert {node: valuation[node] == TRUE for node in nodes} == expected
