from smuc.errors import ScenarioError
from smuc.rescue import (
    assigned_routes,
    check_routes,
    gen_scenario,
    oracle_assignment,
    rescue_program,
    rescue_program_text,
    rescue_to_dot,
    run_rescue,
    scenario_field,
)
from smuc.saf import is_saf
from smuc.values import NumValue

import pytest


def _line():
    # v - m - r, with the rescuer three away from the victim
    return scenario_field(
        ["v", "m", "r"], {("v", "m"): 1, ("m", "r"): 2}, {"v": 1}, ["r"]
    )


def _two_pairs():
    # each victim needs two rescuers but only one is close to each
    return scenario_field(
        ["v1", "r1", "r2", "v2"],
        {("v1", "r1"): 1, ("r1", "r2"): 5, ("r2", "v2"): 1},
        {"v1": 2, "v2": 2},
        ["r1", "r2"],
    )


def test_single_rescuer_reaches_single_victim():
    outcome = run_rescue(_line())
    assert outcome.success
    assert outcome.assignment == {"v": {"r"}}
    assert assigned_routes(outcome.field) == [("v", ("r", "m", "v"))]
    assert outcome.to_json() == {
        "success": True,
        "assignment": {"v": ["r"]},
        "victims_by_round": [["v"], []],
    }
    assert repr(outcome.field.read("D", "r")) == "(3, m)"
    assert check_routes(_line(), outcome) is None
    assert oracle_assignment(_line()) == outcome.assignment


def test_victims_needing_more_rescuers_than_reach_them():
    outcome = run_rescue(_two_pairs())
    assert not outcome.success
    assert outcome.assignment == {}
    assert oracle_assignment(_two_pairs()) == {}


def test_literal_saved_condition():
    outcome = run_rescue(_two_pairs(), saved_literal=True)
    assert outcome.success
    assert outcome.assignment == {"v1": {"r1"}, "v2": {"r2"}}
    assert oracle_assignment(_two_pairs(), saved_literal=True) == outcome.assignment
    assert "saved_literal(rescuers, howMany)" in rescue_program_text(saved_literal=True)


def test_no_victims_is_a_success():
    field = gen_scenario(5, 0, 3, 1)
    outcome = run_rescue(field)
    assert outcome.success
    assert outcome.assignment == {}


@pytest.mark.parametrize("seed", range(20))
def test_program_agrees_with_dijkstra(seed):
    # up to 30 nodes, with one to three victims
    field = gen_scenario(5 + seed, 1 + seed % 3, 2 + seed % 2, seed)
    outcome = run_rescue(field)
    assert outcome.assignment == oracle_assignment(field)
    assert check_routes(field, outcome) is None


def test_victims_with_several_needs():
    field = gen_scenario(8, [1, 2], 5, 3)
    needs = sorted(
        repr(field.read("howMany", node))
        for node in field.nodes
        if field.read("howMany", node) != NumValue(0)
    )
    assert needs == ["1", "2"]
    assert run_rescue(field).assignment == oracle_assignment(field)


def test_scenarios_are_reproducible():
    first = gen_scenario(10, 2, 3, 42)
    assert first == gen_scenario(10, 2, 3, 42)
    assert len(first.nodes) == 15
    assert all(node.startswith("n") and len(node) == 3 for node in first.nodes)
    assert sum(first.read("rescuer", node).value for node in first.nodes) == 3
    # every edge comes with its reverse
    assert all((target, source) in first.edges for (source, target) in first.edges)


def test_bad_scenarios():
    with pytest.raises(ScenarioError):
        gen_scenario(0, 0, 0, 0)
    with pytest.raises(ScenarioError):
        gen_scenario(-1, 1, 1, 0)
    with pytest.raises(ScenarioError):
        scenario_field(["a", "b"], {("a", "b"): 0}, {"a": 1}, ["b"])
    with pytest.raises(ScenarioError):
        gen_scenario(30, 1, 1, 0, radius=0.01, retries=2)


def test_rescue_program_is_not_in_simple_assignment_form():
    assert not is_saf(rescue_program())


def test_rescue_drawing():
    outcome = run_rescue(_line())
    dot = rescue_to_dot(outcome)
    assert dot.startswith('digraph "rescue" {')
    assert '"r" -> "m" [label="dst(2)", style=bold];' in dot


def test_equally_close_rescuers_are_ranked_by_node_order():
    # r2 is declared before r1, and both are one step from the victim
    field = scenario_field(
        ["v", "r2", "r1"], {("r1", "v"): 1, ("r2", "v"): 1}, {"v": 1}, ["r1", "r2"]
    )
    outcome = run_rescue(field)
    assert outcome.success
    assert outcome.assignment == {"v": {"r2"}}
    assert oracle_assignment(field) == outcome.assignment


def test_unreachable_victims_stay_unsaved():
    field = scenario_field(
        ["v", "m", "r", "u"], {("v", "m"): 1, ("m", "r"): 2}, {"v": 1, "u": 1}, ["r"]
    )
    outcome = run_rescue(field)
    assert not outcome.success
    assert outcome.assignment == {"v": {"r"}}
    assert outcome.victims_by_round[-1] == {"u"}
    assert oracle_assignment(field) == outcome.assignment
    assert check_routes(field, outcome) is None


def test_full_size_scenario():
    field = gen_scenario(1000, 5, 10, 0)
    assert len(field.nodes) == 1015
    outcome = run_rescue(field)
    assert outcome.success == (len(outcome.assignment) == 5)
    assert outcome.assignment == oracle_assignment(field)
    assert check_routes(field, outcome) is None
