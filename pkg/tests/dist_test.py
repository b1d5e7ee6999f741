import json
from pathlib import Path

from smuc.dist import (
    DistExecution,
    agrees_with,
    bfs_infrastructure,
    check_termination_soundness,
    check_tree_locality,
    deliver,
    frag_step,
    lift,
    load_infrastructure,
    project,
    simulate,
)
from smuc.errors import InfrastructureError
from smuc.field import load_field, load_field_file
from smuc.program import load_program_file, parse_program, run
from smuc.rescue import rescue_program, scenario_field
from smuc.saf import translate_program
from smuc.values import FALSE

import pytest

FIXTURES = Path(__file__).parent.parent / "fixtures"


def _cycle():
    return load_field_file(FIXTURES / "cycle.json")


def test_breadth_first_tree():
    infrastructure = bfs_infrastructure(_cycle())
    assert infrastructure.root == "0"
    assert infrastructure.parents == {"1": "0", "2": "0", "3": "1"}
    assert infrastructure.children["0"] == {"1", "2"}
    assert infrastructure.relatives("1") == {"0", "3"}


def test_trees_follow_field_edges():
    field = _cycle()
    assert load_infrastructure(
        field, {"root": "2", "parents": {"0": "2", "1": "2", "3": "2"}}
    )
    with pytest.raises(InfrastructureError):
        load_infrastructure(
            field, {"root": "0", "parents": {"1": "0", "2": "0", "3": "0"}}
        )
    with pytest.raises(InfrastructureError):
        load_infrastructure(
            field, {"root": "0", "parents": {"1": "2", "2": "1", "3": "1"}}
        )
    with pytest.raises(InfrastructureError):
        load_infrastructure(field, {"root": "0", "parents": {"1": "0"}})
    with pytest.raises(InfrastructureError):
        load_infrastructure(field, {"parents": {}})


def test_disconnected_fields_have_no_tree():
    with pytest.raises(InfrastructureError):
        bfs_infrastructure(load_field({"nodes": ["0", "1"], "edges": []}))


def test_only_simple_assignment_form_is_distributed():
    with pytest.raises(InfrastructureError):
        project(_cycle(), load_program_file(FIXTURES / "programs" / "reach.smuc"))


def test_modalities_wait_for_neighbour_values():
    field = _cycle()
    infrastructure = bfs_infrastructure(field)
    execution = project(field, parse_program("x <- i; y <- <out:or> x"))
    first = frag_step(execution.fragments["0"], infrastructure)
    assert first.rule == "D-Step"
    (sent,) = first.messages
    assert sent.recipients == {"1", "2"}
    assert sent.version == 1
    # node 0 has assigned x but its only successor has not
    assert frag_step(first.fragment, infrastructure) is None
    second = frag_step(execution.fragments["2"], infrastructure)
    (message,) = second.messages
    after = deliver(
        DistExecution(
            {**execution.fragments, "0": first.fragment, "2": second.fragment}, [message]
        ),
        message,
    )
    assert not after.pending
    third = frag_step(after.fragments["0"], infrastructure)
    assert third.rule == "D-Step"
    assert third.fragment.value("y") == FALSE


def _fixture_case(field_name, program_name):
    return (
        load_field_file(FIXTURES / field_name),
        load_program_file(FIXTURES / "programs" / program_name),
    )


def _rescue_case():
    field = scenario_field(
        ["v", "m", "r"], {("v", "m"): 1, ("m", "r"): 2}, {"v": 1}, ["r"]
    )
    return (field, rescue_program())


@pytest.mark.parametrize(
    "case",
    [
        lambda: _fixture_case("cycle.json", "reach.smuc"),
        lambda: _fixture_case("cycle.json", "loop.smuc"),
        lambda: _fixture_case("cycle.json", "nested.smuc"),
        lambda: _fixture_case("spanning_tree.json", "spanning_tree.smuc"),
        _rescue_case,
    ],
    ids=["reach", "loop", "nested", "spanning_tree", "rescue"],
)
def test_every_interleaving_agrees_with_the_global_run(case):
    (field, program) = case()
    (translated, _) = translate_program(program, field=field)
    expected = run(program, field).field
    infrastructure = bfs_infrastructure(field)
    for seed in range(50):
        simulation = simulate(field, infrastructure, translated, seed)
        assert simulation.execution.terminated
        assert agrees_with(simulation.execution, expected)
        assert check_termination_soundness(simulation.events) is None
        assert check_tree_locality(simulation.events, infrastructure) is None


def test_other_spanning_trees_work_too():
    field = _cycle()
    program = load_program_file(FIXTURES / "programs" / "loop.smuc")
    (translated, _) = translate_program(program, field=field)
    infrastructure = load_infrastructure(
        field, {"root": "3", "parents": {"2": "3", "1": "3", "0": "1"}}
    )
    simulation = simulate(field, infrastructure, translated, 7)
    assert agrees_with(simulation.execution, run(program, field).field)
    assert check_tree_locality(simulation.events, infrastructure) is None


def test_lifted_fields_drop_freed_labels():
    field = _cycle()
    program = parse_program("x <- i; free(x)")
    simulation = simulate(field, bfs_infrastructure(field), program, 0)
    lifted = lift(simulation.execution, field)
    assert not lifted.has_label("x")
    assert "x" in lifted.released


def test_event_log(tmp_path):
    field = _cycle()
    (translated, _) = translate_program(
        load_program_file(FIXTURES / "programs" / "loop.smuc"), field=field
    )
    simulation = simulate(field, bfs_infrastructure(field), translated, 3)
    simulation.write_events(tmp_path / "events.jsonl")
    lines = (tmp_path / "events.jsonl").read_text(encoding="utf-8").splitlines()
    events = [json.loads(line) for line in lines]
    assert len(events) == len(simulation.events)
    rules = {event["rule"] for event in events if event["event"] == "fire"}
    assert {"D-Step", "D-AgreeT", "D-AgreeN1", "D-UntilT", "D-IfT"} <= rules
    assert any(event["event"] == "deliver" for event in events)


def test_unsound_exits_are_detected():
    guard = {"event": "fire", "label": "g", "iteration": 0}
    events = [
        {**guard, "node": "0", "rule": "D-AgreeN1", "local": True},
        {**guard, "node": "1", "rule": "D-AgreeT", "local": False},
        {**guard, "node": "0", "rule": "D-UntilT"},
    ]
    assert "false at ['1']" in check_termination_soundness(events)


def test_stray_messages_are_detected():
    infrastructure = bfs_infrastructure(_cycle())
    events = [{"event": "send", "kind": "agree", "sender": "3", "to": ["0"]}]
    problem = check_tree_locality(events, infrastructure)
    assert problem == "agree message from 3 sent to ['0']"
