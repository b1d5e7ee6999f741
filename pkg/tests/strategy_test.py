import json
from itertools import islice
from pathlib import Path

from smuc.errors import MaxStepsExceededError
from smuc.evaluation import Evaluator
from smuc.field import load_field_file, valuation_text
from smuc.formula import parse_formula
from smuc.strategy import (
    EveryNodeStrategy,
    ExplicitStrategy,
    FailureSpec,
    RandomStrategy,
    RoundRobinSkipStrategy,
    Rollback,
    check_robustness,
    run_failures,
    run_strategy,
    strategy_from_json,
)

import pytest

FIXTURES = Path(__file__).parent.parent / "fixtures"
NODES = ("0", "1", "2", "3")


def _load_json(name):
    with (FIXTURES / "strategies" / name).open() as json_file:
        return json.load(json_file)


def _step(formula_text, field_name="cycle.json"):
    field = load_field_file(FIXTURES / field_name)
    return Evaluator(field).fixpoint_step(parse_formula(formula_text))


def _texts(trace):
    return [valuation_text(row, NODES) for row in trace]


def test_odd_even_reachability():
    strategy = strategy_from_json(_load_json("odd_even.json"))
    rows = _texts(run_strategy(_step("mu z. or(i, <out:or> z)"), strategy, 50))
    assert rows[3] == "0:true 1:true 2:false 3:false"
    assert rows[4] == "0:true 1:true 2:true 3:true"
    assert len(rows) == 5


def test_odd_even_minimum():
    strategy = strategy_from_json(_load_json("odd_even.json"))
    assert _texts(run_strategy(_step("mu z. min(ids, <out:min> z)"), strategy, 50)) == [
        "0:inf 1:inf 2:inf 3:inf",
        "0:0 1:1 2:2 3:3",
        "0:0 1:1 2:1 3:1",
        "0:0 1:0 2:1 3:1",
        "0:0 1:0 2:0 3:0",
    ]


def test_odd_even_gathering():
    strategy = strategy_from_json(_load_json("odd_even.json"))
    rows = _texts(run_strategy(_step("mu z. cup(known, <out:cup> z)"), strategy, 50))
    assert rows[2] == "0:{0, 2} 1:{1} 2:{1, 2, 3} 3:{1, 3}"
    assert rows[4] == "0:{0, 1, 2, 3} 1:{0, 1, 2} 2:{0, 1, 2, 3} 3:{0, 1, 2, 3}"
    assert rows[5] == "0:{0, 1, 2, 3} 1:{0, 1, 2, 3} 2:{0, 1, 2, 3} 3:{0, 1, 2, 3}"
    assert len(rows) == 6


def test_every_strategy_reaches_the_synchronous_fixpoint():
    step = _step("mu z. min1(i, <out alpha:min1> z)", "spanning_tree.json")
    fixpoint = step.fixpoint()
    for strategy in (
        EveryNodeStrategy(),
        RoundRobinSkipStrategy(),
        RandomStrategy(11, 0.3),
        ExplicitStrategy([["0", "1"], ["2"], ["3"]]),
    ):
        assert run_strategy(step, strategy, 200)[-1] == fixpoint
    assert run_strategy(step, EveryNodeStrategy(), 200) == step.iterate()


def test_random_strategies_are_fair():
    strategy = RandomStrategy(3, 0.1, window=4)
    patterns = list(islice(strategy.patterns(NODES), 40))
    for start in range(len(patterns) - 3):
        covered = set().union(*patterns[start : start + 4])
        assert covered == set(NODES)


def test_round_robin_skips_one_node():
    patterns = list(islice(RoundRobinSkipStrategy().patterns(NODES), 4))
    assert [sorted(set(NODES) - set(pattern)) for pattern in patterns] == [
        ["0"],
        ["1"],
        ["2"],
        ["3"],
    ]


def test_strategy_documents():
    assert strategy_from_json("all") == EveryNodeStrategy()
    document = {"kind": "random", "seed": 2, "window": 3}
    assert strategy_from_json(document) == RandomStrategy(2, 0.5, window=3)
    with pytest.raises(ValueError):
        strategy_from_json({"kind": "sometimes"})
    with pytest.raises(ValueError):
        ExplicitStrategy([])


def test_uncovered_nodes_are_reported():
    assert ExplicitStrategy([["0"], ["1"]]).uncovered(NODES) == {"2", "3"}


def test_step_budget():
    with pytest.raises(MaxStepsExceededError):
        run_strategy(_step("mu z. cup(known, <out:cup> z)"), RoundRobinSkipStrategy(), 2)


def test_rollback_is_recovered_from():
    spec = FailureSpec.from_json(_load_json("rollback.json"))
    assert spec.events == {(5, "1"): Rollback(0)}
    assert FailureSpec.from_json(spec.to_json()) == spec
    strategy = strategy_from_json(_load_json("odd_even.json"))
    rows = _texts(run_failures(_step("mu z. min(ids, <out:min> z)"), strategy, spec, 50))
    assert rows[4] == "0:0 1:0 2:0 3:0"
    assert rows[5] == "0:0 1:inf 2:0 3:0"
    # values recomputed from the rolled-back node go down before recovering
    assert rows[6] == "0:0 1:inf 2:0 3:3"
    assert rows[7] == "0:0 1:0 2:2 3:3"
    assert rows[-1] == "0:0 1:0 2:0 3:0"
    assert len(rows) == 9


def test_rollbacks_must_happen_before_the_safe_step():
    with pytest.raises(ValueError):
        FailureSpec(2, {(3, "0"): Rollback(1)})
    with pytest.raises(ValueError):
        FailureSpec(5, {(3, "0"): Rollback(3)})
    with pytest.raises(ValueError):
        FailureSpec(5, {(1, "0"): "explode"})


ROBUSTNESS_INSTANCES = [
    ("cycle.json", "mu z. or(i, <out:or> z)"),
    ("cycle.json", "mu z. or(i, <in:or> z)"),
    ("cycle.json", "mu z. min(ids, <out:min> z)"),
    ("cycle.json", "mu z. min(ids, <in:min> z)"),
    ("cycle.json", "mu z. cup(known, <out:cup> z)"),
    ("cycle.json", "mu z. cup(known, <in:cup> z)"),
    ("weighted.json", "mu z. min(i, <out w:min> z)"),
    ("weighted.json", "mu z. join(goals, <out wpairs:join> z)"),
    ("weighted.json", "mu z. join(routes, <out wpaths:join> z)"),
    ("spanning_tree.json", "mu z. min1(i, <out alpha:min1> z)"),
]


@pytest.mark.parametrize("field_name,formula_text", ROBUSTNESS_INSTANCES)
def test_robustness(field_name, formula_text):
    report = check_robustness(_step(formula_text, field_name), 100, 0)
    assert report.ok, report.to_json()["counterexamples"]
    assert report.strategy_agreements == 100
    assert report.failure_agreements == 100


def test_failures_can_push_values_down():
    reports = [
        check_robustness(_step(formula_text, field_name), 100, 0)
        for (field_name, formula_text) in ROBUSTNESS_INSTANCES
    ]
    # rollbacks break the chain property that fair strategies keep
    assert any(report.decreasing_witness is not None for report in reports)


def test_robustness_with_fixed_failures():
    spec = FailureSpec.from_json(_load_json("rollback.json"))
    step = _step("mu z. cup(known, <out:cup> z)")
    report = check_robustness(step, 20, 1, failures=spec)
    assert report.ok
    assert report.failure_agreements == 20
