"""
Asynchronous fixpoint iteration.

A *pattern* is the set of nodes updated in one round,
and a *strategy* is a sequence of patterns.
Under a fair strategy, where every node keeps being updated, the asynchronous iteration
reaches the same fixpoint as the synchronous one.
The same holds for *failure sequences*, where nodes outside a pattern may also roll back
to an earlier value, as long as failures stop after some step.
"""
import logging
from abc import abstractmethod
from itertools import count
from random import Random
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from attr import attrib, attrs
from attr.validators import in_, instance_of

from immutablecollections import ImmutableDict, ImmutableSet, immutabledict, immutableset
from vistautils.range import Range

from smuc.errors import MaxStepsExceededError
from smuc.evaluation import FixpointStep
from smuc.field import NodeValuation
from smuc.values import Value

from typing_extensions import Protocol

Pattern = ImmutableSet[str]


def apply_pattern(
    step: FixpointStep, pattern: Pattern, valuation: Mapping[str, Value]
) -> NodeValuation:
    """
    Update the nodes of *pattern* against the whole of *valuation*.

    Other nodes keep their value.
    """
    if not pattern:
        return immutabledict(valuation)
    updated = step(valuation)
    return immutabledict(
        (node, updated[node] if node in pattern else valuation[node])
        for node in step.nodes
    )


class Strategy(Protocol):
    """
    An infinite sequence of patterns.

    Every node of the field appears in each *window* consecutive patterns.
    """

    kind: str

    @property
    @abstractmethod
    def window(self) -> int:
        pass

    @abstractmethod
    def patterns(self, nodes: Sequence[str]) -> Iterator[Pattern]:
        pass

    def uncovered(self, nodes: Sequence[str]) -> ImmutableSet[str]:
        """
        Nodes this strategy never activates.
        """
        return immutableset()


@attrs(frozen=True, slots=True)
class EveryNodeStrategy(Strategy):
    """
    Every node in every round: the synchronous iteration.
    """

    kind = "all"

    @property
    def window(self) -> int:
        return 1

    def patterns(self, nodes: Sequence[str]) -> Iterator[Pattern]:
        everything = immutableset(nodes)
        while True:
            yield everything


@attrs(frozen=True, slots=True)
class RoundRobinSkipStrategy(Strategy):
    """
    Round k leaves out the k-th node (cyclically); all other nodes are updated.
    """

    kind = "round-robin-skip"

    @property
    def window(self) -> int:
        return 2

    def patterns(self, nodes: Sequence[str]) -> Iterator[Pattern]:
        if len(nodes) < 2:
            yield from EveryNodeStrategy().patterns(nodes)
            return
        for round_index in count():
            skipped = nodes[round_index % len(nodes)]
            yield immutableset(node for node in nodes if node != skipped)


@attrs(frozen=True, slots=True)
class RandomStrategy(Strategy):
    """
    Each node is active with probability *p_active*.

    A node left out of ``window - 1`` consecutive rounds is forced into the next one.
    """

    seed: int = attrib(validator=instance_of(int))
    p_active: float = attrib(validator=instance_of(float), default=0.5)
    _window: int = attrib(validator=in_(Range.at_least(1)), default=4, kw_only=True)
    kind = "random"

    @property
    def window(self) -> int:
        return self._window

    def patterns(self, nodes: Sequence[str]) -> Iterator[Pattern]:
        rng = Random(self.seed)
        idle = {node: 0 for node in nodes}
        while True:
            pattern = []
            for node in nodes:
                if idle[node] >= self._window - 1 or rng.random() < self.p_active:
                    pattern.append(node)
                    idle[node] = 0
                else:
                    idle[node] += 1
            yield immutableset(pattern)


@attrs(frozen=True, slots=True)
class ExplicitStrategy(Strategy):
    """
    A finite list of patterns, repeated forever.
    """

    rounds: Tuple[Pattern, ...] = attrib(
        converter=lambda rounds: tuple(immutableset(pattern) for pattern in rounds)
    )
    kind = "explicit"

    def __attrs_post_init__(self) -> None:
        if not self.rounds:
            raise ValueError("An explicit strategy needs at least one pattern")

    @property
    def window(self) -> int:
        return len(self.rounds)

    def patterns(self, nodes: Sequence[str]) -> Iterator[Pattern]:
        unknown = [
            node for pattern in self.rounds for node in pattern if node not in nodes
        ]
        if unknown:
            raise ValueError(
                f"Strategy mentions nodes {unknown} which are not in the field"
            )
        for round_index in count():
            yield self.rounds[round_index % len(self.rounds)]

    def uncovered(self, nodes: Sequence[str]) -> ImmutableSet[str]:
        return immutableset(
            node for node in nodes if not any(node in pattern for pattern in self.rounds)
        )


def strategy_from_json(doc: Any) -> Strategy:
    """
    ``"all"``, ``"round-robin-skip"``, ``{"kind": "random", "seed": 3, "p_active": 0.5}``
    or ``{"kind": "explicit", "patterns": [["0", "1"], ["0"]]}``.
    """
    if isinstance(doc, str):
        doc = {"kind": doc}
    kind = doc.get("kind")
    if kind == "all":
        return EveryNodeStrategy()
    if kind == "round-robin-skip":
        return RoundRobinSkipStrategy()
    if kind == "random":
        return RandomStrategy(
            int(doc.get("seed", 0)),
            float(doc.get("p_active", 0.5)),
            window=int(doc.get("window", 4)),
        )
    if kind == "explicit":
        return ExplicitStrategy(
            [[str(node) for node in pattern] for pattern in doc["patterns"]]
        )
    raise ValueError(f"Unknown strategy kind {kind!r}")


UPDATE = "update"
HOLD = "hold"


@attrs(frozen=True, slots=True)
class Rollback:
    """
    Restore the value the node had after round *to_step* (0 is the initial value).
    """

    to_step: int = attrib(validator=in_(Range.at_least(0)))


FailureAction = Union[str, Rollback]


def _check_action(instance, attribute, value: ImmutableDict) -> None:
    for ((round_index, node), action) in value.items():
        if round_index < 1:
            raise ValueError(f"Failure events start at round 1, got round {round_index}")
        if isinstance(action, Rollback):
            if action.to_step >= round_index:
                raise ValueError(
                    f"Rollback of {node} at round {round_index} "
                    f"must target an earlier round, not {action.to_step}"
                )
            if round_index > instance.safe_after:
                raise ValueError(
                    f"Rollback of {node} at round {round_index} is after "
                    f"safe_after={instance.safe_after}"
                )
        elif action not in (UPDATE, HOLD):
            raise ValueError(f"Unknown failure action {action!r}")


@attrs(frozen=True, slots=True)
class FailureSpec:
    """
    Per-round, per-node overrides of a strategy.

    `UPDATE` forces the node to be updated, `HOLD` keeps its value and a `Rollback`
    restores an earlier value of the node.
    Rollbacks happen only up to round *safe_after*.
    Rounds without an event follow the strategy's pattern.
    """

    safe_after: int = attrib(validator=in_(Range.at_least(0)))
    events: ImmutableDict[Tuple[int, str], FailureAction] = attrib(
        converter=immutabledict, factory=immutabledict, validator=_check_action
    )

    def action(self, round_index: int, node: str, pattern: Pattern) -> FailureAction:
        default = UPDATE if node in pattern else HOLD
        return self.events.get((round_index, node), default)

    def has_rollbacks(self) -> bool:
        return any(isinstance(action, Rollback) for action in self.events.values())

    def to_json(self) -> Dict[str, Any]:
        return {
            "safe_after": self.safe_after,
            "events": [
                {
                    "step": round_index,
                    "node": node,
                    **(
                        {"action": "rollback", "to": action.to_step}
                        if isinstance(action, Rollback)
                        else {"action": action}
                    ),
                }
                for ((round_index, node), action) in sorted(self.events.items())
            ],
        }

    @staticmethod
    def from_json(doc: Mapping[str, Any]) -> "FailureSpec":
        events: Dict[Tuple[int, str], FailureAction] = {}
        for event in doc.get("events", ()):
            action: FailureAction = event["action"]
            if action == "rollback":
                action = Rollback(int(event.get("to", 0)))
            events[(int(event["step"]), str(event["node"]))] = action
        return FailureSpec(int(doc.get("safe_after", 0)), events)


NO_FAILURES = FailureSpec(0)


def random_failure_spec(
    nodes: Sequence[str], rng: Random, *, safe_after: int, rate: float = 0.2
) -> FailureSpec:
    """
    Roll back each node with probability *rate* in each of the first *safe_after* rounds,
    to a uniformly chosen earlier round.
    """
    events: Dict[Tuple[int, str], FailureAction] = {}
    for round_index in range(1, safe_after + 1):
        for node in nodes:
            if rng.random() < rate:
                events[(round_index, node)] = Rollback(rng.randrange(round_index))
    return FailureSpec(safe_after, events)


def run_strategy(
    step: FixpointStep, strategy: Strategy, max_steps: int
) -> List[NodeValuation]:
    """
    Iterate *step* under *strategy* from its initial valuation.

    The iteration stops once a whole fairness window leaves the valuation unchanged;
    those trailing unchanged rounds are not part of the returned trace.
    """
    return run_failures(step, strategy, NO_FAILURES, max_steps)


def run_failures(
    step: FixpointStep, strategy: Strategy, spec: FailureSpec, max_steps: int
) -> List[NodeValuation]:
    """
    Like `run_strategy`, but nodes may also fail and roll back as *spec* says.

    Stabilization is only looked for after round ``spec.safe_after``.
    """
    uncovered = strategy.uncovered(step.nodes)
    if uncovered:
        logging.warning(
            "Strategy %s never updates nodes %s; the run cannot reach the fixpoint there",
            strategy.kind,
            list(uncovered),
        )
    trace: List[NodeValuation] = [step.initial()]
    unchanged = 0
    patterns = strategy.patterns(step.nodes)
    for round_index in range(1, max_steps + 1):
        pattern = next(patterns)
        current = trace[-1]
        actions = {node: spec.action(round_index, node, pattern) for node in step.nodes}
        updated = current
        if any(action == UPDATE for action in actions.values()):
            updated = step(current)
        following = {}
        for node in step.nodes:
            action = actions[node]
            if action == UPDATE:
                following[node] = updated[node]
            elif action == HOLD:
                following[node] = current[node]
            else:
                following[node] = trace[action.to_step][node]  # type: ignore
        row = immutabledict((node, following[node]) for node in step.nodes)
        trace.append(row)
        unchanged = unchanged + 1 if row == current else 0
        if round_index > spec.safe_after and unchanged >= strategy.window:
            logging.debug(
                "%s strategy stabilized after %s rounds",
                strategy.kind,
                round_index - unchanged,
            )
            return trace[: len(trace) - unchanged]
    raise MaxStepsExceededError(
        f"{strategy.kind} strategy did not stabilize within {max_steps} rounds"
    )


@attrs(frozen=True, slots=True)
class RobustnessReport:
    """
    The outcome of `check_robustness`.

    *decreasing_witness* is a failure trace with a round where some node's value
    went down, as ``(round, node, trace)``.
    """

    trials: int = attrib(validator=instance_of(int))
    strategy_agreements: int = attrib(validator=instance_of(int))
    failure_agreements: int = attrib(validator=instance_of(int))
    counterexamples: Tuple[Tuple[str, Tuple[NodeValuation, ...]], ...] = attrib(
        converter=tuple, factory=tuple
    )
    decreasing_witness: Optional[Tuple[int, str, Tuple[NodeValuation, ...]]] = attrib(
        default=None
    )

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def to_json(self) -> Dict[str, Any]:
        return {
            "trials": self.trials,
            "strategy_agreements": self.strategy_agreements,
            "failure_agreements": self.failure_agreements,
            "counterexamples": [description for (description, _) in self.counterexamples],
            "decreasing_witness": (
                None
                if self.decreasing_witness is None
                else {
                    "step": self.decreasing_witness[0],
                    "node": self.decreasing_witness[1],
                }
            ),
        }


def _decreasing_round(
    step: FixpointStep, trace: Sequence[NodeValuation]
) -> Optional[Tuple[int, str]]:
    for round_index in range(1, len(trace)):
        for node in step.nodes:
            before = trace[round_index - 1][node]
            after = trace[round_index][node]
            if step.greatest:
                (before, after) = (after, before)
            if before != after and step.domain.leq(after, before):
                return (round_index, node)
    return None


def _chain_violation(
    step: FixpointStep, trace: Sequence[NodeValuation], fixpoint: NodeValuation
) -> Optional[str]:
    for round_index in range(1, len(trace)):
        if not step.below(trace[round_index - 1], trace[round_index]):
            return f"round {round_index} is not above round {round_index - 1}"
    for (round_index, row) in enumerate(trace):
        if not step.below(row, fixpoint):
            return f"round {round_index} overshoots the fixpoint"
    return None


def check_robustness(
    step: FixpointStep,
    trials: int,
    seed: int,
    *,
    max_steps: Optional[int] = None,
    failures: Optional[FailureSpec] = None,
    safe_after: int = 5,
) -> RobustnessReport:
    """
    Compare asynchronous runs against the synchronous fixpoint.

    Each trial runs one random fair strategy, and one failure sequence under another
    random fair strategy: *failures* if given, else a random safe failure spec.
    Strategy traces must also be chains bounded by the fixpoint.
    """
    rng = Random(seed)
    fixpoint = step.fixpoint()
    limit = max_steps or step.iteration_cap * 4
    strategy_agreements = 0
    failure_agreements = 0
    counterexamples: List[Tuple[str, Tuple[NodeValuation, ...]]] = []
    witness: Optional[Tuple[int, str, Tuple[NodeValuation, ...]]] = None
    for trial in range(trials):
        strategy = RandomStrategy(rng.randrange(2 ** 31), rng.uniform(0.2, 0.9))
        trace = run_strategy(step, strategy, limit)
        violation = _chain_violation(step, trace, fixpoint)
        if trace[-1] == fixpoint and violation is None:
            strategy_agreements += 1
        else:
            counterexamples.append(
                (
                    f"trial {trial}: random strategy seed {strategy.seed}: "
                    f"{violation or 'stabilized away from the fixpoint'}",
                    tuple(trace),
                )
            )
        failure_spec = failures or random_failure_spec(
            step.nodes, rng, safe_after=safe_after
        )
        failure_strategy = RandomStrategy(rng.randrange(2 ** 31), rng.uniform(0.2, 0.9))
        failure_trace = run_failures(
            step, failure_strategy, failure_spec, limit + safe_after
        )
        if failure_trace[-1] == fixpoint:
            failure_agreements += 1
        else:
            counterexamples.append(
                (
                    f"trial {trial}: failure run with strategy seed "
                    f"{failure_strategy.seed} stabilized away from the fixpoint",
                    tuple(failure_trace),
                )
            )
        if witness is None:
            decreasing = _decreasing_round(step, failure_trace)
            if decreasing is not None:
                witness = (decreasing[0], decreasing[1], tuple(failure_trace))
    report = RobustnessReport(
        trials, strategy_agreements, failure_agreements, counterexamples, witness
    )
    logging.info(
        "Robustness: %s/%s strategy runs and %s/%s failure runs reached the fixpoint",
        strategy_agreements,
        trials,
        failure_agreements,
        trials,
    )
    return report
