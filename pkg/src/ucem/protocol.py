"""Base-station / node message exchange for distributing the solution.

The base station never sends per-node values. At start-up it broadcasts the
gain ladder with the base power and beta; after solving it broadcasts the
group counts and the multiplier. Every node then classifies itself from its
own gain, sets its power and solves its local quadratic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError
from .grouping import GroupingPlan, group_index
from .model import Scenario
from .solver import AT_CEILING, Solution, stationary_prob


@dataclass(frozen=True)
class SetupMessage:
    thresholds: tuple[float, ...]
    base_power: float
    beta: float

    def to_json(self) -> str:
        # json emits repr() floats, which round-trip exactly
        return json.dumps({"thresholds": list(self.thresholds), "P": self.base_power,
                           "beta": self.beta})

    @classmethod
    def from_json(cls, text: str) -> "SetupMessage":
        d = json.loads(text)
        return cls(tuple(float(t) for t in d["thresholds"]), float(d["P"]), float(d["beta"]))

    @property
    def payload_size(self) -> int:
        return len(self.thresholds) + 2


@dataclass(frozen=True)
class AssignMessage:
    group_counts: tuple[int, ...]
    lam: float
    at_ceiling: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise DomainError("multiplier must be >= 0")
        if any(c < 0 for c in self.group_counts):
            raise DomainError("group counts must be >= 0")

    def to_json(self) -> str:
        return json.dumps({"counts": list(self.group_counts), "lambda": self.lam,
                           "at_ceiling": self.at_ceiling})

    @classmethod
    def from_json(cls, text: str) -> "AssignMessage":
        d = json.loads(text)
        return cls(tuple(int(c) for c in d["counts"]), float(d["lambda"]), bool(d["at_ceiling"]))

    @property
    def payload_size(self) -> int:
        return len(self.group_counts) + 2


@dataclass(frozen=True)
class NodeState:
    """What a node derives locally. ``needs_setup`` flags a gain off the ladder."""

    gain: float
    group: int | None = None
    tx_power: float | None = None
    q: float | None = None
    needs_setup: bool = False


def bs_emit(plan: GroupingPlan, solution: Solution, base_power: float,
            beta: float) -> tuple[SetupMessage, AssignMessage]:
    if not solution.solved:
        raise DomainError(f"cannot broadcast an unsolved solution (status {solution.status})")
    setup = SetupMessage(tuple(float(t) for t in plan.thresholds), float(base_power), float(beta))
    assign = AssignMessage(tuple(int(c) for c in plan.group_sizes), float(solution.lam),
                           solution.status == AT_CEILING)
    return setup, assign


def node_apply(setup: SetupMessage, assign: AssignMessage, own_gain: float) -> NodeState:
    if len(assign.group_counts) != len(setup.thresholds) - 1:
        raise ConsistencyError("group counts do not match the threshold ladder")
    try:
        i = group_index(own_gain, setup.thresholds)
    except ConsistencyError:
        return NodeState(own_gain, needs_setup=True)
    power = setup.base_power * setup.thresholds[i - 1] / own_gain
    suffix = sum(assign.group_counts[i - 1:])
    if suffix < 1:
        raise ConsistencyError(f"group {i} is empty in the broadcast counts")
    if assign.at_ceiling:
        q = 1.0 / suffix
    else:
        q = stationary_prob(power, suffix, assign.lam)
    return NodeState(own_gain, i, power, float(q))


def enact(scenario: Scenario, plan: GroupingPlan, solution: Solution) -> np.ndarray:
    """Run the exchange over every node and collect the locally chosen q."""
    r = scenario.radio
    setup, assign = bs_emit(plan, solution, r.base_power, r.sinr_threshold)
    # round-trip through the wire format, as a node would receive it
    setup = SetupMessage.from_json(setup.to_json())
    assign = AssignMessage.from_json(assign.to_json())
    states = [node_apply(setup, assign, g) for g in scenario.gains]
    if any(s.needs_setup for s in states):
        raise ConsistencyError("some nodes fell outside the broadcast ladder")
    return np.array([s.q for s in states])
