"""Capture-oriented node classification and power control.

Nodes are binned by gain into groups whose edges shrink by a factor beta,
then each node boosts its power so that all members of a group arrive at
the base station with the same power. Adjacent groups therefore differ by
exactly beta in received power, which is what lets the stronger packet
capture the channel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConsistencyError, DomainError
from .model import Scenario


@dataclass(frozen=True)
class GroupingPlan:
    """Group structure of a scenario.

    ``group_of`` holds 1-based group labels (group 1 is strongest).
    ``group_sizes[i-1]`` is n_i and ``suffix_counts[i-1]`` is the number of
    nodes in groups i..M. ``tx_power`` is None until powers are assigned.
    """

    thresholds: np.ndarray
    group_of: np.ndarray
    group_sizes: np.ndarray
    suffix_counts: np.ndarray
    tx_power: np.ndarray | None = None

    @property
    def n_groups(self) -> int:
        return len(self.thresholds) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.group_of)

    @property
    def node_suffix(self) -> np.ndarray:
        """Suffix count S_i of each node's own group."""
        return self.suffix_counts[self.group_of - 1]

    def to_dict(self, node_ids=None) -> dict:
        ids = list(range(self.n_nodes)) if node_ids is None else list(node_ids)
        groups = []
        for k, nid in enumerate(ids):
            entry = {"node_id": nid, "group": int(self.group_of[k])}
            if self.tx_power is not None:
                entry["P_ij_watts"] = float(self.tx_power[k])
            groups.append(entry)
        return {"thresholds": [float(t) for t in self.thresholds], "groups": groups}


def compute_thresholds(gains, beta: float) -> np.ndarray:
    """Gain ladder G_1 > G_2 > ... > G_{M+1} with G_1 = max gain.

    Each rung is the previous one divided by ``beta``; the ladder stops at
    the first rung strictly below the smallest gain.
    """
    g = np.asarray(gains, dtype=float)
    if g.size == 0:
        raise DomainError("need at least one gain")
    if np.any(~(g > 0)):
        raise DomainError("gains must be strictly positive")
    if not beta > 1:
        raise DomainError(f"beta must be > 1 (linear), got {beta}")
    g_min = g.min()
    ladder = [float(g.max())]
    while ladder[-1] >= g_min:
        ladder.append(ladder[-1] / beta)
    return np.array(ladder)


def group_index(gain: float, thresholds) -> int:
    """1-based group of a single gain; intervals are closed on top."""
    th = np.asarray(thresholds, dtype=float)
    if not th[-1] < gain <= th[0]:
        raise ConsistencyError(f"gain {gain!r} outside ({th[-1]!r}, {th[0]!r}]")
    return 1 + int(np.count_nonzero(th[1:] >= gain))


def _counts(group_of: np.ndarray, n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    sizes = np.bincount(group_of - 1, minlength=n_groups)[:n_groups]
    suffix = np.cumsum(sizes[::-1])[::-1]
    return sizes, suffix


def assign_groups(scenario: Scenario, thresholds) -> GroupingPlan:
    th = np.asarray(thresholds, dtype=float)
    gains = scenario.gains
    outside = ~((gains > th[-1]) & (gains <= th[0]))
    if np.any(outside):
        bad = [scenario.nodes[k].id for k in np.flatnonzero(outside)]
        raise ConsistencyError(f"nodes {bad} have gains outside the threshold ladder")
    # count of lower rungs G_2..G_{M+1} at or above the gain
    group_of = 1 + (th[1:][None, :] >= gains[:, None]).sum(axis=1)
    sizes, suffix = _counts(group_of, len(th) - 1)
    return GroupingPlan(th, group_of.astype(int), sizes, suffix)


def assign_powers(plan: GroupingPlan, gains, base_power: float) -> np.ndarray:
    """Per-node power P * G_i / G_ij, equalising received power within a group."""
    g = np.asarray(gains, dtype=float)
    if g.shape != plan.group_of.shape:
        raise ConsistencyError("gains do not match plan size")
    return base_power * plan.thresholds[plan.group_of - 1] / g


def build_plan(scenario: Scenario) -> GroupingPlan:
    """Thresholds, groups and powers for a scenario in one call."""
    th = compute_thresholds(scenario.gains, scenario.radio.sinr_threshold)
    plan = assign_groups(scenario, th)
    return replace(plan, tx_power=assign_powers(plan, scenario.gains, scenario.radio.base_power))


def plan_from_groups(group_of, tx_power=None, thresholds=None) -> GroupingPlan:
    """Plan from explicit labels, for hand-built instances in tests and tools."""
    group_of = np.asarray(group_of, dtype=int)
    if group_of.size == 0 or group_of.min() < 1:
        raise DomainError("group labels must be 1-based and nonempty")
    if thresholds is None:
        m = int(group_of.max())
        thresholds = 4.0 ** -np.arange(m + 1, dtype=float)
    else:
        m = len(thresholds) - 1
        if group_of.max() > m:
            raise ConsistencyError("group label beyond the threshold ladder")
    sizes, suffix = _counts(group_of, m)
    tp = None if tx_power is None else np.asarray(tx_power, dtype=float)
    return GroupingPlan(np.asarray(thresholds, dtype=float), group_of, sizes, suffix, tp)
