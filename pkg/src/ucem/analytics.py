"""Closed-form throughput, log-utility and energy under perfect capture.

A packet from group i succeeds iff nobody else in groups 1..i transmits in
the same slot. With q the per-node transmission probabilities this gives

    S_ij = q_ij * prod_{(l,k) != (i,j), l <= i} (1 - q_lk)

and the proportional-fair utility U' = sum log S_ij separates into per-node
terms phi(q_ij, S_i) = log q + (S_i - 1) log(1 - q), where S_i counts the
nodes in groups i..M. Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError
from .grouping import GroupingPlan
from .model import RadioParams


@dataclass(frozen=True)
class RateVector:
    q: np.ndarray
    S: np.ndarray
    x: np.ndarray


@dataclass(frozen=True)
class UtilityReport:
    u_prime: float
    u: float
    phi: np.ndarray


def _check_q(q, plan: GroupingPlan | None = None) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if np.any(np.isnan(q)) or np.any(q < 0) or np.any(q > 1):
        raise DomainError("transmission probabilities must lie in [0, 1]")
    if plan is not None and q.shape != (plan.n_nodes,):
        raise ConsistencyError(f"q has shape {q.shape}, plan has {plan.n_nodes} nodes")
    return q


def per_node_throughput(q, plan: GroupingPlan) -> np.ndarray:
    """Per-slot success probability of every node."""
    q = _check_q(q, plan)
    S = np.empty_like(q)
    silent_before = 1.0  # probability that all of groups 1..i-1 stay silent
    for i in range(1, plan.n_groups + 1):
        members = np.flatnonzero(plan.group_of == i)
        if members.size == 0:
            continue
        idle = 1.0 - q[members]
        # product over the group excluding self, without dividing by (1 - q)
        left = np.concatenate(([1.0], np.cumprod(idle)[:-1]))
        right = np.concatenate((np.cumprod(idle[::-1])[:-1][::-1], [1.0]))
        S[members] = q[members] * silent_before * left * right
        silent_before *= float(np.prod(idle))
    return S


def phi(q, suffix):
    """Per-node utility term log q + (S - 1) log(1 - q).

    Returns -inf at q = 0, and at q = 1 whenever S > 1.
    """
    q_arr = np.asarray(q, dtype=float)
    s_arr = np.asarray(suffix, dtype=float)
    if np.any(np.isnan(q_arr)) or np.any(q_arr < 0) or np.any(q_arr > 1):
        raise DomainError("q must lie in [0, 1]")
    if np.any(s_arr < 1):
        raise DomainError("suffix count must be >= 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(s_arr > 1, (s_arr - 1) * np.log1p(-q_arr), 0.0)
        out = np.log(q_arr) + tail
    return float(out) if out.ndim == 0 else out


def utility_prime(q, plan: GroupingPlan, radio: RadioParams | None = None) -> UtilityReport:
    """U' as the sum of per-node phi terms, plus the rate utility U."""
    q = _check_q(q, plan)
    terms = phi(q, plan.node_suffix)
    terms = np.atleast_1d(terms)
    u_prime = float(terms.sum())
    radio = radio or RadioParams()
    u = u_prime + plan.n_nodes * math.log(radio.packet_bits / radio.slot_duration)
    return UtilityReport(u_prime, u, terms)


def utility_from_throughput(q, plan: GroupingPlan) -> float:
    """U' computed directly as sum(log S); independent of the phi route."""
    with np.errstate(divide="ignore"):
        return float(np.log(per_node_throughput(q, plan)).sum())


def effective_rates(S, packet_bits: float, slot_duration: float) -> np.ndarray:
    """Effective rate in bit/s, L * S / T."""
    if not slot_duration > 0:
        raise DomainError("slot duration must be > 0")
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise DomainError("throughput must be nonnegative")
    return packet_bits * S / slot_duration


def convert_utility(u_c: float, n: int, packet_bits: float, slot_duration: float) -> float:
    """Rate utility U to the throughput utility U' (drops N log(L/T))."""
    if not slot_duration > 0:
        raise DomainError("slot duration must be > 0")
    return u_c - n * math.log(packet_bits / slot_duration)


def rate_vector(q, plan: GroupingPlan, radio: RadioParams) -> RateVector:
    q = _check_q(q, plan)
    S = per_node_throughput(q, plan)
    return RateVector(q, S, effective_rates(S, radio.packet_bits, radio.slot_duration))


def utility_ceiling(plan: GroupingPlan) -> tuple[np.ndarray, float]:
    """Utility-maximising probabilities q* = 1/S_i and the resulting U'_max."""
    q_star = 1.0 / plan.node_suffix.astype(float)
    return q_star, float(np.sum(phi(q_star, plan.node_suffix)))


def average_power(q, tx_powers) -> float:
    """Total average transmit power sum P_ij q_ij in watts."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(tx_powers, dtype=float)
    if q.shape != p.shape:
        raise ConsistencyError("q and tx_powers differ in shape")
    return float(np.dot(p, q))


def energy_per_slot(q, tx_powers, slot_duration: float) -> float:
    """Expected joules spent by the whole network per slot."""
    return average_power(q, tx_powers) * slot_duration
