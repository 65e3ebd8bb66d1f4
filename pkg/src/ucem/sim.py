"""Monte Carlo slot simulation and battery-depletion lifetimes.

Throughput runs draw every node's transmit decision slot by slot and hand the
set of transmitters to a reception model. Random numbers come in fixed-size
slot blocks, each with its own counter-based Philox stream keyed by
(seed, block index), so any split of blocks across workers reproduces the
serial result exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import nbinom

from .errors import DomainError
from .grouping import GroupingPlan, plan_from_groups
from .model import Scenario

PERFECT_CAPTURE = "perfect_capture"
SINR_THRESHOLD = "sinr_threshold"

BLOCK_SLOTS = 4096
# received powers within a group are equal in exact arithmetic but can differ
# in the last ulp after P*G_i/G_ij*G_ij; ties and threshold crossings are
# judged with this relative tolerance
POWER_RTOL = 1e-9


@dataclass(frozen=True)
class ReceptionModel:
    kind: str = PERFECT_CAPTURE
    beta: float = 10 ** 0.6

    def __post_init__(self):
        if self.kind not in (PERFECT_CAPTURE, SINR_THRESHOLD):
            raise DomainError(f"unknown reception model {self.kind!r}")
        if self.kind == SINR_THRESHOLD and not self.beta > 1:
            raise DomainError("SINR threshold must be > 1")

    @classmethod
    def capture(cls) -> "ReceptionModel":
        return cls(PERFECT_CAPTURE)

    @classmethod
    def sinr(cls, beta: float) -> "ReceptionModel":
        return cls(SINR_THRESHOLD, beta)


def slot_outcome(transmitters, model: ReceptionModel):
    """Which node, if any, is decoded in a slot.

    ``transmitters`` is an iterable of ``(node, received_power)``. Perfect
    capture decodes the unique strongest packet (equal strongest packets all
    fail). The SINR model decodes a node whose power exceeds beta times the
    summed power of the others; noise is ignored and the inequality is
    strict, so a ratio of exactly beta fails.
    """
    tx = list(transmitters)
    if not tx:
        return None
    if any(not rp > 0 for _, rp in tx):
        raise DomainError("received powers must be > 0")
    node, top = max(tx, key=lambda t: t[1])
    if len(tx) == 1:
        return node
    rest = [rp for n, rp in tx if n != node]
    if model.kind == PERFECT_CAPTURE:
        if max(rest) >= top * (1 - POWER_RTOL):
            return None
        return node
    if top > model.beta * sum(rest) * (1 + POWER_RTOL):
        return node
    return None


def _block_winners(tx: np.ndarray, rp: np.ndarray, model: ReceptionModel) -> np.ndarray:
    """Vectorised slot_outcome over a (slots, nodes) transmit matrix; -1 = none."""
    masked = np.where(tx, rp, 0.0)
    top = masked.max(axis=1)
    winner = masked.argmax(axis=1)
    busy = tx.any(axis=1)
    if model.kind == PERFECT_CAPTURE:
        near_top = (masked >= (top * (1 - POWER_RTOL))[:, None]) & tx
        ok = busy & (near_top.sum(axis=1) == 1)
    else:
        interference = masked.sum(axis=1) - top
        ok = busy & ((interference == 0) | (top > model.beta * interference * (1 + POWER_RTOL)))
    return np.where(ok, winner, -1)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _run_block(block, slots, q, rp, models, seed):
    n = q.size
    start = block * BLOCK_SLOTS
    size = min(BLOCK_SLOTS, slots - start)
    tx = _block_rng(seed, block).random((size, n)) < q
    counts = []
    for model in models:
        w = _block_winners(tx, rp, model)
        counts.append(np.bincount(w[w >= 0], minlength=n))
    return np.array(counts), tx.sum(axis=0)


@dataclass(frozen=True)
class SimReport:
    slots: int
    successes: np.ndarray
    seed: int
    model: str = PERFECT_CAPTURE
    transmissions: np.ndarray | None = None

    @property
    def empirical_S(self) -> np.ndarray:
        return self.successes / self.slots

    @property
    def std_err(self) -> np.ndarray:
        p = self.empirical_S
        return np.sqrt(p * (1 - p) / self.slots)

    def merge(self, other: "SimReport") -> "SimReport":
        """Pool two runs over disjoint slots of the same scenario and model."""
        if other.model != self.model or other.successes.shape != self.successes.shape:
            raise DomainError("can only merge reports of the same model and size")
        tx = None
        if self.transmissions is not None and other.transmissions is not None:
            tx = self.transmissions + other.transmissions
        return SimReport(self.slots + other.slots, self.successes + other.successes,
                         self.seed, self.model, tx)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "slots": self.slots,
            "seed": self.seed,
            "empirical_S": self.empirical_S.tolist(),
            "std_err": self.std_err.tolist(),
        }

    def rows(self, node_ids=None):
        ids = range(len(self.successes)) if node_ids is None else node_ids
        for nid, s, e in zip(ids, self.empirical_S, self.std_err):
            yield {"id": nid, "model": self.model, "empirical_S": s, "std_err": e}


def simulate_models(scenario: Scenario, plan: GroupingPlan, q, models, slots: int,
                    seed: int = 0, workers: int = 1) -> list[SimReport]:
    """Run several reception models on one shared set of transmit draws."""
    if slots < 1:
        raise DomainError("slots must be >= 1")
    q = np.asarray(q, dtype=float)
    if q.shape != (scenario.n,):
        raise DomainError("q does not match the scenario size")
    if plan.tx_power is None:
        raise DomainError("plan has no transmit powers")
    rp = plan.tx_power * scenario.gains
    models = list(models)
    n_blocks = -(-slots // BLOCK_SLOTS)

    def job(b):
        return _run_block(b, slots, q, rp, models, seed)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, range(n_blocks)))
    else:
        parts = [job(b) for b in range(n_blocks)]
    succ = sum(p[0] for p in parts)
    txs = sum(p[1] for p in parts)
    return [SimReport(slots, succ[k], seed, m.kind, txs) for k, m in enumerate(models)]


def estimate_throughput(scenario: Scenario, plan: GroupingPlan, q, model: ReceptionModel,
                        slots: int, seed: int = 0, workers: int = 1) -> SimReport:
    return simulate_models(scenario, plan, q, [model], slots, seed, workers)[0]


@dataclass(frozen=True)
class LifetimeReport:
    death_slot: np.ndarray
    analytic_death_slot: np.ndarray
    network_lifetime_slots: float
    network_lifetime_seconds: float
    death_fraction: float

    @property
    def alive_at_end(self) -> np.ndarray:
        return ~np.isfinite(self.death_slot)

    def to_dict(self) -> dict:
        return {
            "death_fraction": self.death_fraction,
            "network_lifetime_slots": self.network_lifetime_slots,
            "network_lifetime_seconds": self.network_lifetime_seconds,
            "death_slot": [None if not math.isfinite(v) else float(v) for v in self.death_slot],
        }

    def rows(self, node_ids=None):
        ids = range(len(self.death_slot)) if node_ids is None else node_ids
        for nid, d, a in zip(ids, self.death_slot, self.analytic_death_slot):
            yield {"id": nid, "death_slot": d, "analytic_death_slot": a}


def packet_budget(battery: float, tx_power, slot_duration: float) -> np.ndarray:
    """Whole packets each node can afford, floor(E_B / (P_ij T))."""
    ratio = battery / (np.asarray(tx_power, dtype=float) * slot_duration)
    # guard against 1000/(0.2*0.005) landing a hair under 1e6
    return np.floor(ratio * (1 + 1e-12)).astype(np.int64)


def analytic_death_slots(battery: float, tx_power, q, slot_duration: float) -> np.ndarray:
    """Mean-field death slot E_B / (P_ij q_ij T); infinite for silent nodes."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        return battery / (np.asarray(tx_power, dtype=float) * q * slot_duration)


def _network_lifetime(death: np.ndarray, fraction: float) -> float:
    k = math.ceil(fraction * death.size - 1e-9)
    return float(np.sort(death)[k - 1])


def simulate_lifetime(scenario: Scenario, plan: GroupingPlan, q, death_fraction: float = 0.7,
                      seed: int = 0, reoptimize: bool = False,
                      u_target: float | None = None) -> LifetimeReport:
    """Battery depletion under a fixed transmission policy.

    Each transmission costs P_ij * T. A node dies on the slot of its last
    affordable packet. With a static policy the death slot of a node is K plus
    a negative-binomial count of idle slots; it is drawn by inverse CDF from one
    uniform per node, so for a fixed seed every death slot is monotone in q.

    ``reoptimize=True`` re-solves the survivors after every death (see
    ``_lifetime_reoptimized``); it needs ``u_target`` in U' units.
    """
    if not 0 < death_fraction <= 1:
        raise DomainError("death_fraction must lie in (0, 1]")
    q = np.asarray(q, dtype=float)
    radio = scenario.radio
    power = plan.tx_power
    budget = packet_budget(radio.battery, power, radio.slot_duration)
    analytic = analytic_death_slots(radio.battery, power, q, radio.slot_duration)
    if reoptimize:
        if u_target is None:
            raise DomainError("reoptimize needs a utility target")
        death = _lifetime_reoptimized(plan, q, budget, death_fraction, seed, u_target)
    else:
        u = np.random.default_rng(seed).random(q.size)
        death = np.full(q.size, np.inf)
        live = q > 0
        death[live] = budget[live] + nbinom.ppf(u[live], np.maximum(budget[live], 1), q[live])
        death[budget == 0] = 0.0
    life = _network_lifetime(death, death_fraction)
    return LifetimeReport(death, analytic, life, life * radio.slot_duration, death_fraction)


def _truncated_binomial(rng, trials: int, p: float, below: int) -> int:
    while True:
        k = rng.binomial(trials, p)
        if k < below:
            return int(k)


def _lifetime_reoptimized(plan, q, budget, death_fraction, seed, u_target):
    """Event-driven depletion that re-solves the survivors after each death.

    Group thresholds and powers stay fixed; only group counts change. The
    survivors' floor is u_target scaled by the fraction still alive, and if
    that is out of reach they fall back to the utility-maximising point.
    Between deaths, survivors' transmission counts are binomial conditioned on
    not exhausting their battery, which keeps the process exact.
    """
    from .solver import solve_ucem

    rng = np.random.default_rng(seed)
    n = q.size
    remaining = budget.astype(np.int64).copy()
    death = np.full(n, np.inf)
    death[remaining == 0] = 0.0
    alive = remaining > 0
    cur_q = q.copy()
    t = 0.0
    need = math.ceil(death_fraction * n - 1e-9)
    while np.count_nonzero(np.isfinite(death)) < need:
        idx = np.flatnonzero(alive & (cur_q > 0))
        if idx.size == 0:
            break
        offset = remaining[idx] + rng.negative_binomial(remaining[idx], cur_q[idx])
        step = int(offset.min())
        dying = idx[offset == step]
        for j in idx:
            if j in dying:
                continue
            remaining[j] -= _truncated_binomial(rng, step, cur_q[j], remaining[j])
        t += step
        death[dying] = t
        alive[dying] = False
        remaining[dying] = 0
        survivors = np.flatnonzero(alive)
        if survivors.size == 0:
            break
        sub = plan_from_groups(plan.group_of[survivors], plan.tx_power[survivors], plan.thresholds)
        sol = solve_ucem(sub, sub.tx_power, u_target * survivors.size / n)
        cur_q = np.zeros(n)
        cur_q[survivors] = sol.q
    return death
