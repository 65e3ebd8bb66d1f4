"""Scenario construction: radio parameters, node placement and pathgains.

Defaults reproduce the reference parameter table: 50 nodes on a 20 m disk,
P = 200 mW, beta = 6 dB, T = 5 ms, L = 1000 bit, E_B = 1000 J.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError

GAIN_SCALE = 20.0
PATHLOSS_EXPONENT = 4.0


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class RadioParams:
    """Global radio and protocol parameters. ``sinr_threshold`` is linear."""

    base_power: float = 0.2
    sinr_threshold: float = db_to_linear(6.0)
    slot_duration: float = 0.005
    packet_bits: int = 1000
    battery: float = 1000.0

    def __post_init__(self):
        if not self.base_power > 0:
            raise DomainError(f"base_power must be > 0, got {self.base_power}")
        if not self.sinr_threshold > 1:
            raise DomainError(f"sinr_threshold must be > 1 (linear), got {self.sinr_threshold}")
        if not self.slot_duration > 0:
            raise DomainError(f"slot_duration must be > 0, got {self.slot_duration}")
        if self.packet_bits < 1:
            raise DomainError(f"packet_bits must be >= 1, got {self.packet_bits}")
        if not self.battery > 0:
            raise DomainError(f"battery must be > 0, got {self.battery}")

    @classmethod
    def from_db(cls, beta_db: float = 6.0, **kwargs) -> "RadioParams":
        return cls(sinr_threshold=db_to_linear(beta_db), **kwargs)

    @property
    def beta_db(self) -> float:
        return linear_to_db(self.sinr_threshold)

    @property
    def packet_rate(self) -> float:
        """Packets per second, 1/T."""
        return 1.0 / self.slot_duration

    @property
    def packet_energy(self) -> float:
        """Energy of one packet sent at base power, P*T joules."""
        return self.base_power * self.slot_duration


@dataclass(frozen=True)
class Node:
    id: int
    distance: float
    gain: float

    def __post_init__(self):
        if not self.distance > 0:
            raise DomainError(f"node {self.id}: distance must be > 0")
        if not self.gain > 0:
            raise DomainError(f"node {self.id}: gain must be > 0")


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[Node, ...]
    radio: RadioParams = field(default_factory=RadioParams)
    radius: float = 20.0
    seed: int = 1
    d_min: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.nodes:
            raise DomainError("scenario needs at least one node")
        far = [n.id for n in self.nodes if n.distance > self.radius]
        if far:
            raise DomainError(f"nodes {far} lie outside radius {self.radius}")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def gains(self) -> np.ndarray:
        return np.array([n.gain for n in self.nodes], dtype=float)

    @property
    def distances(self) -> np.ndarray:
        return np.array([n.distance for n in self.nodes], dtype=float)

    @property
    def ids(self) -> list[int]:
        return [n.id for n in self.nodes]


def pathgain(d):
    """Distance-only pathgain ``20 * d**-4``. Accepts scalars or arrays."""
    arr = np.asarray(d, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("pathgain needs strictly positive distances")
    g = GAIN_SCALE * arr ** (-PATHLOSS_EXPONENT)
    return float(g) if np.ndim(g) == 0 else g


def generate_disk_scenario(
    n: int = 50,
    radius: float = 20.0,
    d_min: float = 1.0,
    radio: RadioParams | None = None,
    seed: int = 1,
) -> Scenario:
    """Place ``n`` nodes uniformly over a disk around the base station.

    Radii are drawn as ``radius * sqrt(u)`` (area-uniform) and clamped to
    ``[d_min, radius]`` so the d**-4 gain law stays bounded.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0 < d_min < radius:
        raise DomainError(f"need 0 < d_min < radius, got d_min={d_min}, radius={radius}")
    rng = np.random.default_rng(seed)
    d = radius * np.sqrt(rng.random(n))
    d = np.clip(d, d_min, radius)
    g = pathgain(d)
    g = np.atleast_1d(g)
    nodes = tuple(Node(i, float(d[i]), float(g[i])) for i in range(n))
    return Scenario(nodes, radio or RadioParams(), radius, seed, d_min)


def scenario_to_dict(scenario: Scenario, include_gains: bool = False) -> dict:
    r = scenario.radio
    nodes = []
    for node in scenario.nodes:
        entry = {"id": node.id, "d_m": node.distance}
        if include_gains:
            entry["gain"] = node.gain
        nodes.append(entry)
    return {
        "radio": {
            "P_watts": r.base_power,
            "beta_db": r.beta_db,
            "T_seconds": r.slot_duration,
            "L_bits": r.packet_bits,
            "E_B_joules": r.battery,
        },
        "radius_m": scenario.radius,
        "d_min_m": scenario.d_min,
        "seed": scenario.seed,
        "nodes": nodes,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a scenario from its JSON form.

    Gains are recomputed from distance unless a node carries an explicit
    ``gain`` (measured gains take precedence).
    """
    rd = doc.get("radio", {})
    radio = RadioParams.from_db(
        beta_db=rd.get("beta_db", 6.0),
        base_power=rd.get("P_watts", 0.2),
        slot_duration=rd.get("T_seconds", 0.005),
        packet_bits=int(rd.get("L_bits", 1000)),
        battery=rd.get("E_B_joules", 1000.0),
    )
    nodes = []
    for entry in doc["nodes"]:
        d = float(entry["d_m"])
        g = float(entry["gain"]) if "gain" in entry else pathgain(d)
        nodes.append(Node(int(entry["id"]), d, g))
    return Scenario(
        tuple(nodes),
        radio,
        radius=float(doc.get("radius_m", 20.0)),
        seed=int(doc.get("seed", 0)),
        d_min=float(doc.get("d_min_m", 1.0)),
    )


def save_scenario(scenario: Scenario, path, include_gains: bool = False) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario, include_gains), indent=2))


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))
