"""Command-line experiment harness.

    ucem generate       write a scenario JSON
    ucem solve          optimal (or --uniform) probabilities for one U_c
    ucem sweep-energy   optimal vs uniform average power over a U_c range
    ucem sweep-lifetime optimal vs uniform network lifetime over a U_c range
    ucem rates          per-node effective rates, analytic vs Monte Carlo
    ucem simulate       Monte Carlo throughput for one policy

U_c is the rate utility (sum of log bit/s) unless --u-prime is given.
Every CSV is written next to a ``.meta.json`` holding the resolved config.
Exit codes: 0 success, 2 infeasible, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analytics import (convert_utility, effective_rates, per_node_throughput,
                        utility_ceiling)
from .errors import InfeasibleError, NumericalError, UcemError
from .grouping import GroupingPlan, build_plan
from .model import RadioParams, Scenario, generate_disk_scenario, load_scenario, save_scenario
from .sim import ReceptionModel, simulate_lifetime, simulate_models
from .solver import INFEASIBLE, Solution, solve_ucem, uniform_solution

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3

DEFAULT_UC = 219.0
DEFAULT_SWEEP = (150.0, 290.0, 8)


@dataclass
class ExperimentConfig:
    scenario_file: str | None = None
    n: int = 50
    radius: float = 20.0
    d_min: float = 1.0
    seed: int = 1
    beta_db: float = 6.0
    base_power: float = 0.2
    slot_duration: float = 0.005
    packet_bits: int = 1000
    battery: float = 1000.0
    uc: list[float] = field(default_factory=lambda: [DEFAULT_UC])
    u_prime: bool = False
    model: str = "both"
    slots: int = 200_000
    sim_seed: int = 1
    uniform: bool = False
    death_fraction: float = 0.7
    workers: int = 1
    out: str = "out"

    def __post_init__(self):
        if not self.uc:
            raise ValueError("need at least one U_c value")
        if self.slots < 1:
            raise ValueError("slots must be >= 1")

    def scenario(self) -> Scenario:
        if self.scenario_file:
            return load_scenario(self.scenario_file)
        radio = RadioParams.from_db(self.beta_db, base_power=self.base_power,
                                    slot_duration=self.slot_duration,
                                    packet_bits=self.packet_bits, battery=self.battery)
        return generate_disk_scenario(self.n, self.radius, self.d_min, radio, self.seed)

    def target(self, uc: float, scenario: Scenario) -> float:
        """The constraint in U' units."""
        if self.u_prime:
            return uc
        r = scenario.radio
        return convert_utility(uc, scenario.n, r.packet_bits, r.slot_duration)

    def models(self, beta: float) -> list[ReceptionModel]:
        kinds = {"capture": [ReceptionModel.capture()],
                 "sinr": [ReceptionModel.sinr(beta)],
                 "both": [ReceptionModel.capture(), ReceptionModel.sinr(beta)]}
        return kinds[self.model]


def parse_range(text: str) -> list[float]:
    lo, hi, steps = text.split(":")
    steps = int(steps)
    if steps < 2:
        raise argparse.ArgumentTypeError("a range needs at least 2 steps")
    return [float(v) for v in np.linspace(float(lo), float(hi), steps)]


def _to_utility(u_prime_value: float, scenario: Scenario) -> float:
    r = scenario.radio
    return u_prime_value + scenario.n * math.log(r.packet_bits / r.slot_duration)


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _solve(config, scenario, plan, uc) -> Solution:
    target = config.target(uc, scenario)
    if config.uniform:
        return uniform_solution(plan, plan.tx_power, target)
    sol = solve_ucem(plan, plan.tx_power, target)
    if sol.status == INFEASIBLE:
        u_max = sol.u_max if config.u_prime else _to_utility(sol.u_max, scenario)
        raise InfeasibleError(f"infeasible, U_max = {u_max:.6f}", u_max)
    return sol


def run_solve(config: ExperimentConfig):
    """Solve for the first U_c; returns (scenario, plan, solution, node rows)."""
    scenario = config.scenario()
    plan = build_plan(scenario)
    sol = _solve(config, scenario, plan, config.uc[0])
    r = scenario.radio
    S = per_node_throughput(sol.q, plan)
    x = effective_rates(S, r.packet_bits, r.slot_duration)
    rows = []
    for k, node in enumerate(scenario.nodes):
        rows.append({"id": node.id, "d": node.distance, "group": int(plan.group_of[k]),
                     "P_ij": float(plan.tx_power[k]), "q": float(sol.q[k]),
                     "S_analytic": float(S[k]), "x_bits_per_s": float(x[k])})
    return scenario, plan, sol, rows


def _policy_point(scenario, plan, target, uniform):
    try:
        if uniform:
            return uniform_solution(plan, plan.tx_power, target)
        sol = solve_ucem(plan, plan.tx_power, target)
        return sol if sol.solved else None
    except InfeasibleError:
        return None


def run_sweep_energy(config: ExperimentConfig) -> list[dict]:
    if len(config.uc) < 2:
        raise ValueError("an energy sweep needs at least 2 U_c values")
    scenario = config.scenario()
    plan = build_plan(scenario)

    def point(uc):
        target = config.target(uc, scenario)
        opt = _policy_point(scenario, plan, target, False)
        uni = _policy_point(scenario, plan, target, True)
        row = {"U_c": uc, "optimal_power": None, "uniform_power": None, "reduction_pct": None}
        if opt is not None:
            row["optimal_power"] = opt.avg_power
        if uni is not None:
            row["uniform_power"] = uni.avg_power
        if opt is not None and uni is not None:
            row["reduction_pct"] = 100.0 * (uni.avg_power - opt.avg_power) / uni.avg_power
        return row

    return _map(point, sorted(config.uc), config.workers)


def run_sweep_lifetime(config: ExperimentConfig) -> list[dict]:
    if len(config.uc) < 2:
        raise ValueError("a lifetime sweep needs at least 2 U_c values")
    scenario = config.scenario()
    plan = build_plan(scenario)

    def point(uc):
        target = config.target(uc, scenario)
        row = {"U_c": uc, "lifetime_optimal": None, "lifetime_uniform": None}
        for key, uniform in (("lifetime_optimal", False), ("lifetime_uniform", True)):
            sol = _policy_point(scenario, plan, target, uniform)
            if sol is not None:
                rep = simulate_lifetime(scenario, plan, sol.q, config.death_fraction,
                                        seed=config.sim_seed)
                row[key] = rep.network_lifetime_seconds
        return row

    return _map(point, sorted(config.uc), config.workers)


def run_rates(config: ExperimentConfig) -> list[dict]:
    """Per-node effective rates for the optimal and uniform policies at one U_c.

    Rows are sorted by distance to the base station.
    """
    scenario = config.scenario()
    plan = build_plan(scenario)
    r = scenario.radio
    target = config.target(config.uc[0], scenario)
    opt = solve_ucem(plan, plan.tx_power, target)
    if opt.status == INFEASIBLE:
        raise InfeasibleError(f"infeasible, U_max = {opt.u_max:.6f}", opt.u_max)
    uni = _policy_point(scenario, plan, target, True)
    cap, sinr = simulate_models(
        scenario, plan, opt.q,
        [ReceptionModel.capture(), ReceptionModel.sinr(r.sinr_threshold)],
        config.slots, config.sim_seed, config.workers)

    def rate(S):
        return effective_rates(S, r.packet_bits, r.slot_duration)

    x_an = rate(per_node_throughput(opt.q, plan))
    x_cap, x_sinr = rate(cap.empirical_S), rate(sinr.empirical_S)
    x_cap_se = rate(cap.std_err)
    x_uni = rate(per_node_throughput(uni.q, plan)) if uni is not None else [None] * scenario.n
    rows = []
    for k in np.argsort(scenario.distances, kind="stable"):
        rows.append({"id": scenario.nodes[k].id, "d": scenario.nodes[k].distance,
                     "group": int(plan.group_of[k]),
                     "x_analytic_capture": float(x_an[k]), "x_mc_capture": float(x_cap[k]),
                     "x_mc_capture_se": float(x_cap_se[k]), "x_mc_sinr": float(x_sinr[k]),
                     "x_uniform": None if x_uni[k] is None else float(x_uni[k])})
    return rows


def run_simulate(config: ExperimentConfig) -> list[dict]:
    scenario = config.scenario()
    plan = build_plan(scenario)
    sol = _solve(config, scenario, plan, config.uc[0])
    S = per_node_throughput(sol.q, plan)
    reports = simulate_models(scenario, plan, sol.q, config.models(scenario.radio.sinr_threshold),
                              config.slots, config.sim_seed, config.workers)
    rows = []
    for rep in reports:
        for k, node in enumerate(scenario.nodes):
            rows.append({"id": node.id, "model": rep.model, "q": float(sol.q[k]),
                         "S_analytic": float(S[k]), "empirical_S": float(rep.empirical_S[k]),
                         "std_err": float(rep.std_err[k])})
    return rows


def write_csv(path: Path, rows: list[dict], config: ExperimentConfig, **meta) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    sidecar = path.with_suffix(".meta.json")
    sidecar.write_text(json.dumps({"config": asdict(config), **meta}, indent=2, default=str))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", dest="scenario_file", help="scenario JSON file")
    common.add_argument("--n", type=int, default=50, help="number of nodes")
    common.add_argument("--radius", type=float, default=20.0, help="disk radius in m")
    common.add_argument("--d-min", type=float, default=1.0, help="minimum node distance in m")
    common.add_argument("--seed", type=int, default=1, help="placement seed")
    common.add_argument("--beta-db", type=float, default=6.0, help="SINR threshold in dB")
    common.add_argument("--uc", type=float, action="append", help="utility floor (repeatable)")
    common.add_argument("--uc-range", type=parse_range, metavar="LO:HI:STEPS")
    common.add_argument("--u-prime", action="store_true",
                        help="read U_c as the throughput utility U' (no conversion)")
    common.add_argument("--model", choices=("capture", "sinr", "both"), default="both")
    common.add_argument("--slots", type=int, default=200_000)
    common.add_argument("--sim-seed", type=int, default=1)
    common.add_argument("--uniform", action="store_true", help="use the uniform policy")
    common.add_argument("--death-fraction", type=float, default=0.7)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default="out", help="output directory")

    parser = argparse.ArgumentParser(prog="ucem", description=__doc__.splitlines()[0] if __doc__ else None,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "solve", "sweep-energy", "sweep-lifetime", "rates", "simulate"):
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(args) -> ExperimentConfig:
    if args.uc_range:
        uc = list(args.uc_range)
    elif args.uc:
        uc = list(args.uc)
    elif args.command.startswith("sweep"):
        uc = parse_range(":".join(str(v) for v in DEFAULT_SWEEP))
    else:
        uc = [DEFAULT_UC]
    return ExperimentConfig(
        scenario_file=args.scenario_file, n=args.n, radius=args.radius, d_min=args.d_min,
        seed=args.seed, beta_db=args.beta_db, uc=uc, u_prime=args.u_prime, model=args.model,
        slots=args.slots, sim_seed=args.sim_seed, uniform=args.uniform,
        death_fraction=args.death_fraction, workers=args.workers, out=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "generate":
            scenario = config.scenario()
            save_scenario(scenario, out / "scenario.json")
            print(f"wrote {out / 'scenario.json'} ({scenario.n} nodes)")
        elif args.command == "solve":
            scenario, plan, sol, rows = run_solve(config)
            doc = sol.to_dict()
            doc["policy"] = "uniform" if config.uniform else "optimal"
            doc["U_c"] = config.uc[0]
            doc["grouping"] = plan.to_dict(scenario.ids)
            (out / "solution.json").write_text(json.dumps(doc, indent=2))
            write_csv(out / "nodes.csv", rows, config)
            print(f"{doc['policy']}: status={sol.status} avg_power={sol.avg_power:.6g} W "
                  f"lambda={sol.lam:.6g} U'={sol.u_prime:.6f}")
        elif args.command == "sweep-energy":
            rows = run_sweep_energy(config)
            write_csv(out / "sweep_energy.csv", rows, config)
            for row in rows:
                print(row)
        elif args.command == "sweep-lifetime":
            rows = run_sweep_lifetime(config)
            write_csv(out / "sweep_lifetime.csv", rows, config)
            for row in rows:
                print(row)
        elif args.command == "rates":
            rows = run_rates(config)
            write_csv(out / "rates.csv", rows, config)
            print(f"wrote {out / 'rates.csv'} ({len(rows)} nodes)")
        elif args.command == "simulate":
            rows = run_simulate(config)
            write_csv(out / "simulate.csv", rows, config)
            print(f"wrote {out / 'simulate.csv'} ({len(rows)} rows)")
    except InfeasibleError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UcemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
