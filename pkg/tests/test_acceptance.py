"""Exit criteria for the package, one test per criterion.

Each test appends a PASS/FAIL line to the acceptance summary printed at the
end of the pytest run. Criteria marked soft are reported but never fail the
suite; hard parts are asserted.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ucem.analytics import (average_power, convert_utility, per_node_throughput, phi,
                            utility_ceiling, utility_from_throughput, utility_prime)
from ucem.grouping import build_plan, plan_from_groups
from ucem.model import Node, RadioParams, Scenario, generate_disk_scenario, pathgain
from ucem.protocol import bs_emit, enact
from ucem.sim import ReceptionModel, simulate_lifetime, simulate_models
from ucem.solver import OPTIMAL, grid_oracle, solve_ucem, uniform_solution

TABLE1_UC = 219.0
SWEEP_UC = np.linspace(150.0, 290.0, 8)


def report(number, title, ok, detail, soft=False):
    tag = "PASS" if ok else ("SOFT-FAIL" if soft else "FAIL")
    ACCEPTANCE_LINES.append(f"[{tag}] {number:>2}. {title}: {detail}")


def table1_target(n=50):
    return convert_utility(TABLE1_UC, n, 1000, 0.005)


@pytest.fixture(scope="module")
def table1_solved():
    sc = generate_disk_scenario(50, 20.0, seed=1)
    plan = build_plan(sc)
    return sc, plan, solve_ucem(plan, plan.tx_power, table1_target())


def test_01_solver_vs_oracle():
    rng = np.random.default_rng(2024)
    step = 2e-3
    worst_gap, worst_kkt, ok = -math.inf, 0.0, True
    start = time.perf_counter()
    for k in range(20):
        n = 2 + k % 2
        d = rng.uniform(1.0, 20.0, n)
        sc = Scenario(tuple(Node(j, d[j], pathgain(d[j])) for j in range(n)), RadioParams())
        plan = build_plan(sc)
        u_max = utility_ceiling(plan)[1]
        target = u_max - 0.2 * abs(u_max)
        sol = solve_ucem(plan, plan.tx_power, target)
        _, e_grid = grid_oracle(plan, plan.tx_power, target, step=step)
        slack = step * plan.tx_power.sum()
        worst_gap = max(worst_gap, sol.avg_power - e_grid)
        worst_kkt = max(worst_kkt, sol.kkt_residual)
        ok &= sol.status == OPTIMAL and sol.avg_power <= e_grid + slack and sol.kkt_residual < 1e-8
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10.0
    report(1, "solver vs grid oracle", ok,
           f"max(E_opt - E_grid)={worst_gap:.3g} W, max KKT={worst_kkt:.2g}, {elapsed:.2f} s")
    assert ok


def test_02_utility_identity(table1_solved):
    sc, plan, _ = table1_solved
    rng = np.random.default_rng(7)
    worst = 0.0
    for q in rng.uniform(0.0, 1.0, (1000, sc.n)):
        q = np.clip(q, 1e-12, 1 - 1e-12)
        a = utility_prime(q, plan).u_prime
        b = utility_from_throughput(q, plan)
        worst = max(worst, abs(a - b) / abs(b))
    ok = worst < 1e-12
    report(2, "utility identity (phi sum vs sum log S)", ok, f"max rel err={worst:.2e}")
    assert ok


def test_03_ceiling_formula():
    rng = np.random.default_rng(11)
    grid = np.arange(1, 1000) * 1e-3
    ok, details = True, []
    for n in (2, 3, 5):
        plan = plan_from_groups([1] * n, [0.2] * n)
        q_star, u_max = utility_ceiling(plan)
        ok &= bool(np.allclose(q_star, 1.0 / n))
        for q in rng.random((1000, n)):
            ok &= utility_prime(q, plan).u_prime <= u_max + 1e-12
        # symmetric scan and one-coordinate scans around q*
        diag = n * np.asarray(phi(grid, n))
        ok &= bool(diag.max() <= u_max + 1e-12)
        ok &= abs(grid[np.argmax(diag)] - 1.0 / n) <= 1e-3
        rest = (n - 1) * phi(1.0 / n, n)
        ok &= bool(np.all(rest + np.asarray(phi(grid, n)) <= u_max + 1e-12))
        details.append(f"n={n}: q*={q_star[0]:.4f}")
    report(3, "utility ceiling q*=1/S", ok, ", ".join(details))
    assert ok


@pytest.fixture(scope="module")
def table1_mc(table1_solved):
    sc, plan, sol = table1_solved
    start = time.perf_counter()
    cap, sinr = simulate_models(sc, plan, sol.q,
                                [ReceptionModel.capture(), ReceptionModel.sinr(sc.radio.sinr_threshold)],
                                200_000, seed=1)
    return cap, sinr, time.perf_counter() - start


def test_04_monte_carlo_vs_analytic(table1_solved, table1_mc):
    sc, plan, sol = table1_solved
    cap, _, elapsed = table1_mc
    analytic = per_node_throughput(sol.q, plan)
    z = np.abs(cap.empirical_S - analytic) / cap.std_err
    frac = float(np.mean(z <= 3.0))
    ok = frac >= 0.95 and elapsed < 10.0
    report(4, "Monte Carlo vs closed-form throughput", ok,
           f"{100 * frac:.0f}% of nodes within 3 SE, {elapsed:.2f} s for 2e5 slots")
    assert ok


def test_05_capture_vs_sinr(table1_mc):
    cap, sinr, _ = table1_mc
    dev = np.abs(sinr.empirical_S - cap.empirical_S) / cap.empirical_S
    lost = int((cap.successes - sinr.successes).sum())
    ok = float(dev.mean()) < 0.10
    # packets decoded under capture but not SINR are mostly the exact-threshold
    # case: one interferer from the adjacent group gives SINR == beta, which
    # fails the strict inequality
    report(5, "SINR vs perfect-capture closeness", ok,
           f"mean rel deviation={100 * dev.mean():.2f}%, "
           f"{lost} of {int(cap.successes.sum())} captures lost under SINR")
    assert ok


@pytest.fixture(scope="module")
def sweep(table1_solved):
    sc, plan, _ = table1_solved
    rows = []
    for uc in SWEEP_UC:
        target = convert_utility(uc, sc.n, 1000, 0.005)
        opt = solve_ucem(plan, plan.tx_power, target)
        uni = uniform_solution(plan, plan.tx_power, target)
        life_opt = simulate_lifetime(sc, plan, opt.q, seed=1).network_lifetime_slots
        life_uni = simulate_lifetime(sc, plan, uni.q, seed=1).network_lifetime_slots
        rows.append((uc, opt.avg_power, uni.avg_power, life_opt, life_uni))
    return rows


def test_06_energy_dominance(sweep):
    opt = np.array([r[1] for r in sweep])
    uni = np.array([r[2] for r in sweep])
    hard = bool(np.all(opt <= uni))
    red = 100.0 * (uni - opt) / uni
    med = float(np.median(red))
    report(6, "optimal <= uniform power at every U_c (hard)", hard,
           f"reductions {red.min():.2f}%..{red.max():.2f}%")
    report(6, "median reduction in [5%, 15%] (soft)", 5.0 <= med <= 15.0,
           f"median={med:.2f}%", soft=True)
    assert hard


def test_07_monotonicity(sweep):
    opt = np.array([r[1] for r in sweep])
    life_opt = np.array([r[3] for r in sweep])
    life_uni = np.array([r[4] for r in sweep])
    energy_ok = bool(np.all(np.diff(opt) >= 0))
    life_ok = bool(np.all(np.diff(life_opt) <= 0) and np.all(np.diff(life_uni) <= 0))
    longer = bool(np.all(life_opt >= life_uni))
    report(7, "optimal energy nondecreasing in U_c (hard)", energy_ok,
           f"{opt[0]:.4g} W .. {opt[-1]:.4g} W")
    report(7, "lifetime nonincreasing in U_c (hard)", life_ok,
           f"{life_opt[0] * 0.005 / 86400:.1f} d .. {life_opt[-1] * 0.005 / 86400:.1f} d")
    report(7, "optimal lifetime >= uniform lifetime (soft)", longer,
           f"optimal/uniform ratio {np.min(life_opt / life_uni):.3f}..{np.max(life_opt / life_uni):.3f}",
           soft=True)
    assert energy_ok and life_ok


def test_08_protocol_consistency():
    worst, sizes, ok = 0.0, [], True
    for seed in range(10):
        n = int(np.random.default_rng(seed).integers(5, 200))
        sc = generate_disk_scenario(n, 20.0, seed=100 + seed)
        plan = build_plan(sc)
        u_max = utility_ceiling(plan)[1]
        sol = solve_ucem(plan, plan.tx_power, 1.5 * u_max)
        q_nodes = enact(sc, plan, sol)
        worst = max(worst, float(np.max(np.abs(q_nodes - sol.q))))
        setup, assign = bs_emit(plan, sol, sc.radio.base_power, sc.radio.sinr_threshold)
        payload = setup.payload_size + assign.payload_size
        ok &= payload == 2 * plan.n_groups + 5
        sizes.append((n, payload))
    ok &= worst <= 1e-12
    report(8, "node-side q equals centralized q; payload O(M)", ok,
           f"max |dq|={worst:.1e}, (N, payload) = {sizes[:4]}...")
    assert ok


def test_09_single_node_closed_forms():
    ok, worst_life = True, 0.0
    radio = RadioParams()
    for u_target in (math.log(0.5), math.log(0.1), math.log(0.01)):
        sc = Scenario((Node(0, 5.0, pathgain(5.0)),), radio)
        plan = build_plan(sc)
        sol = solve_ucem(plan, plan.tx_power, u_target)
        q = math.exp(u_target)
        p = plan.tx_power[0]
        ok &= math.isclose(sol.q[0], q, rel_tol=1e-8)
        ok &= math.isclose(sol.avg_power, p * q, rel_tol=1e-8)
        ok &= math.isclose(sol.lam, p * q, rel_tol=1e-8)
        life = simulate_lifetime(sc, plan, sol.q, seed=3).network_lifetime_slots
        expected = radio.battery / (p * radio.slot_duration * q)
        worst_life = max(worst_life, abs(life - expected) / expected)
    ok &= worst_life < 0.01
    report(9, "single-node closed forms", ok, f"max lifetime rel err={100 * worst_life:.3f}%")
    assert ok


def test_10_concavity():
    q = np.arange(1, 100) / 100.0
    h = 1e-4
    worst = -math.inf
    for s in range(1, 51):
        second = np.asarray(phi(q + h, s)) - 2 * np.asarray(phi(q, s)) + np.asarray(phi(q - h, s))
        worst = max(worst, float(second.max()))
    ok = worst <= 0.0
    report(10, "phi concave on grid", ok, f"max second difference={worst:.3g}")
    assert ok
