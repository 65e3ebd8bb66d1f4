"""Utility-constrained energy minimisation by dual bisection.

The problem

    minimise   sum_j P_j q_j
    subject to sum_j phi(q_j, S_j) >= U'_c,  0 <= q <= 1

is convex, so it is solved through its Lagrangian. For a fixed multiplier
lambda each node's stationarity condition is the quadratic

    P q^2 - (P + lambda S) q + lambda = 0

whose smaller root is the node's optimal probability. That root grows with
lambda, and so does the utility it produces, so a scalar bisection on lambda
finds the multiplier at which the utility floor is met with equality.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import average_power, phi, utility_ceiling
from .errors import DomainError, InfeasibleError, NumericalError
from .grouping import GroupingPlan

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
AT_CEILING = "at_ceiling"

MAX_BISECTIONS = 200
MAX_DOUBLINGS = 2000


def utility_tolerance(u_target: float) -> float:
    return 1e-9 * abs(u_target) + 1e-12


@dataclass(frozen=True)
class Solution:
    q: np.ndarray
    lam: float
    u_prime: float
    avg_power: float
    kkt_residual: float
    status: str
    u_target: float = math.nan
    u_max: float = math.nan
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status in (OPTIMAL, AT_CEILING)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "status": self.status,
            "U_prime": self.u_prime,
            "U_prime_target": self.u_target,
            "U_prime_max": self.u_max,
            "avg_power_watts": self.avg_power,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "q": [float(v) for v in self.q],
        }


def stationary_prob(power, suffix, lam):
    """Smaller root of P q^2 - (P + lam S) q + lam = 0, in [0, 1].

    Uses q = 2 lam / (b + sqrt(b^2 - 4 P lam)) with b = P + lam S, which
    avoids cancellation for small lam. The discriminant is rewritten as
    (P - lam S)^2 + 4 P lam (S - 1) so it can never go negative. For S = 1
    this reduces to min(lam / P, 1).
    """
    p = np.asarray(power, dtype=float)
    s = np.asarray(suffix, dtype=float)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0) or np.any(np.isnan(lam_arr)):
        raise DomainError(f"multiplier must be >= 0, got {lam}")
    if np.any(~(p > 0)):
        raise DomainError("powers must be > 0")
    if np.any(s < 1):
        raise DomainError("suffix counts must be >= 1")
    b = p + lam_arr * s
    disc = (p - lam_arr * s) ** 2 + 4.0 * p * lam_arr * (s - 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(lam_arr > 0, 2.0 * lam_arr / (b + np.sqrt(disc)), 0.0)
    q = np.clip(q, 0.0, 1.0)
    return float(q) if q.ndim == 0 else q


def _utility(q, suffix) -> float:
    return float(np.sum(phi(q, suffix)))


def kkt_residuals(sol: Solution, plan: GroupingPlan, tx_powers, u_target: float) -> float:
    """Largest of the scaled stationarity residual and the utility gap.

    Stationarity is |P q^2 - (P + lam S) q + lam| / P per node; the utility
    gap is |U'(q) - U'_c| (infinite when some q is 0).
    """
    p = np.asarray(tx_powers, dtype=float)
    s = plan.node_suffix.astype(float)
    q = np.asarray(sol.q, dtype=float)
    lam = sol.lam
    if sol.status == AT_CEILING:
        # q* is the lam -> infinity limit; only the utility gap is meaningful
        stat = 0.0
    else:
        stat = float(np.max(np.abs(p * q * q - q * (p + lam * s) + lam) / p))
    u = _utility(q, s)
    gap = abs(u - u_target) if math.isfinite(u) else math.inf
    return max(stat, gap)


def _result(q, lam, plan, p, u_target, u_max, status, iterations, **extra) -> Solution:
    s = plan.node_suffix
    u = _utility(q, s)
    sol = Solution(q, lam, u, average_power(q, p), math.nan, status, u_target, u_max, iterations, extra)
    kkt = kkt_residuals(sol, plan, p, u_target)
    return Solution(q, lam, u, sol.avg_power, kkt, status, u_target, u_max, iterations, extra)


def solve_ucem(plan: GroupingPlan, tx_powers, u_target: float) -> Solution:
    """Minimum-power probabilities meeting U'(q) >= u_target.

    Infeasible targets come back with ``status == "infeasible"`` and the
    ceiling point in ``q``; a target equal to the ceiling returns q* = 1/S
    with ``status == "at_ceiling"`` and the finite bracket multiplier.
    """
    if not math.isfinite(u_target):
        raise DomainError(f"utility target must be finite, got {u_target}")
    p = np.asarray(tx_powers, dtype=float)
    if p.shape != (plan.n_nodes,):
        raise DomainError("tx_powers do not match plan size")
    s = plan.node_suffix.astype(float)
    q_star, u_max = utility_ceiling(plan)
    tol = utility_tolerance(u_target)

    if u_target > u_max + tol:
        return Solution(q_star, math.inf, u_max, average_power(q_star, p), math.inf,
                        INFEASIBLE, u_target, u_max, 0)

    def u_of(lam):
        return _utility(stationary_prob(p, s, lam), s)

    at_ceiling = abs(u_target - u_max) <= tol
    # grow the upper bracket until the floor is met
    hi = 1e-12 * float(p.max())
    doublings = 0
    while u_of(hi) < u_target - (tol if at_ceiling else 0.0):
        hi *= 2.0
        doublings += 1
        if doublings > MAX_DOUBLINGS or not math.isfinite(hi):
            raise NumericalError("could not bracket the multiplier",
                                 {"lambda_hi": hi, "u_target": u_target, "u_max": u_max})
    if at_ceiling:
        return _result(q_star, hi, plan, p, u_target, u_max, AT_CEILING, doublings)

    lo = 0.0
    for it in range(1, MAX_BISECTIONS + 1):
        if u_of(hi) - u_target <= tol:
            return _result(stationary_prob(p, s, hi), hi, plan, p, u_target, u_max, OPTIMAL,
                           doublings + it - 1)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if u_of(mid) >= u_target:
            hi = mid
        else:
            lo = mid
    q_hi = stationary_prob(p, s, hi)
    gap = _utility(q_hi, s) - u_target
    if 0 <= gap <= tol:
        return _result(q_hi, hi, plan, p, u_target, u_max, OPTIMAL, doublings + MAX_BISECTIONS)
    raise NumericalError("bisection on the multiplier did not converge",
                         {"lambda_lo": lo, "lambda_hi": hi, "utility_gap": gap, "tol": tol})


def uniform_utility(q: float, plan: GroupingPlan) -> float:
    """U' when every node uses the same probability q."""
    return _utility(np.full(plan.n_nodes, q), plan.node_suffix)


def uniform_peak(plan: GroupingPlan) -> float:
    """Common probability maximising U'; N / sum_j S_j."""
    return plan.n_nodes / float(plan.node_suffix.sum())


def solve_uniform(plan: GroupingPlan, u_target: float) -> float:
    """Smallest common probability reaching the utility floor.

    U'(q * 1) is concave in q with its peak at N / sum S_j; energy grows with q,
    so the root left of the peak is the cheaper one.
    """
    q_peak = uniform_peak(plan)
    u_peak = uniform_utility(q_peak, plan)
    tol = utility_tolerance(u_target)
    if u_target > u_peak + tol:
        raise InfeasibleError(
            f"infeasible under the uniform policy: U'_c={u_target:.6g} > {u_peak:.6g}", u_peak)
    if u_peak - u_target <= tol:
        return q_peak
    lo, hi = 0.0, q_peak
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        u = uniform_utility(mid, plan)
        if u >= u_target:
            hi = mid
        else:
            lo = mid
        if 0 <= uniform_utility(hi, plan) - u_target <= tol:
            return hi
    raise NumericalError("uniform bisection did not converge", {"lo": lo, "hi": hi})


def uniform_solution(plan: GroupingPlan, tx_powers, u_target: float) -> Solution:
    """The uniform policy wrapped as a Solution (no multiplier)."""
    q = np.full(plan.n_nodes, solve_uniform(plan, u_target))
    p = np.asarray(tx_powers, dtype=float)
    u = _utility(q, plan.node_suffix)
    return Solution(q, math.nan, u, average_power(q, p), abs(u - u_target), OPTIMAL,
                    u_target, uniform_utility(uniform_peak(plan), plan))


def grid_oracle(plan: GroupingPlan, tx_powers, u_target: float, step: float = 2e-3,
                max_nodes: int = 4):
    """Exhaustive search over q in {step, 2 step, ..., 1 - step}^N.

    Returns ``(q, energy)`` for the cheapest grid point with U' >= u_target.
    Testing aid only; the cost is (1/step)^N.
    """
    n = plan.n_nodes
    if n > max_nodes:
        raise DomainError(f"grid oracle limited to {max_nodes} nodes, got {n}")
    p = np.asarray(tx_powers, dtype=float)
    s = plan.node_suffix.astype(float)
    k = int(round(1.0 / step))
    grid = np.arange(1, k) * step
    # per-node tables; combinations are enumerated in full below
    phis = [np.asarray(phi(grid, s[j])) for j in range(n)]
    costs = [p[j] * grid for j in range(n)]

    best_e, best_idx = math.inf, None
    head = max(n - 2, 0)
    tail_u = phis[-1] if n == 1 else phis[-2][:, None] + phis[-1][None, :]
    tail_e = costs[-1] if n == 1 else costs[-2][:, None] + costs[-1][None, :]
    for prefix in itertools.product(range(grid.size), repeat=head):
        u0 = sum(phis[j][i] for j, i in enumerate(prefix))
        e0 = sum(costs[j][i] for j, i in enumerate(prefix))
        ok = (u0 + tail_u) >= u_target
        if not ok.any():
            continue
        e = np.where(ok, e0 + tail_e, np.inf)
        flat = int(np.argmin(e))
        if e.flat[flat] < best_e:
            best_e = float(e.flat[flat])
            best_idx = prefix + np.unravel_index(flat, e.shape)
    if best_idx is None:
        raise InfeasibleError("no feasible grid point", utility_ceiling(plan)[1])
    return grid[list(best_idx)], best_e
