"""Energy-optimal transmission probabilities for slotted Aloha with capture."""

from .analytics import (average_power, convert_utility, effective_rates, per_node_throughput,
                        phi, utility_ceiling, utility_from_throughput, utility_prime)
from .errors import (ConsistencyError, DomainError, InfeasibleError, NumericalError,
                     UcemError)
from .grouping import (GroupingPlan, assign_groups, assign_powers, build_plan,
                       compute_thresholds)
from .model import (Node, RadioParams, Scenario, generate_disk_scenario, load_scenario,
                    pathgain, save_scenario)
from .protocol import AssignMessage, NodeState, SetupMessage, bs_emit, enact, node_apply
from .sim import (LifetimeReport, ReceptionModel, SimReport, estimate_throughput,
                  simulate_lifetime, simulate_models, slot_outcome)
from .solver import (Solution, grid_oracle, kkt_residuals, solve_ucem, solve_uniform,
                     stationary_prob, uniform_solution)

__version__ = "0.1.0"
