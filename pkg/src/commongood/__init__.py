"""Threshold, equilibrium and simulation tools for a stochastic contribution game."""

from .errors import (AssumptionError, AsymmetryError, BracketError, PreconditionError,
                     ScenarioError, SimulationError)
from .model import (Diffusion, PlayerParams, ProfitSpec, Scenario, fundamental_solutions,
                    load_scenario, resolvent, validate_scenario)
from .mpe import (build_asymmetric, build_symmetric, check_asymmetric_conditions, critical_k2,
                  regular_rate, steady_state)
from .rdgame import RdParams, best_response_rd, payoff_rd, symmetric_effort
from .simulate import (Asymmetric, NoControl, SimConfig, Singular, SymmetricRegular,
                       estimate_payoff, simulate_path)
from .single_control import solve_single, solve_threshold, value_function, verify_optimality

__version__ = "0.1.0"
