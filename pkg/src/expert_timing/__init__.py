"""Optimal timing of an expert's announcement in a Gaussian LMSR market."""

from .bounds import best_lower_bound, best_upper_bound, bound_report, psi_lower_bound, psi_upper_bound
from .errors import CapacityError, DomainError, StateError
from .model import (
    GaussianSpec,
    MarketState,
    expert_immediate_reward,
    expert_policy_reward,
    lmsr_expected_reward,
    lmsr_realized_reward,
    quality_term,
    should_predict,
)
from .simulator import FinalStop, FixedLIL, Hindsight, ImmediateStop, OptimalTable, expert_scenario, monte_carlo
from .solver import PolicyTable, SolverConfig, capital_psi, solve

__all__ = [
    "CapacityError", "DomainError", "StateError",
    "GaussianSpec", "MarketState", "expert_immediate_reward", "expert_policy_reward",
    "lmsr_expected_reward", "lmsr_realized_reward", "quality_term", "should_predict",
    "SolverConfig", "PolicyTable", "solve", "capital_psi",
    "psi_upper_bound", "psi_lower_bound", "best_upper_bound", "best_lower_bound", "bound_report",
    "OptimalTable", "FixedLIL", "ImmediateStop", "FinalStop", "Hindsight", "monte_carlo", "expert_scenario",
]
