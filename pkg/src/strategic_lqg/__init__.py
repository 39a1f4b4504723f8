"""Static, dynamic and layered stochastic VCG mechanisms for LQG agents."""
from .lqg import (AgentParams, FeedbackGain, MarketModel, ModelError, Trajectory, analytic_social_welfare,
                  random_social_welfare, simulate_closed_loop, solve_balanced_lqr, validate_model)
from .qp import DegenerateProgramError, equality_qp_solve

__version__ = "0.1.0"

__all__ = [
    "AgentParams", "FeedbackGain", "MarketModel", "ModelError", "Trajectory", "DegenerateProgramError",
    "analytic_social_welfare", "equality_qp_solve", "random_social_welfare", "simulate_closed_loop",
    "solve_balanced_lqr", "validate_model",
]
