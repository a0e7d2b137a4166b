"""Minimum probability of lifetime ruin and minimum-wealth penalties under piecewise-linear consumption.

Closed-form solver with Monte Carlo and finite-difference cross-checks.
"""

from .dual import DualFunction, DualSolution, boundary_residuals, make_dual, solve_boundary_system, solve_ratio
from .model import (
    ConsumptionSpec,
    DerivedConstants,
    MarketParams,
    ParameterError,
    Regime,
    consumption_rate,
    derive_constants,
    safe_level,
    validate,
)
from .ruin import DomainError, RuinSolution, h_eval, h_value, pi_from_derivatives, pi_star, psi, solve
from .utility import (
    CorrespondenceCheck,
    HaraUtility,
    hara_from,
    hara_u,
    reconstruct_utility,
    risk_aversion,
    verify_correspondence,
)
from .value import ConvergenceError, PenaltyFunction, ValueQuery, value_general, value_indicator, value_step
from .verify import (
    FdGrid,
    FdSolution,
    SimConfig,
    SimResult,
    fd_solve,
    ode_residual,
    simulate_minimum,
    simulate_penalty,
    simulate_ruin,
)

__version__ = "0.1.0"

__all__ = [
    "ConsumptionSpec", "ConvergenceError", "CorrespondenceCheck", "DerivedConstants", "DomainError",
    "DualFunction", "DualSolution", "FdGrid", "FdSolution", "HaraUtility", "MarketParams", "ParameterError",
    "PenaltyFunction", "Regime", "RuinSolution", "SimConfig", "SimResult", "ValueQuery",
    "boundary_residuals", "consumption_rate", "derive_constants", "fd_solve", "h_eval", "h_value",
    "hara_from", "hara_u", "make_dual", "ode_residual", "pi_from_derivatives", "pi_star", "psi",
    "reconstruct_utility", "risk_aversion", "safe_level", "simulate_minimum", "simulate_penalty",
    "simulate_ruin", "solve", "solve_boundary_system", "solve_ratio", "validate", "value_general",
    "value_indicator", "value_step", "verify_correspondence",
]
