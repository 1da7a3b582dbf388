"""Minimum probability of lifetime ruin under borrowing constraints.

Closed forms for the unconstrained and proportional-consumption problems, a
Riccati shooting solver and a convex-dual solution for the constrained
constant-consumption problem, and a Monte Carlo check of the optimal strategy.
"""

__version__ = "0.1.0"

from .assembler import RuinSolution, compare_regimes, limit_sweep, solve
from .closedform import PowerSolution, crra_equivalent, solve_proportional
from .dual import DualSolution, solve_dual
from .errors import (
    CaseSelectionError,
    ConfigError,
    DomainError,
    IntegrationError,
    InversionError,
    ParameterError,
    RootError,
    RuinError,
    StrategyError,
)
from .model import ConstantConsumption, MarketParams, ProportionalConsumption, Regime, derive_constants, validate
from .riccati import RiccatiSolution, solve_riccati
from .simulator import SimConfig, SimResult, StrategyTable, convergence_study, simulate, trace

__all__ = [
    "__version__",
    "MarketParams", "ConstantConsumption", "ProportionalConsumption", "Regime",
    "validate", "derive_constants",
    "PowerSolution", "solve_proportional", "crra_equivalent",
    "RiccatiSolution", "solve_riccati",
    "DualSolution", "solve_dual",
    "RuinSolution", "solve", "compare_regimes", "limit_sweep",
    "SimConfig", "SimResult", "StrategyTable", "simulate", "trace", "convergence_study",
    "RuinError", "ParameterError", "ConfigError", "DomainError", "IntegrationError",
    "RootError", "InversionError", "CaseSelectionError", "StrategyError",
]
