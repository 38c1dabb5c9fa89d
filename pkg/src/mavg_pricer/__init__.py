"""Bermudan options on moving averages priced by Laguerre Markovization and least-squares Monte Carlo."""

from .laguerre import LaguerreBasis
from .lsmc import Method, Payoff, PricingResult, convergence_sweep, price
from .market import GBMModel, PathSet, TimeGrid, exact_moving_average, simulate_paths
from .markovize import StateTransition, markovize, propagate_states
from .regression import RegressionSpec, fit_local_basis
from .weighting import LaguerreProjection, WeightingScheme, optimal_projection, optimize_scale, project

__version__ = "0.1.0"

__all__ = [
    "GBMModel",
    "LaguerreBasis",
    "LaguerreProjection",
    "Method",
    "PathSet",
    "Payoff",
    "PricingResult",
    "RegressionSpec",
    "StateTransition",
    "TimeGrid",
    "WeightingScheme",
    "convergence_sweep",
    "exact_moving_average",
    "fit_local_basis",
    "markovize",
    "optimal_projection",
    "optimize_scale",
    "price",
    "project",
    "propagate_states",
    "simulate_paths",
]
