"""Fluctuations of the Curie-Weiss spin-flip dynamics.

Simulation of the magnetisation chain, exact prelimit generators, limiting
Hamiltonians and actions, and the diffusion limits of the critical and
non-critical fluctuation scalings.
"""
from .errors import (ConfigurationError, CWError, DomainError, NumericRangeError,
                     OptimizationError, RegimeError, UnsupportedOrderError)
from .model import (ModelParams, PathGrid, eval_g, find_fixed_points, flatness_order,
                    g_derivative, meanfield_flow)
from .simulator import ChainState, ScalingRegime

__version__ = "0.1.0"

__all__ = [
    "CWError", "ConfigurationError", "DomainError", "NumericRangeError",
    "OptimizationError", "RegimeError", "UnsupportedOrderError",
    "ModelParams", "PathGrid", "eval_g", "find_fixed_points", "flatness_order", "g_derivative",
    "meanfield_flow",
    "ChainState", "ScalingRegime",
]
