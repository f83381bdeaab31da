"""Exact and semiclassical tools for multimode parametric oscillators with Kerr
nonlinearity: steady states, entanglement, limit cycles and phase diffusion."""

__version__ = "0.1.0"

from .errors import ParamLCError
from .model import ModelParams, canonical_coupling

__all__ = ["ModelParams", "ParamLCError", "canonical_coupling", "__version__"]
