"""Stackelberg equilibria of a reinsurance game between one
ambiguity-averse reinsurer and n insurers with compound-Poisson losses."""

from .contracts import CAPPED_XL, PROPORTIONAL, XL, Contract
from .measures import CompensatorField, InsurerSpec, SeverityModel
from .montecarlo import EventPath, SimConfig
from .reinsurer import EquilibriumResult, MarketSpec, solve_equilibrium

__all__ = [
    "CAPPED_XL",
    "PROPORTIONAL",
    "XL",
    "CompensatorField",
    "Contract",
    "EquilibriumResult",
    "EventPath",
    "InsurerSpec",
    "MarketSpec",
    "SeverityModel",
    "SimConfig",
    "solve_equilibrium",
]
