"""Simulation and analysis toolkit for cookie branching random walks on the integers."""
from .analytic import BrwClass, Regime, RegimeKind, classify_brw, classify_cbrw, phi_pair
from .model import CbrwParams, CookieLayout, GwSpec, OffspringDistribution, validate

__version__ = "0.1.0"

__all__ = [
    "BrwClass",
    "CbrwParams",
    "CookieLayout",
    "GwSpec",
    "OffspringDistribution",
    "Regime",
    "RegimeKind",
    "classify_brw",
    "classify_cbrw",
    "phi_pair",
    "validate",
]
