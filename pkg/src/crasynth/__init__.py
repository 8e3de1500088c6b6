"""Controlled reach-avoid set synthesis for stochastic polynomial systems."""

from .polycore import Monomial, Polynomial, compose, integrate_var, monomial_basis
from .specio import SafetySpec, SolveConfig, SystemSpec, load_safety, load_spec, load_system, parse_polynomial

__version__ = "0.1.0"

__all__ = [
    "Monomial", "Polynomial", "compose", "integrate_var", "monomial_basis",
    "SafetySpec", "SolveConfig", "SystemSpec", "load_safety", "load_spec", "load_system",
    "parse_polynomial",
]
