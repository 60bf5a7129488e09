"""Pricing and q-forward hedging of pure endowments under stochastic mortality."""

from .model import HazardParams, MarketSpec, PopulationPair, validate
from .fd import (
    Grid1D,
    PriceSurface,
    build_grid,
    lookup,
    price,
    solve_beta,
    solve_psi_n,
    solve_psi_single,
    solve_survival_factor,
)

__all__ = [
    "HazardParams", "MarketSpec", "PopulationPair", "validate",
    "Grid1D", "PriceSurface", "build_grid", "lookup", "price",
    "solve_beta", "solve_psi_n", "solve_psi_single", "solve_survival_factor",
]
