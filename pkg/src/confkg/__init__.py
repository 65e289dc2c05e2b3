"""Conformal transformations of Klein-Gordon fields on FLRW backgrounds.

Submodules: geometry, confmap, kgfield, modes, bogoliubov, qrfstate, cli.
"""
__version__ = "0.1.0"

from .bogoliubov import BogoliubovPair, Spectrum, analytic_tanh_spectrum, extract_bogoliubov, spectrum
from .confmap import ConformalMetric, SpacetimeTriple, apply_conformal, apply_conformal_flrw, compose, invert
from .errors import ConfKGError
from .geometry import ConformalFactor, FLRWMetric, Grid, ScaleFactorProfile
from .kgfield import GridField, kg_residual, pseudo_inner_product
from .modes import ModeSolution, integrate_curved_mode, integrate_mode
from .qrfstate import (
    Branch,
    BranchState,
    MassTerm,
    branch_expectation_nk,
    frame_change_g_to_m,
    frame_change_m_to_g,
)

__all__ = [
    "BogoliubovPair", "Branch", "BranchState", "ConfKGError", "ConformalFactor", "ConformalMetric",
    "FLRWMetric", "Grid", "GridField", "MassTerm", "ModeSolution", "ScaleFactorProfile",
    "SpacetimeTriple", "Spectrum", "analytic_tanh_spectrum", "apply_conformal",
    "apply_conformal_flrw", "branch_expectation_nk", "compose", "extract_bogoliubov",
    "frame_change_g_to_m", "frame_change_m_to_g", "integrate_curved_mode", "integrate_mode",
    "invert", "kg_residual", "pseudo_inner_product", "spectrum",
]
