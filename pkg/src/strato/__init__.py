"""Numerical laboratory for strongly stratified low-Mach flow and its
anelastic limit: paired solvers, weighted Helmholtz decomposition,
acoustic diagnostics, and a convergence-rate experiment harness."""

__version__ = "0.1.0"

from .core_types import (  # noqa: F401
    AnelasticState,
    PrimitiveState,
    ScaledParams,
    SlabGrid,
    reconstruct_theta,
    weighted_inner_product,
)
from .hydrostatics import HydrostaticProfile, solve_hydrostatic  # noqa: F401
