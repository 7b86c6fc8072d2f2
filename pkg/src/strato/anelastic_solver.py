"""Projection time stepping for the constrained target system.

Velocity form of the momentum balance: dv/dt + (v.grad)v + grad(Pi) =
g*T e3 + (nu/rho_tilde) div S(grad v), with div(rho_tilde v) = 0 enforced
after every stage by the weighted projection (the weak-form weighting, in
which the viscous stress is not divided before testing, fixes the
rho_tilde placement ambiguity of the strong form). The temperature
variation is transported with the same skew-symmetric advection as the
compressible solver; the pressure is recovered from the final projection
potential and reported mean-zero. Time integration is the same explicit
midpoint skeleton as the compressible stepper so that paired runs carry
matching temporal orders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_types import AnelasticState, ScaledParams
from .errors import BlowUp
from .helmholtz import neumann_solver_for
from .hydrostatics import HydrostaticProfile
from .operators import skew_advection, skew_scalar_advection, stress_divergence
from .primitive_solver import StepperConfig


@dataclass
class AnelasticInitSpec:
    """Initial velocity and temperature variation for the limit system."""

    v0: np.ndarray
    t0: np.ndarray


def project_anelastic(w: np.ndarray, profile: HydrostaticProfile) -> np.ndarray:
    """Remove the gradient part: returns w - grad(Psi) with div(rho_tilde
    (w - grad Psi)) = 0.

    Fixed points are exactly the weighted-solenoidal fields; for a constant
    profile this is the classical Leray projection.
    """
    psi = _projection_potential(w, profile)
    return w - profile.grid.grad_cos(psi)


def _projection_potential(w: np.ndarray, profile: HydrostaticProfile) -> np.ndarray:
    rhs = profile.grid.div(profile.rho_tilde * w)
    return neumann_solver_for(profile).solve(rhs)


def constraint_defect(v: np.ndarray, profile: HydrostaticProfile) -> float:
    """Discrete max-norm of div(rho_tilde v)."""
    return float(np.abs(profile.grid.div(profile.rho_tilde * v)).max())


def make_anelastic_state(
    spec: AnelasticInitSpec, profile: HydrostaticProfile
) -> AnelasticState:
    """Project the given velocity onto the constraint and zero the pressure."""
    grid = profile.grid
    v0 = spec.v0.copy()
    v0[2] = grid.sine_restrict(v0[2])
    v0 = project_anelastic(v0, profile)
    return AnelasticState(v=v0, t_pert=spec.t0.copy(), pi=grid.zeros(), time=0.0)


def _tendency(
    v: np.ndarray,
    t_pert: np.ndarray,
    params: ScaledParams,
    profile: HydrostaticProfile,
):
    grid = profile.grid
    # same split form as the compressible solver, weighted by the profile:
    # kinetic-energy neutral under the constraint, to round-off
    out = -skew_advection(grid, profile.rho_tilde * v, v) / profile.rho_tilde
    out[2] += grid.sine_restrict(params.g * t_pert)
    if params.nu > 0:
        out += (
            params.nu
            * stress_divergence(grid, v, params.mu, params.lambda_bulk)
            / profile.rho_tilde
        )
    dt_pert = skew_scalar_advection(grid, profile.rho_tilde, v, t_pert)
    return out, dt_pert


def step_anelastic(
    state: AnelasticState,
    params: ScaledParams,
    profile: HydrostaticProfile,
    cfg: StepperConfig,
) -> AnelasticState:
    """Advance one step: midpoint predictor/corrector with projections."""
    grid = profile.grid
    dt = cfg.dt
    beta = dt / 2.0
    v_n, t_n = state.v, state.t_pert

    gv1, gt1 = _tendency(v_n, t_n, params, profile)
    v_half = project_anelastic(v_n + beta * gv1, profile)
    t_half = t_n + beta * gt1

    gv2, gt2 = _tendency(v_half, t_half, params, profile)
    v_star = v_n + dt * gv2
    psi = _projection_potential(v_star, profile)
    v_new = v_star - grid.grad_cos(psi)
    t_new = t_n + dt * gt2
    pi = psi / dt
    pi -= grid.integral(pi)

    out = AnelasticState(v=v_new, t_pert=t_new, pi=pi, time=state.time + dt)
    if not (np.isfinite(out.v).all() and np.isfinite(out.t_pert).all()):
        raise BlowUp(f"non-finite anelastic field at t={out.time:.6g}")
    return out


def kinetic_energy(state: AnelasticState, profile: HydrostaticProfile) -> float:
    """Weighted kinetic energy 0.5 * integral rho_tilde |v|^2."""
    return 0.5 * profile.grid.integral(
        profile.rho_tilde * np.sum(state.v**2, axis=0)
    )


def transport_extrema_monitor(history: Sequence[AnelasticState]):
    """Worst expansion of the transported field's extrema over a run.

    Returns (max-overshoot, min-undershoot); both are zero for exact
    transport and positive when the scheme expands the range.
    """
    if not history:
        raise ValueError("history is empty")
    t0 = history[0].t_pert
    max0, min0 = float(t0.max()), float(t0.min())
    overs = max(float(s.t_pert.max()) for s in history) - max0
    unders = min0 - min(float(s.t_pert.min()) for s in history)
    return max(overs, 0.0), max(unders, 0.0)
