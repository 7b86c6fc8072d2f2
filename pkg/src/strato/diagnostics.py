"""Computable functionals of the convergence analysis.

Covers the relative energy, the convergence metric of the quantitative
theorem, the essential/residual splitting with its uniform-bound monitors,
the transported-moment identity defect, the acoustic variables with their
Lighthill-type sources, and the stratified wave propagator (application,
spectrum, and an energy-conserving linearized stepper). Everything here is
a pure function over immutable state snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .core_types import (
    AnelasticState,
    PrimitiveState,
    ScaledParams,
    SlabGrid,
    reconstruct_theta,
    theta_perturbation,
    weighted_inner_product,
)
from .errors import EigensolverFailure, NonPositiveReference
from .helmholtz import neumann_solver_for
from .hydrostatics import HydrostaticProfile
from .operators import div_flux3, stress_divergence
from .zoperators import apply_mode_inverses, batched_mode_inverses, zops_for


@dataclass
class DiagnosticsRecord:
    """Per-record scalar monitors written as one CSV row."""

    time: float
    kinetic_energy: float
    internal_energy_scaled: float
    total_energy: float
    dissipation_integral: float
    relative_energy: float
    thm1_metric: float
    mass: float
    rho_theta_total: float
    theta_pert_linf: float
    theta_pert_l1: float
    residual_measure: float
    acoustic_energy: float
    vortical_energy: float
    theta_sq_moment: float
    anelastic_kinetic: float
    constraint_defect: float

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(f.name for f in fields(cls))

    def csv_row(self) -> str:
        return ",".join(repr(getattr(self, f.name)) for f in fields(self))


@dataclass
class AcousticState:
    """Rescaled pressure-like variable, acoustic potential, and their product."""

    s_eps: np.ndarray
    phi_eps: np.ndarray
    z_eps: np.ndarray


def relative_energy(
    state: PrimitiveState,
    r: np.ndarray,
    U: np.ndarray,
    params: ScaledParams,
    grid: SlabGrid,
) -> float:
    """Modulated-energy distance between the state and the pair (r, U).

    Integral of 0.5*rho*|u-U|^2 + (H(rho*Theta) - H'(r)(rho*Theta-r) -
    H(r))/eps^2 with H(s) = s^gamma/(gamma-1); nonnegative by convexity.
    """
    if np.asarray(r).min() <= 0:
        raise NonPositiveReference("reference density must be strictly positive")
    gamma, eps2 = params.gamma, params.epsilon**2
    z = np.maximum(state.rho_theta, 0.0)
    hz = z**gamma / (gamma - 1.0)
    hr = r**gamma / (gamma - 1.0)
    hprime = gamma / (gamma - 1.0) * r ** (gamma - 1.0)
    modulated = (hz - hprime * (state.rho_theta - r) - hr) / eps2
    du = state.velocity() - U
    kinetic = 0.5 * state.rho * np.sum(du**2, axis=0)
    return grid.integral(kinetic + modulated)


def thm1_metric(
    state: PrimitiveState,
    target: AnelasticState,
    profile: HydrostaticProfile,
    params: ScaledParams,
) -> float:
    """Instantaneous integrand of the convergence metric.

    integral of rho|u-v|^2 + |(rho-rho_tilde)/eps|^gamma +
    rho|(Theta-1)/eps^2 - T|^2; the harness takes the running sup in time.
    """
    grid = profile.grid
    du = state.velocity() - target.v
    t1 = state.rho * np.sum(du**2, axis=0)
    t2 = np.abs((state.rho - profile.rho_tilde) / params.epsilon) ** params.gamma
    tp = theta_perturbation(state, params.epsilon)
    t3 = state.rho * (tp - target.t_pert) ** 2
    return grid.integral(t1 + t2 + t3)


def essential_mask(state: PrimitiveState, profile: HydrostaticProfile) -> np.ndarray:
    """Sharp indicator of rho_tilde/2 <= rho*Theta <= 2*rho_tilde."""
    z = state.rho_theta
    return (z >= 0.5 * profile.rho_tilde) & (z <= 2.0 * profile.rho_tilde)


def ess_res_split(
    f: np.ndarray, state: PrimitiveState, profile: HydrostaticProfile
):
    """Pointwise partition (essential part, residual part); exact: ess+res=f."""
    chi = essential_mask(state, profile)
    ess = np.where(chi, f, 0.0)
    res = np.where(chi, 0.0, f)
    return ess, res


def uniform_bound_monitors(
    state: PrimitiveState, profile: HydrostaticProfile, params: ScaledParams
) -> dict:
    """Quadratures of the uniform-bound functionals over their sets.

    Keys B6..B15 follow the derivation order: velocity and temperature
    moments, essential/residual pressure and density moments (the
    residual-set ones carry the eps^2 smallness flag), and the sup/L1
    temperature monitors. residual_cells counts collocation nodes.
    """
    grid = profile.grid
    eps, gamma = params.epsilon, params.gamma
    rho, z = state.rho, state.rho_theta
    tp = theta_perturbation(state, eps)
    chi = essential_mask(state, profile)
    res = ~chi
    u2 = np.sum(state.velocity() ** 2, axis=0)
    out = {
        "B6": np.sqrt(grid.integral(rho * u2)),
        "B8": np.sqrt(grid.integral(rho * tp**2)),
        "B9": np.sqrt(
            grid.integral(np.where(chi, ((z - profile.rho_tilde) / eps) ** 2, 0.0))
        ),
        "B10": grid.integral(np.where(res, 1.0 + np.maximum(z, 0.0) ** gamma, 0.0)),
        "B11": float(np.abs(tp).max()),
        "B13": np.sqrt(
            grid.integral(np.where(chi, ((rho - profile.rho_tilde) / eps) ** 2, 0.0))
        ),
        "B14": grid.integral(np.where(res, np.maximum(rho, 0.0) ** gamma, 0.0)),
        "B15": grid.integral(np.abs(tp)),
        "residual_measure": grid.integral(np.where(res, 1.0, 0.0)),
        "residual_cells": int(np.count_nonzero(res)),
    }
    return out


def lemma_w6_defect(
    prim_history: Sequence[PrimitiveState],
    target_history: Sequence[AnelasticState],
    G: Callable[[np.ndarray], np.ndarray],
    profile: HydrostaticProfile,
) -> float:
    """Defect of the transported-moment identity along paired histories.

    Compares the increment of integral 0.5*rho*|G(Theta) - T|^2 against the
    time integral of rho*(G(Theta) - T)*(v - u).grad(T); both converge at
    scheme order for smooth paired runs. (Expanding the square and using the
    renormalized transport pairings gives the cross term with a minus sign,
    so the difference velocity appears as v - u.)
    """
    if len(prim_history) != len(target_history) or len(prim_history) < 2:
        raise ValueError("need matching histories with at least two entries")
    grid = profile.grid
    times = np.array([s.time for s in prim_history])
    lhs = []
    rhs = []
    for sp, sa in zip(prim_history, target_history):
        if abs(sp.time - sa.time) > 1e-12 * max(1.0, abs(sp.time)):
            raise ValueError("histories are not on a shared time axis")
        diff = G(reconstruct_theta(sp)) - sa.t_pert
        lhs.append(grid.integral(0.5 * sp.rho * diff**2))
        dv = sa.v - sp.velocity()
        gradt = grid.grad_cos(sa.t_pert)
        rhs.append(grid.integral(sp.rho * diff * np.sum(dv * gradt, axis=0)))
    increment = lhs[-1] - lhs[0]
    integral = float(np.trapezoid(np.array(rhs), times))
    return abs(increment - integral)


# -- acoustic machinery ------------------------------------------------------


def acoustic_analysis(
    state: PrimitiveState, profile: HydrostaticProfile, params: ScaledParams
):
    """Acoustic variables plus the (vortical, acoustic) energy pair.

    S = (rho*Theta - rho_tilde)/(eps*rho_tilde); the potential satisfies
    grad(Phi) = Q(rho u) from the weighted decomposition of the momentum;
    Z = c(rho_tilde)*S. The acoustic energy is the conserved quadratic form
    <Z, Z>_H + <A Phi, Phi>_H of the linearized system (the square root of
    the propagator is never formed). Vortical energy is the weighted square
    norm of the divergence-free momentum part.
    """
    grid = profile.grid
    eps = params.epsilon
    s_eps = (state.rho_theta - profile.rho_tilde) / (eps * profile.rho_tilde)
    phi = neumann_solver_for(profile).solve(grid.div(state.mom))
    p_part = state.mom - profile.rho_tilde * grid.grad_cos(phi)
    z_eps = profile.c_of_rho * s_eps
    vortical = grid.integral(np.sum(p_part**2, axis=0) / profile.rho_tilde)
    acoustic = weighted_inner_product(z_eps, z_eps, profile) + weighted_inner_product(
        acoustic_propagator_apply(phi, profile), phi, profile
    )
    return AcousticState(s_eps=s_eps, phi_eps=phi, z_eps=z_eps), vortical, acoustic


def acoustic_variables(
    state: PrimitiveState, profile: HydrostaticProfile, params: ScaledParams
) -> AcousticState:
    return acoustic_analysis(state, profile, params)[0]


def _q_projection(vec: np.ndarray, profile: HydrostaticProfile) -> np.ndarray:
    """Gradient part of the weighted decomposition, for source inspection.

    The vertical component is restricted to the sine subspace first, the
    same way wall-normal forcings enter the solvers.
    """
    grid = profile.grid
    w = vec.copy()
    w[2] = grid.sine_restrict(w[2])
    psi = neumann_solver_for(profile).solve(grid.div(w))
    return grid.grad_cos(psi)


def lighthill_sources(
    state: PrimitiveState, profile: HydrostaticProfile, params: ScaledParams
) -> dict:
    """Scalar and vector sources of the acoustic wave system.

    Returns g1 (scalar) and g2 (vector) together with g2's four pieces:
    the quadratic pressure remainder, the Reynolds flux, the viscous
    stress, and the gravity coupling, each already Q-projected.
    """
    grid = profile.grid
    eps, gamma = params.epsilon, params.gamma
    rho, z = state.rho, state.rho_theta
    u = state.velocity()

    g1 = grid.div(((rho - z) / eps) * u) / profile.rho_tilde

    bracket = (
        np.maximum(z, 0.0) ** gamma
        - profile.c_of_rho * (z - profile.rho_tilde)
        - profile.rho_tilde**gamma
    ) / eps**2
    g2_pressure = -_q_projection(grid.grad_cos(bracket), profile)

    reynolds = np.empty_like(state.mom)
    for i in range(2):
        reynolds[i] = grid.div(state.mom * u[i])
    reynolds[2] = div_flux3(grid, state.mom * u[2])
    g2_reynolds = -_q_projection(reynolds, profile)

    stress = stress_divergence(grid, u, params.mu, params.lambda_bulk)
    g2_stress = -_q_projection(stress, profile)

    gravity = np.zeros_like(state.mom)
    gravity[2] = -params.g * (rho - z) / eps**2
    g2_gravity = eps * _q_projection(gravity, profile)

    g2 = g2_pressure + g2_reynolds + g2_stress + g2_gravity
    return {
        "g1": g1,
        "g2": g2,
        "g2_pressure": g2_pressure,
        "g2_reynolds": g2_reynolds,
        "g2_stress": g2_stress,
        "g2_gravity": g2_gravity,
    }


def acoustic_propagator_apply(w: np.ndarray, profile: HydrostaticProfile) -> np.ndarray:
    """Apply the stratified wave operator -c*Lap_h - (c/rho_tilde) dz(rho_tilde dz .)."""
    grid = profile.grid
    vert = grid.dz_sin(profile.rho_tilde * grid.dz_cos(w))
    return -profile.c_of_rho * (grid.laplacian_h(w) + vert / profile.rho_tilde)


@dataclass
class SpectrumResult:
    """Sorted propagator eigenvalues with their mode labels."""

    entries: list  # (eigenvalue, (k1, k2), vertical_index)
    selfadjoint_residual: float


def propagator_spectrum(
    profile: HydrostaticProfile, grid: SlabGrid, n_eigs: int, seed: int = 0
) -> SpectrumResult:
    """Lowest eigenvalues of the wave propagator, one z-problem per mode.

    The operator decouples per horizontal wavenumber pair into a weighted
    Sturm-Liouville problem in z, solved as a dense generalized symmetric
    eigenproblem in the weighted scalar product. Also measures the
    self-adjointness residual <A u, w>_H - <u, A w>_H on random admissible
    pairs; a large residual fails the solve.
    """
    capacity = grid.nx * grid.ny * (grid.nz + 1) // 4
    if n_eigs > capacity:
        raise EigensolverFailure(f"requested {n_eigs} eigenvalues, capacity {capacity}")
    zops = zops_for(grid.nz)
    col = profile.column()
    cz = profile.gamma * col ** (profile.gamma - 1.0)
    nzp = grid.nz + 1
    interior = np.zeros((grid.nz - 1, nzp))
    interior[np.arange(grid.nz - 1), np.arange(1, grid.nz)] = 1.0
    sin_embed = np.zeros((nzp, grid.nz - 1))
    sin_embed[1:-1, :] = zops.sin_synth
    d_cos_node = sin_embed @ zops.d_cos2sin @ zops.cos_anal
    d_sin_node = zops.cos_synth @ zops.d_sin2cos @ zops.sin_anal @ interior
    lz_node = d_sin_node @ (col[:, None] * d_cos_node)
    weight = grid.wz * col / cz
    # Galerkin restriction to the resolved cosine modes m < nz: the Nyquist
    # mode has an invisible derivative and would pollute the low spectrum
    # with spurious branches.
    basis = zops.cos_synth[:, : grid.nz]
    gram = basis.T @ (weight[:, None] * basis)

    kx = grid.kx_int
    ky = grid.ky_int
    entries = []
    seen = {}
    for i1, k1 in enumerate(kx):
        for i2, k2 in enumerate(ky):
            k2val = (2 * np.pi) ** 2 * (k1**2 + k2**2)
            key = round(k2val, 10)
            if key not in seen:
                a_node = k2val * np.diag(cz) - (cz / col)[:, None] * lz_node
                m = basis.T @ (weight[:, None] * a_node) @ basis
                m = 0.5 * (m + m.T)
                try:
                    vals = scipy.linalg.eigh(m, gram, eigvals_only=True)
                except scipy.linalg.LinAlgError as exc:  # pragma: no cover
                    raise EigensolverFailure(str(exc)) from exc
                seen[key] = np.sort(vals)
            for mz, lam in enumerate(seen[key]):
                entries.append((float(lam), (int(k1), int(k2)), mz))
    entries.sort(key=lambda e: (e[0], abs(e[1][0]) + abs(e[1][1]), e[2]))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        u = _random_admissible_scalar(grid, rng)
        w = _random_admissible_scalar(grid, rng)
        au = acoustic_propagator_apply(u, profile)
        aw = acoustic_propagator_apply(w, profile)
        worst = max(
            worst,
            abs(
                weighted_inner_product(au, w, profile)
                - weighted_inner_product(u, aw, profile)
            ),
        )
    if worst > 1e-10:
        raise EigensolverFailure(
            f"propagator is not self-adjoint to tolerance: residual {worst:.3e}"
        )
    return SpectrumResult(entries=entries[:n_eigs], selfadjoint_residual=worst)


def _random_admissible_scalar(grid: SlabGrid, rng) -> np.ndarray:
    """Unit-normalized low-mode random cosine-parity field."""
    f = grid.zeros()
    for _ in range(6):
        k1, k2 = rng.integers(-3, 4, size=2)
        m = rng.integers(0, 4)
        amp = rng.standard_normal()
        phase = rng.uniform(0, 2 * np.pi)
        f += amp * np.cos(
            2 * np.pi * (k1 * grid.x + k2 * grid.y) + phase
        ) * np.cos(m * np.pi * grid.z)
    return f / max(np.abs(f).max(), 1e-300)


class LinearAcousticStepper:
    """Energy-conserving Crank-Nicolson integrator of the homogeneous
    acoustic system dS/dt = -(1/rho_tilde) div(rho_tilde grad Phi),
    dPhi/dt = -c(rho_tilde) S.

    The per-step flow map is a Cayley transform of an operator that is
    skew-symmetric in the energy form <cS, cS>_H + <A Phi, Phi>_H, so that
    form is conserved to solver round-off at any step size.
    """

    def __init__(self, profile: HydrostaticProfile, dt: float):
        self.profile = profile
        self.grid = profile.grid
        self.dt = dt
        zops = zops_for(self.grid.nz)
        col = profile.column()
        cz = profile.gamma * col ** (profile.gamma - 1.0)
        lz = zops.div_weighted_grad(col)
        mc = zops.mult_cos(cz / col)
        scale = dt * dt / 4.0

        def mode_matrix(k2: float) -> np.ndarray:
            wave = k2 * zops.mult_cos(cz) - mc @ lz
            return np.eye(self.grid.nz + 1) + scale * wave

        self._inv = batched_mode_inverses(self.grid, mode_matrix)

    def _b_apply(self, phi: np.ndarray) -> np.ndarray:
        grid = self.grid
        return (
            grid.div(self.profile.rho_tilde * grid.grad_cos(phi))
            / self.profile.rho_tilde
        )

    def step(self, s: np.ndarray, phi: np.ndarray):
        dt = self.dt
        c = self.profile.c_of_rho
        rhs = phi - dt * c * s + (dt**2 / 4.0) * c * self._b_apply(phi)
        phi_new = apply_mode_inverses(self.grid, self._inv, rhs)
        s_new = s - (dt / 2.0) * self._b_apply(phi + phi_new)
        return s_new, phi_new

    def energy(self, s: np.ndarray, phi: np.ndarray) -> float:
        z = self.profile.c_of_rho * s
        a_phi = -self.profile.c_of_rho * self._b_apply(phi)
        return weighted_inner_product(z, z, self.profile) + weighted_inner_product(
            a_phi, phi, self.profile
        )
