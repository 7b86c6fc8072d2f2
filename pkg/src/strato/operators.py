"""Shared spatial operators: advection, stress divergence, dissipation.

Vertical parity routing is explicit here. Admissible vectors carry
(cos, cos, sin) parity per component; the flux vector of the vertical
momentum equation carries (sin, sin, cos) instead, so its divergence uses
the cosine-derivative path. Advection uses the energy-consistent split
(skew-symmetric) form: paired with the trapezoid quadrature and the
skew-adjoint spectral derivatives, its kinetic-energy production is exactly
the compression work term, with no spurious drift. Transforms are batched
over components; these functions sit on the per-step hot path.
"""

from __future__ import annotations

import numpy as np

from .core_types import SlabGrid


def div_flux3(grid: SlabGrid, vec: np.ndarray) -> np.ndarray:
    """Divergence of a (sin, sin, cos)-parity flux vector."""
    fh = grid.hfft(vec[:2])
    horiz = grid.hifft(fh[0] * grid._dkx + fh[1] * grid._rdky)
    return horiz + grid.dz_cos(vec[2])


def gradient_tensor(grid: SlabGrid, u: np.ndarray) -> np.ndarray:
    """All nine partials d_j u_i as out[i, j]; parity routed per component."""
    out = np.empty((3, 3) + grid.shape)
    uh = grid.hfft(u)
    out[:, 0] = grid.hifft(uh * grid._dkx)
    out[:, 1] = grid.hifft(uh * grid._rdky)
    out[:2, 2] = grid.dz_cos(u[:2])
    out[2, 2] = grid.dz_sin(u[2])
    return out


def skew_advection(grid: SlabGrid, mom: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Split-form advection 0.5*[div(mom u_i) + mom.grad(u_i) + u_i div(mom)].

    Discretely momentum conserving, and kinetic-energy neutral up to the
    compression term 0.5*<|u|^2, div mom>.
    """
    divm = grid.div(mom)
    uh = grid.hfft(u)
    dxu = grid.hifft(uh * grid._dkx)
    dyu = grid.hifft(uh * grid._rdky)
    dzu01 = grid.dz_cos(u[:2])
    dzu2 = grid.dz_sin(u[2])
    adv = mom[0] * dxu + mom[1] * dyu
    adv[:2] += mom[2] * dzu01
    adv[2] += mom[2] * dzu2

    flux_h = grid.hfft(np.stack([mom[0] * u, mom[1] * u]))
    conv = grid.hifft(flux_h[0] * grid._dkx + flux_h[1] * grid._rdky)
    flux_z = mom[2] * u
    conv[:2] += grid.dz_sin(flux_z[:2])
    conv[2] += grid.dz_cos(flux_z[2])
    return 0.5 * (conv + adv + u * divm)


def skew_scalar_advection(
    grid: SlabGrid, weight: np.ndarray, v: np.ndarray, scalar: np.ndarray
) -> np.ndarray:
    """Skew transport tendency -0.5*[v.grad(s) + div(w v s)/w] of a scalar.

    `weight` is the z-only density weighting the conserved quadratic
    integral of s (the equilibrium column for the constrained solver).
    """
    conv = grid.div(weight * v * scalar) / weight
    gh = grid.grad_h(scalar)
    adv = v[0] * gh[0] + v[1] * gh[1] + v[2] * grid.dz_cos(scalar)
    return -0.5 * (conv + adv)


def stress_divergence(grid: SlabGrid, u: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """div S(grad u) for the Newtonian stress with constant mu, lambda.

    Reduces to mu*(Lap u + grad(div u)/3) + lam*grad(div u). The horizontal
    Laplacian uses the Nyquist-zeroed wavenumbers of the composed first
    derivatives so the dissipation bookkeeping closes exactly.
    """
    divu = grid.div(u)
    gdiv = grid.grad_cos(divu)
    lap = grid.hifft(grid.hfft(u) * (-grid.rk2h_mode))
    lap[:2] += grid.dz_sin(grid.dz_cos(u[:2]))
    lap[2] += grid.dz_cos(grid.dz_sin(u[2]))
    return mu * (lap + gdiv / 3.0) + lam * gdiv


def dissipation_density(grid: SlabGrid, u: np.ndarray, mu: float, lam: float) -> np.ndarray:
    """Pointwise S(grad u):grad u; nonnegative for mu > 0, lam >= 0."""
    g = gradient_tensor(grid, u)
    sym2 = g + np.swapaxes(g, 0, 1)
    divu = g[0, 0] + g[1, 1] + g[2, 2]
    return 0.5 * mu * np.sum(sym2**2, axis=(0, 1)) + (lam - 2.0 * mu / 3.0) * divu**2


def traceless_shear_check(grid: SlabGrid, u: np.ndarray) -> float:
    """Max |trace| of the deviatoric part grad u + grad u^T - (2/3) div u I."""
    g = gradient_tensor(grid, u)
    divu = g[0, 0] + g[1, 1] + g[2, 2]
    trace = 2.0 * divu - 3.0 * (2.0 / 3.0) * divu
    return float(np.abs(trace).max())
