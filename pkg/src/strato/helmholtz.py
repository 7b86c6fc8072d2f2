"""Weighted Helmholtz decomposition w = P(w) + rho_tilde * Q(w).

Q(w) = grad(Psi) where Psi solves the weighted Neumann problem
div(rho_tilde grad Psi) = div w with vanishing relative flux at the walls;
P(w) = w - rho_tilde grad Psi is then divergence-free with zero normal
trace. The vertical problem decouples per horizontal Fourier mode into a
small dense solve in z (the coefficient depends on z only), so the
decomposition is direct: no iteration, accuracy at linear-algebra round-off.
Psi is fixed mean-zero, replacing the decay-at-infinity gauge that has no
analogue on the torus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_types import SlabGrid
from .errors import IncompatibleData, NoConvergence
from .hydrostatics import HydrostaticProfile
from .zoperators import apply_mode_inverses, batched_mode_inverses, zops_for

DEFAULT_TOL = 1e-10


@dataclass
class NeumannSolveResult:
    """Solution of the weighted Neumann problem with its discrete defect."""

    psi: np.ndarray
    residual: float
    iterations: int


class WeightedNeumannSolver:
    """Cached per-mode direct solver for div(rho_tilde grad Psi) = rhs."""

    def __init__(self, profile: HydrostaticProfile):
        self.profile = profile
        self.grid = profile.grid
        zops = zops_for(self.grid.nz)
        col = profile.column()
        lz = zops.div_weighted_grad(col)
        mcos = zops.mult_cos(col)

        def mode_matrix(k2: float) -> np.ndarray:
            mat = lz - k2 * mcos
            if k2 == 0.0:
                # Constants are in the kernel (mean-zero gauge pins them) and
                # so is the Nyquist cosine mode, whose derivative vanishes on
                # the grid; our divergences never produce it, so pin it to 0.
                mat = mat.copy()
                for row in (0, self.grid.nz):
                    mat[row, :] = 0.0
                    mat[row, row] = 1.0
            return mat

        self._inverses = batched_mode_inverses(self.grid, mode_matrix)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Return the mean-zero potential for a cosine-parity right side."""
        return apply_mode_inverses(self.grid, self._inverses, rhs)


def neumann_solver_for(profile: HydrostaticProfile) -> WeightedNeumannSolver:
    solver = getattr(profile, "_neumann_solver", None)
    if solver is None:
        solver = WeightedNeumannSolver(profile)
        profile._neumann_solver = solver
    return solver


def _check_admissible(grid: SlabGrid, w: np.ndarray) -> None:
    scale = max(float(np.abs(w).max()), 1.0)
    wall = max(float(np.abs(w[2][..., 0]).max()), float(np.abs(w[2][..., -1]).max()))
    if wall > 1e-10 * scale:
        raise IncompatibleData(
            f"vertical component does not vanish at the walls (max {wall:.3e})"
        )


def solve_weighted_neumann(
    w: np.ndarray, profile: HydrostaticProfile, tol: float = DEFAULT_TOL
) -> NeumannSolveResult:
    """Solve div(rho_tilde grad Psi) = div w for a mean-zero Psi."""
    grid = profile.grid
    grid.check_field(w[0], "w")
    _check_admissible(grid, w)
    rhs = grid.div(w)
    compat = abs(grid.integral(rhs))
    if compat > 1e-10 * max(float(np.abs(rhs).max()), 1.0):
        raise IncompatibleData(f"right side integrates to {compat:.3e}, not zero")
    psi = neumann_solver_for(profile).solve(rhs)
    defect = grid.div(profile.rho_tilde * grid.grad_cos(psi)) - rhs
    residual = float(np.abs(defect).max())
    if residual > tol:
        raise NoConvergence(f"Neumann residual {residual:.3e} exceeds tol {tol:.3e}")
    return NeumannSolveResult(psi=psi, residual=residual, iterations=1)


def decompose(w: np.ndarray, profile: HydrostaticProfile):
    """Split w into (P_part, Q_part) with w = P_part + rho_tilde * Q_part."""
    result = solve_weighted_neumann(w, profile)
    q_part = profile.grid.grad_cos(result.psi)
    p_part = w - profile.rho_tilde * q_part
    return p_part, q_part
