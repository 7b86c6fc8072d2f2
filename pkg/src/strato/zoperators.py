"""Dense vertical-operator algebra in cosine/sine coefficient space.

The per-horizontal-mode solves (weighted Neumann problem, implicit acoustic
step, stratified wave spectrum) all reduce to small dense matrices acting on
the nz+1 cosine coefficients of a column, because every variable coefficient
depends on z only. Building those matrices once per grid/profile keeps the
solves direct and tolerance-free up to linear-algebra round-off.
"""

from __future__ import annotations

import numpy as np


class ZOps:
    """Synthesis/analysis/derivative matrices for one grid's z-direction."""

    def __init__(self, nz: int):
        self.nz = nz
        zj = np.arange(nz + 1) / nz
        m = np.arange(nz + 1)
        # cosine synthesis C[j, m] = cos(m pi z_j) and its inverse
        self.cos_synth = np.cos(np.pi * np.outer(zj, m))
        self.cos_anal = np.linalg.inv(self.cos_synth)
        k = np.arange(1, nz)
        # sine synthesis on interior nodes S[j, k] = sin(k pi z_j)
        self.sin_synth = np.sin(np.pi * np.outer(zj[1:-1], k))
        self.sin_anal = np.linalg.inv(self.sin_synth)
        # d/dz: cosine coeffs -> sine coeffs (Nyquist cosine mode dropped)
        d = np.zeros((nz - 1, nz + 1))
        d[np.arange(nz - 1), np.arange(1, nz)] = -np.pi * k
        self.d_cos2sin = d
        # d/dz: sine coeffs -> cosine coeffs
        d2 = np.zeros((nz + 1, nz - 1))
        d2[np.arange(1, nz), np.arange(nz - 1)] = np.pi * k
        self.d_sin2cos = d2

    def mult_cos(self, fz: np.ndarray) -> np.ndarray:
        """Multiplication by f(z) as a matrix on cosine coefficients."""
        return self.cos_anal @ (fz[:, None] * self.cos_synth)

    def mult_sin(self, fz: np.ndarray) -> np.ndarray:
        """Multiplication by f(z) as a matrix on sine coefficients."""
        return self.sin_anal @ (fz[1:-1, None] * self.sin_synth)

    def div_weighted_grad(self, fz: np.ndarray) -> np.ndarray:
        """d/dz( f(z) d/dz . ) on cosine coefficients."""
        return self.d_sin2cos @ self.mult_sin(fz) @ self.d_cos2sin


_ZOPS_CACHE: dict[int, ZOps] = {}


def zops_for(nz: int) -> ZOps:
    ops = _ZOPS_CACHE.get(nz)
    if ops is None:
        ops = _ZOPS_CACHE[nz] = ZOps(nz)
    return ops


def batched_mode_inverses(grid, column_matrix) -> np.ndarray:
    """Invert `column_matrix(k2)` for every horizontal mode.

    column_matrix maps the scalar |k|^2 (with 2 pi scaling) to the dense
    (nz+1, nz+1) cosine-space operator of that mode. Returns an array of
    shape (nx, ny, nz+1, nz+1) of inverses, computed in one batched call.
    """
    nyr = grid.ny // 2 + 1
    k2 = np.broadcast_to(grid.rk2h_mode, (grid.nx, nyr, 1))[..., 0]
    mats = np.empty((grid.nx, nyr, grid.nz + 1, grid.nz + 1))
    # |k|^2 takes few distinct values; build one matrix per distinct value.
    flat_k2 = k2.ravel()
    uniq, inverse = np.unique(flat_k2.round(12), return_inverse=True)
    stack = np.empty((uniq.size, grid.nz + 1, grid.nz + 1))
    for i, val in enumerate(uniq):
        stack[i] = column_matrix(float(val))
    inv_stack = np.linalg.inv(stack)
    mats.reshape(-1, grid.nz + 1, grid.nz + 1)[:] = inv_stack[inverse]
    return mats


def apply_mode_inverses(grid, inverses: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Apply cached per-mode inverses to a cosine-parity scalar field."""
    rhs_hat = grid.cos_coeffs(grid.hfft(rhs))
    sol_hat = np.einsum("xyij,xyj->xyi", inverses, rhs_hat)
    return grid.hifft(grid.cos_values(sol_hat))
