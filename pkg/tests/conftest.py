import numpy as np
import pytest

from strato.core_types import ScaledParams, SlabGrid
from strato.hydrostatics import solve_hydrostatic


@pytest.fixture(scope="session")
def grid():
    return SlabGrid(16, 16, 8)


@pytest.fixture(scope="session")
def profile(grid):
    return solve_hydrostatic(2.0, 1.0, 1.0, grid)


@pytest.fixture(scope="session")
def flat_profile(grid):
    # g -> 0 limit: rho_tilde == 1, c == gamma
    return solve_hydrostatic(2.0, 0.0, 1.0, grid)


@pytest.fixture
def params():
    return ScaledParams(epsilon=0.1, nu=0.01, gamma=2.0, mu=1.0, lambda_bulk=0.0, g=1.0)


def smooth_scalar(grid, rng, wall_vanishing=False, n_modes=5):
    """Band-limited random scalar with admissible (cosine) parity."""
    f = grid.zeros()
    for _ in range(n_modes):
        k1, k2 = rng.integers(-3, 4, size=2)
        m = rng.integers(1 if wall_vanishing else 0, 4)
        phase = rng.uniform(0, 2 * np.pi)
        zpart = np.sin(m * np.pi * grid.z) if wall_vanishing else np.cos(m * np.pi * grid.z)
        f += rng.standard_normal() * np.cos(2 * np.pi * (k1 * grid.x + k2 * grid.y) + phase) * zpart
    return f * np.ones(grid.shape)


def smooth_vector(grid, rng, amp=1.0):
    """Band-limited random admissible vector (third component sine parity)."""
    v3 = grid.zeros()
    for _ in range(4):
        k1, k2 = rng.integers(-3, 4, size=2)
        m = rng.integers(1, 4)
        v3 += rng.standard_normal() * np.cos(2 * np.pi * (k1 * grid.x + k2 * grid.y)) * np.sin(
            m * np.pi * grid.z
        )
    return amp * np.stack(
        [
            smooth_scalar(grid, rng),
            smooth_scalar(grid, rng),
            grid.sine_restrict(v3 * np.ones(grid.shape)),
        ]
    )
