import os
import tempfile

import numpy as np
import pytest
from scipy.integrate import quad

from strato.core_types import (
    PrimitiveState,
    ScaledParams,
    SlabGrid,
    is_boundary_admissible,
    read_checkpoint,
    reconstruct_theta,
    weighted_inner_product,
    write_checkpoint,
)
from strato.errors import GridMismatch

from conftest import smooth_scalar, smooth_vector


class TestScaledParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            ScaledParams(epsilon=0.0)
        with pytest.raises(ValueError):
            ScaledParams(epsilon=0.1, gamma=1.0)
        with pytest.raises(ValueError):
            ScaledParams(epsilon=0.1, mu=0.0)
        with pytest.raises(ValueError):
            ScaledParams(epsilon=0.1, lambda_bulk=-1.0)
        with pytest.raises(ValueError):
            ScaledParams(epsilon=0.1, nu=-1e-3)
        with pytest.raises(ValueError):
            ScaledParams(epsilon=0.1, g=0.0)

    def test_regime_flags(self):
        assert ScaledParams(epsilon=0.1, gamma=2.0).satisfies_rate_hypothesis()
        assert not ScaledParams(epsilon=0.1, gamma=1.4).satisfies_rate_hypothesis()
        assert ScaledParams(epsilon=0.1, gamma=3.5).in_ill_prepared_regime()
        assert not ScaledParams(epsilon=0.1, gamma=2.0).in_ill_prepared_regime()


class TestSlabGrid:
    def test_size_validation(self):
        for bad in ((3, 8, 8), (8, 7, 8), (8, 8, 2)):
            with pytest.raises(ValueError):
                SlabGrid(*bad)

    def test_derivatives_on_modes(self, grid):
        f = np.cos(2 * np.pi * (2 * grid.x + grid.y)) * np.cos(3 * np.pi * grid.z)
        f = f * np.ones(grid.shape)
        dfx = -4 * np.pi * np.sin(2 * np.pi * (2 * grid.x + grid.y)) * np.cos(3 * np.pi * grid.z)
        assert np.abs(grid.dx(f) - dfx * np.ones(grid.shape)).max() < 1e-12
        dfz = -3 * np.pi * np.cos(2 * np.pi * (2 * grid.x + grid.y)) * np.sin(3 * np.pi * grid.z)
        assert np.abs(grid.dz_cos(f) - dfz * np.ones(grid.shape)).max() < 1e-12
        s = np.sin(2 * np.pi * grid.y) * np.sin(2 * np.pi * grid.z) * np.ones(grid.shape)
        dsz = 2 * np.pi * np.sin(2 * np.pi * grid.y) * np.cos(2 * np.pi * grid.z)
        assert np.abs(grid.dz_sin(s) - dsz * np.ones(grid.shape)).max() < 1e-12

    def test_quadrature_exact_for_modes(self, grid):
        # trapezoid sums annihilate every resolvable nonconstant mode
        for m in range(1, 2 * grid.nz):
            f = np.cos(m * np.pi * grid.z) * np.ones(grid.shape)
            assert abs(grid.integral(f)) < 1e-14
        f = np.cos(2 * np.pi * (3 * grid.x - grid.y)) * np.ones(grid.shape)
        assert abs(grid.integral(f)) < 1e-14

    def test_discrete_integration_by_parts(self, grid):
        rng = np.random.default_rng(11)
        c = smooth_scalar(grid, rng)
        s = smooth_vector(grid, rng)[2]
        lhs = grid.integral(grid.dz_sin(s) * c)
        rhs = -grid.integral(s * grid.dz_cos(c))
        assert abs(lhs - rhs) < 1e-13
        a, b = smooth_scalar(grid, rng), smooth_scalar(grid, rng)
        assert abs(grid.integral(grid.dx(a) * b) + grid.integral(a * grid.dx(b))) < 1e-13


class TestReconstructTheta:
    def test_identity_case(self, grid):
        st = PrimitiveState(np.ones(grid.shape), grid.vector_zeros(), np.ones(grid.shape))
        assert np.array_equal(reconstruct_theta(st), np.ones(grid.shape))

    def test_vacuum_convention(self, grid):
        st = PrimitiveState(grid.zeros(), grid.vector_zeros(), grid.zeros())
        assert np.array_equal(reconstruct_theta(st), np.ones(grid.shape))

    def test_division_case(self, grid):
        eps = 0.1
        rho = 2.0 * np.ones(grid.shape)
        st = PrimitiveState(rho, grid.vector_zeros(), rho * (1 + eps**2 * 0.5))
        expected = (rho * (1 + eps**2 * 0.5)) / rho  # elementwise quotient oracle
        assert np.abs(reconstruct_theta(st) - expected).max() < 1e-15
        assert abs(expected[0, 0, 0] - 1.005) < 1e-15

    def test_floor_must_be_positive(self, grid):
        st = PrimitiveState(np.ones(grid.shape), grid.vector_zeros(), np.ones(grid.shape))
        with pytest.raises(ValueError):
            reconstruct_theta(st, floor=0.0)


class TestWeightedInnerProduct:
    def test_constant_case(self, grid, flat_profile):
        # rho==1, gamma=2 so c==2: integrand 1/2 over the unit-volume slab
        one = np.ones(grid.shape)
        val = weighted_inner_product(one, one, flat_profile)
        oracle = quad(lambda z: 1.0 * 1.0 / 2.0, 0, 1)[0]
        assert abs(val - oracle) < 1e-14

    def test_zero_case(self, grid, flat_profile):
        assert weighted_inner_product(grid.zeros(), np.ones(grid.shape), flat_profile) == 0.0

    def test_orthogonality(self, grid, flat_profile):
        u = np.cos(2 * np.pi * grid.x) * np.ones(grid.shape)
        w = np.sin(2 * np.pi * grid.x) * np.ones(grid.shape)
        oracle = quad(lambda x: np.cos(2 * np.pi * x) * np.sin(2 * np.pi * x), 0, 1)[0]
        assert abs(oracle) < 1e-15
        assert abs(weighted_inner_product(u, w, flat_profile)) < 1e-14

    def test_symmetry_and_positivity(self, grid, profile):
        rng = np.random.default_rng(5)
        for _ in range(10):
            u, w = smooth_scalar(grid, rng), smooth_scalar(grid, rng)
            assert weighted_inner_product(u, w, profile) == weighted_inner_product(
                w, u, profile
            )
            if np.abs(u).max() > 0:
                assert weighted_inner_product(u, u, profile) > 0

    def test_grid_mismatch(self, profile):
        other = SlabGrid(8, 8, 4)
        with pytest.raises(GridMismatch):
            weighted_inner_product(other.zeros(), other.zeros(), profile)


class TestAdmissibility:
    def test_linear_combinations_preserve_admissibility(self, grid):
        rng = np.random.default_rng(9)
        u = smooth_vector(grid, rng)
        w = smooth_vector(grid, rng)
        assert is_boundary_admissible(u)
        for a, b in ((1.0, 1.0), (-2.5, 0.3), (0.0, 7.0)):
            assert is_boundary_admissible(a * u + b * w)

    def test_violation_detected(self, grid):
        v = grid.vector_zeros()
        v[2] += 1.0
        assert not is_boundary_admissible(v)


class TestCheckpoint:
    def test_bit_exact_round_trip(self, grid):
        rng = np.random.default_rng(2)
        fields = {
            "rho": rng.standard_normal(grid.shape),
            "mom1": rng.standard_normal(grid.shape),
            "mom2": rng.standard_normal(grid.shape),
            "mom3": rng.standard_normal(grid.shape),
            "rhoTheta": rng.standard_normal(grid.shape),
        }
        t = 0.1234567890123456789
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "state.strato")
            write_checkpoint(path, grid, fields, t)
            with open(path, "rb") as fh:
                header = fh.readline().decode("ascii").split()
            assert header[:5] == ["STRATO1", "16", "16", "8", "5"]
            grid2, t2, arrays = read_checkpoint(path)
            assert t2 == float(repr(t)) == t
            assert grid2.same_as(grid)
            for name, arr in zip(fields, arrays):
                assert np.array_equal(fields[name], arr)

    def test_rejects_foreign_file(self, grid, tmp_path):
        p = tmp_path / "bogus.strato"
        p.write_bytes(b"NOTSTRATO 1 2 3\n")
        with pytest.raises(ValueError):
            read_checkpoint(p)
