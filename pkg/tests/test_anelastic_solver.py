import numpy as np
import pytest

from strato.anelastic_solver import (
    AnelasticInitSpec,
    constraint_defect,
    kinetic_energy,
    make_anelastic_state,
    project_anelastic,
    step_anelastic,
    transport_extrema_monitor,
)
from strato.core_types import AnelasticState, ScaledParams, SlabGrid
from strato.hydrostatics import solve_hydrostatic
from strato.primitive_solver import StepperConfig
from strato.zoperators import zops_for

from conftest import smooth_scalar, smooth_vector


class TestProjection:
    def test_fixed_point(self, grid, profile):
        rng = np.random.default_rng(1)
        sf = smooth_scalar(grid, rng)
        w = np.stack([-grid.dy(sf), grid.dx(sf), grid.zeros()]) / profile.rho_tilde
        out = project_anelastic(w, profile)
        assert np.abs(out - w).max() < 1e-10

    def test_gradient_killed_for_flat_profile(self, grid, flat_profile):
        rng = np.random.default_rng(2)
        phi = smooth_scalar(grid, rng)
        out = project_anelastic(grid.grad_cos(phi), flat_profile)
        assert np.abs(out).max() < 1e-10 * max(np.abs(grid.grad_cos(phi)).max(), 1.0)

    def test_idempotent(self, grid, profile):
        rng = np.random.default_rng(3)
        w = smooth_vector(grid, rng)
        once = project_anelastic(w, profile)
        twice = project_anelastic(once, profile)
        assert np.abs(twice - once).max() < 1e-10
        assert constraint_defect(once, profile) < 1e-10 * max(np.abs(w).max(), 1.0)


class TestStepping:
    def test_rest_state(self, grid, profile):
        params = ScaledParams(epsilon=0.1, nu=0.01, gamma=2.0)
        s = AnelasticState(grid.vector_zeros(), grid.zeros(), grid.zeros())
        out = step_anelastic(s, params, profile, StepperConfig(dt=1e-3))
        assert np.abs(out.v).max() == 0.0
        assert np.abs(out.t_pert).max() == 0.0
        assert np.abs(out.pi).max() == 0.0

    def test_buoyancy_increment_against_column_oracle(self, grid, profile):
        # v=0, T==1: after one step the velocity equals the projected
        # buoyancy impulse. Oracle: solve the k=0 weighted Neumann column
        # problem with dense matrices built from scratch.
        params = ScaledParams(epsilon=0.1, nu=0.0, gamma=2.0, g=1.0)
        dt = 1e-3
        s = AnelasticState(grid.vector_zeros(), np.ones(grid.shape), grid.zeros())
        out = step_anelastic(s, params, profile, StepperConfig(dt=dt))
        v3 = out.v[2]

        nz = grid.nz
        zops = zops_for(nz)
        col = profile.column()
        force = np.full(nz + 1, params.g)
        force[0] = force[-1] = 0.0  # the forcing enters in the sine subspace
        rhs_cos = zops.d_sin2cos @ (zops.sin_anal @ (col[1:-1] * force[1:-1]))
        lz = zops.div_weighted_grad(col)
        mat = lz.copy()
        for row in (0, nz):
            mat[row, :] = 0.0
            mat[row, row] = 1.0
        rhs_cos[0] = rhs_cos[nz] = 0.0
        psi_cos = np.linalg.solve(mat, rhs_cos)
        dpsi_interior = zops.sin_synth @ (zops.d_cos2sin @ psi_cos)
        projected = force.copy()
        projected[1:-1] -= dpsi_interior
        expected = dt * projected
        assert np.abs(v3[0, 0, :] - expected).max() < 1e-12

        # a horizontally uniform column forcing is a discrete gradient, so
        # the projection absorbs it into the pressure entirely: no flow, but
        # a nonzero, horizontally uniform, hydrostatic pressure increment
        assert np.abs(v3).max() < 1e-12
        assert np.abs(out.pi).max() > 1e-2
        assert np.abs(out.pi - out.pi[:1, :1, :]).max() < 1e-10
        assert abs(grid.integral(out.pi)) < 1e-12

    def test_rigid_translation_transport(self):
        grid = SlabGrid(64, 4, 4)
        profile = solve_hydrostatic(2.0, 1e-12, 1.0, grid)
        params = ScaledParams(epsilon=0.1, nu=0.0, gamma=2.0, g=1e-12)
        v = np.stack([np.ones(grid.shape), grid.zeros(), grid.zeros()])
        t0 = 0.4 * np.sin(2 * np.pi * grid.x) * np.ones(grid.shape)
        s = make_anelastic_state(AnelasticInitSpec(v, t0), profile)
        cfg = StepperConfig(dt=1e-3)
        hist = [s]
        for _ in range(300):
            s = step_anelastic(s, params, profile, cfg)
            hist.append(s)
        exact = 0.4 * np.sin(2 * np.pi * (grid.x - s.time)) * np.ones(grid.shape)
        assert np.abs(s.t_pert - exact).max() < 1e-5
        over, under = transport_extrema_monitor(hist)
        assert over <= 1e-6 and under <= 1e-6
        assert np.abs(s.v - v).max() < 1e-12

    def test_constraint_preserved_each_step(self, grid, profile):
        rng = np.random.default_rng(7)
        params = ScaledParams(epsilon=0.1, nu=0.02, gamma=2.0)
        t0 = 0.3 * smooth_scalar(grid, rng, wall_vanishing=True)
        s = make_anelastic_state(AnelasticInitSpec(smooth_vector(grid, rng, 0.2), t0), profile)
        cfg = StepperConfig(dt=1e-3)
        for _ in range(20):
            s = step_anelastic(s, params, profile, cfg)
            assert constraint_defect(s.v, profile) <= 1e-10

    def test_inviscid_energy_conservation_refines(self, grid, profile):
        params = ScaledParams(epsilon=0.1, nu=0.0, gamma=2.0)
        rng = np.random.default_rng(8)
        s0 = make_anelastic_state(
            AnelasticInitSpec(smooth_vector(grid, rng, 0.3), grid.zeros()), profile
        )
        drifts = []
        for dt in (2e-3, 1e-3):
            s = s0
            e0 = kinetic_energy(s, profile)
            for _ in range(round(0.08 / dt)):
                s = step_anelastic(s, params, profile, StepperConfig(dt=dt))
            drifts.append(abs(kinetic_energy(s, profile) - e0) / e0)
        assert drifts[1] < drifts[0] / 2.5

    def test_pi_gauge_invariance(self, grid, profile):
        params = ScaledParams(epsilon=0.1, nu=0.01, gamma=2.0)
        rng = np.random.default_rng(9)
        t0 = 0.2 * smooth_scalar(grid, rng, wall_vanishing=True)
        s = make_anelastic_state(AnelasticInitSpec(smooth_vector(grid, rng, 0.2), t0), profile)
        cfg = StepperConfig(dt=1e-3)
        a = step_anelastic(s, params, profile, cfg)
        shifted = s.copy()
        shifted.pi = shifted.pi + 42.0
        b = step_anelastic(shifted, params, profile, cfg)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.t_pert, b.t_pert)
        assert abs(grid.integral(a.pi)) < 1e-12 * max(np.abs(a.pi).max(), 1.0)


class TestExtremaMonitor:
    def test_constant_field_exact_zero(self, grid, profile):
        s = AnelasticState(grid.vector_zeros(), np.full(grid.shape, 0.7), grid.zeros())
        hist = [s, s.copy(), s.copy()]
        assert transport_extrema_monitor(hist) == (0.0, 0.0)

    def test_diffusive_control_detected(self, grid, profile):
        rng = np.random.default_rng(10)
        t0 = smooth_scalar(grid, rng, wall_vanishing=True)
        s = AnelasticState(grid.vector_zeros(), t0, grid.zeros())
        # negative control: smear the field toward its mean over time
        hist = [s]
        for k in range(1, 6):
            blurred = s.copy()
            blurred.t_pert = (1 - 0.1 * k) * t0
            blurred.time = 1e-2 * k
            hist.append(blurred)
        over, under = transport_extrema_monitor(hist)
        assert max(over, under) == 0.0  # shrinkage is not range expansion
        grown = s.copy()
        grown.t_pert = 1.2 * t0
        hist.append(grown)
        over, under = transport_extrema_monitor(hist)
        assert max(over, under) > 1e-3

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            transport_extrema_monitor([])
