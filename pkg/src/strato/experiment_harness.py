"""Experiment orchestration: configs, paired runs, sweeps, rate fits.

A run integrates the compressible and constrained systems on the same grid
and time axis from shared perturbation shapes, records the monitor row at
fixed step intervals, and leaves behind `diagnostics.csv`, final `.strato`
checkpoints and a `manifest.json` with content hashes. Sweeps repeat the
run over decreasing (epsilon, nu) pairs with identical shapes and fit the
observed convergence order. Identical config, seed and thread count give
bitwise-identical CSV output; sweep members never share files.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .anelastic_solver import (
    AnelasticInitSpec,
    constraint_defect,
    kinetic_energy,
    make_anelastic_state,
    step_anelastic,
)
from .core_types import (
    PrimitiveState,
    ScaledParams,
    SlabGrid,
    theta_perturbation,
    write_checkpoint,
)
from .diagnostics import (
    DiagnosticsRecord,
    acoustic_analysis,
    relative_energy,
    thm1_metric,
    uniform_bound_monitors,
)
from .errors import ConfigError, DegeneratePoints
from .hydrostatics import HydrostaticProfile, solve_hydrostatic
from .operators import dissipation_density
from .primitive_solver import (
    InitialDataSpec,
    PrimitiveStepper,
    StepperConfig,
    assemble_initial_state,
    energy_parts,
    suggested_dt,
)

PRESETS = (
    "equilibrium",
    "well_prepared_rate",
    "ill_prepared_qualitative",
    "manufactured_convergence",
)


@dataclass
class ExperimentConfig:
    """Validated bundle of grid, parameters, data and run controls."""

    nx: int = 32
    ny: int = 32
    nz: int = 16
    epsilon: float = 0.1
    nu: float = 0.1
    gamma: float = 2.0
    mu: float = 1.0
    lambda_bulk: float = 0.0
    g: float = 1.0
    rho_bottom: float = 1.0
    preset: str = "well_prepared_rate"
    amplitude: float = 0.25
    theta_amplitude: float = 0.5
    rho1_amplitude: float = 0.0
    bound_d: float = 10.0
    seed: int = 0
    dt: float = 0.0  # 0 selects the advective/viscous limit automatically
    cfl_advective: float = 0.4
    implicit_tol: float = 1e-12
    implicit_max_iter: int = 50
    final_time: float = 0.5
    record_interval: int = 20
    output_dir: str = "out"
    write_checkpoints: bool = True
    sweep_epsilon: list = field(default_factory=list)
    sweep_nu: list = field(default_factory=list)

    def validate(self) -> "ExperimentConfig":
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if self.final_time <= 0:
            raise ConfigError("final_time must be positive")
        if self.record_interval < 1:
            raise ConfigError("record_interval must be >= 1")
        if self.epsilon <= 0 and not self.sweep_epsilon:
            raise ConfigError("epsilon must be positive (the limit itself is not run)")
        for name, lst in (("epsilon", self.sweep_epsilon), ("nu", self.sweep_nu)):
            if lst:
                arr = np.asarray(lst, dtype=float)
                if (arr <= 0).any():
                    raise ConfigError(f"sweep {name} values must be positive")
                if not (np.diff(arr) < 0).all():
                    raise ConfigError(f"sweep {name} values must be strictly decreasing")
        if self.sweep_epsilon and self.sweep_nu and len(self.sweep_epsilon) != len(
            self.sweep_nu
        ):
            raise ConfigError("sweep epsilon and nu lists must have equal length")
        if self.preset == "well_prepared_rate" and self.gamma <= 1.5:
            raise ConfigError("the rate preset requires gamma > 3/2")
        return self

    def params(self, epsilon=None, nu=None) -> ScaledParams:
        return ScaledParams(
            epsilon=self.epsilon if epsilon is None else epsilon,
            nu=self.nu if nu is None else nu,
            gamma=self.gamma,
            mu=self.mu,
            lambda_bulk=self.lambda_bulk,
            g=self.g,
        )

    def canonical_dict(self) -> dict:
        return {k: v for k, v in sorted(asdict(self).items())}

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


_SECTION_KEYS = {
    "grid": ("nx", "ny", "nz"),
    "params": ("epsilon", "nu", "gamma", "mu", "lambda_bulk", "g", "rho_bottom"),
    "initial": (
        "preset",
        "amplitude",
        "theta_amplitude",
        "rho1_amplitude",
        "bound_d",
        "seed",
    ),
    "stepper": (
        "dt",
        "cfl_advective",
        "implicit_tol",
        "implicit_max_iter",
        "final_time",
    ),
    "output": ("output_dir", "record_interval", "write_checkpoints"),
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    kwargs = {}
    for section, keys in _SECTION_KEYS.items():
        body = raw.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in keys:
            alias = "dir" if key == "output_dir" else key
            if alias in body:
                kwargs[key] = body[alias]
        extra = set(body) - {("dir" if k == "output_dir" else k) for k in keys}
        if extra:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(extra)}")
    sweep = raw.get("sweep", {})
    if sweep:
        kwargs["sweep_epsilon"] = list(sweep.get("epsilon", []))
        kwargs["sweep_nu"] = list(sweep.get("nu", []))
    known_sections = set(_SECTION_KEYS) | {"sweep"}
    unknown = set(raw) - known_sections
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        return ExperimentConfig(**kwargs).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a TOML (or JSON) experiment config file."""
    text = Path(path).read_bytes()
    if str(path).endswith(".json"):
        raw = json.loads(text)
    else:
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        raw = tomllib.loads(text.decode())
    return config_from_dict(raw)


# -- initial data shapes -----------------------------------------------------


def _low_mode_scalar(grid: SlabGrid, rng, n_modes: int = 4, wall_vanishing=True):
    """Deterministic smooth random field; optionally zero on the walls."""
    f = grid.zeros()
    for _ in range(n_modes):
        k1, k2 = rng.integers(-2, 3, size=2)
        m = rng.integers(1, 3)
        phase = rng.uniform(0, 2 * np.pi)
        zshape = np.sin(m * np.pi * grid.z) if wall_vanishing else np.cos(m * np.pi * grid.z)
        f += rng.standard_normal() * np.cos(
            2 * np.pi * (k1 * grid.x + k2 * grid.y) + phase
        ) * zshape
    peak = np.abs(f).max()
    return f / peak if peak > 0 else f


def build_shared_shapes(config: ExperimentConfig, grid: SlabGrid) -> dict:
    """Seeded perturbation shapes shared by both systems (and all sweep runs)."""
    rng = np.random.default_rng(config.seed)
    one = np.ones(grid.shape)
    amp = config.amplitude
    v_raw = np.stack(
        [
            amp * np.cos(np.pi * grid.z) * np.sin(2 * np.pi * grid.y) * one
            + 0.5 * amp * _low_mode_scalar(grid, rng, wall_vanishing=False),
            amp * np.sin(2 * np.pi * grid.x) * one
            + 0.5 * amp * _low_mode_scalar(grid, rng, wall_vanishing=False),
            grid.sine_restrict(
                0.6 * amp * np.sin(np.pi * grid.z) * np.cos(2 * np.pi * grid.x) * one
            ),
        ]
    )
    t0 = config.theta_amplitude * (
        np.cos(2 * np.pi * grid.x) * np.sin(np.pi * grid.z) * one
        + 0.3 * _low_mode_scalar(grid, rng)
    )
    rho1 = config.rho1_amplitude * (
        np.cos(2 * np.pi * grid.y) * np.cos(np.pi * grid.z) * one
        + 0.3 * _low_mode_scalar(grid, rng, wall_vanishing=False)
    )
    if config.preset == "equilibrium":
        v_raw = grid.vector_zeros()
        t0 = grid.zeros()
        rho1 = grid.zeros()
    if config.preset == "ill_prepared_qualitative":
        # O(1) rescaled perturbations that excite the fast oscillations:
        # an unbalanced gradient-type velocity plus a density offset
        pot = _low_mode_scalar(grid, rng, wall_vanishing=False)
        v_raw = v_raw + 0.8 * config.amplitude * grid.grad_cos(pot) / max(
            np.abs(grid.grad_cos(pot)).max(), 1e-300
        )
        if config.rho1_amplitude == 0.0:
            rho1 = 0.5 * (
                np.cos(2 * np.pi * grid.x) * np.cos(np.pi * grid.z) * one
                + 0.3 * _low_mode_scalar(grid, rng, wall_vanishing=False)
            )
    return {"v_raw": v_raw, "t0": t0, "rho1": rho1}


def build_profile(config: ExperimentConfig, grid: SlabGrid) -> HydrostaticProfile:
    return solve_hydrostatic(config.gamma, config.g, config.rho_bottom, grid)


def paired_dt(
    config: ExperimentConfig,
    grid: SlabGrid,
    params: ScaledParams,
    profile: HydrostaticProfile,
    u_max: float,
) -> float:
    """Shared step for the pair; honors the stiffer constrained viscosity."""
    if config.dt > 0:
        return config.dt
    dt = suggested_dt(grid, params, u_max, config.cfl_advective)
    if params.nu > 0:
        k2max = float(grid.k2h_mode.max()) + (np.pi * (grid.nz - 1)) ** 2
        coeff = (params.nu / float(profile.rho_tilde.min())) * (
            4.0 * params.mu / 3.0 + params.lambda_bulk
        )
        dt = min(dt, 1.8 / (coeff * k2max))
    return dt


@dataclass
class RunResult:
    """File layout and headline numbers of one paired run."""

    output_dir: str
    csv_path: str
    manifest_path: str
    sup_metric: float
    records: list
    epsilon: float
    nu: float


def _record(
    state: PrimitiveState,
    target,
    params: ScaledParams,
    profile: HydrostaticProfile,
    diss_accum: float,
) -> DiagnosticsRecord:
    grid = profile.grid
    kin, internal = energy_parts(state, params, grid)
    monitors = uniform_bound_monitors(state, profile, params)
    _, vortical, acoustic = acoustic_analysis(state, profile, params)
    tp = theta_perturbation(state, params.epsilon)
    return DiagnosticsRecord(
        time=state.time,
        kinetic_energy=kin,
        internal_energy_scaled=internal,
        total_energy=kin + internal,
        dissipation_integral=diss_accum,
        relative_energy=relative_energy(
            state, profile.rho_tilde, target.v, params, grid
        ),
        thm1_metric=thm1_metric(state, target, profile, params),
        mass=grid.integral(state.rho),
        rho_theta_total=grid.integral(state.rho_theta),
        theta_pert_linf=monitors["B11"],
        theta_pert_l1=monitors["B15"],
        residual_measure=monitors["residual_measure"],
        acoustic_energy=acoustic,
        vortical_energy=vortical,
        theta_sq_moment=grid.integral(state.rho * tp**2),
        anelastic_kinetic=kinetic_energy(target, profile),
        constraint_defect=constraint_defect(target.v, profile),
    )


def run_paired(config: ExperimentConfig, output_dir=None) -> RunResult:
    """Integrate the pair and persist CSV, checkpoints, and the manifest."""
    config.validate()
    if config.preset == "manufactured_convergence":
        return run_convergence_study(config, output_dir)
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = SlabGrid(config.nx, config.ny, config.nz)
    profile = build_profile(config, grid)
    params = config.params()
    shapes = build_shared_shapes(config, grid)

    target = make_anelastic_state(
        AnelasticInitSpec(shapes["v_raw"], shapes["t0"]), profile
    )
    u0 = shapes["v_raw"] if config.preset == "ill_prepared_qualitative" else target.v
    data = InitialDataSpec(
        kind="ill_prepared"
        if config.preset == "ill_prepared_qualitative"
        else "well_prepared",
        rho1=shapes["rho1"],
        u0=u0,
        theta2=shapes["t0"],
        bound_d=config.bound_d,
    )
    state = assemble_initial_state(data, params, profile)

    u_max = float(np.abs(state.velocity()).max())
    dt = paired_dt(config, grid, params, profile, u_max)
    n_steps = max(1, int(np.ceil(config.final_time / dt - 1e-12)))
    dt = config.final_time / n_steps
    cfg = StepperConfig(
        dt=dt,
        cfl_advective=config.cfl_advective,
        implicit_tol=config.implicit_tol,
        implicit_max_iter=config.implicit_max_iter,
    )
    stepper = PrimitiveStepper(params, profile, cfg)

    manifest = {
        "config": config.canonical_dict(),
        "config_hash": config.config_hash(),
        "code_version": __version__,
        "dt": dt,
        "steps": n_steps,
        "complete": False,
        "outputs": {},
    }
    csv_path = out / "diagnostics.csv"
    records = []
    diss_accum = 0.0
    prev_diss_rate = None
    sup = 0.0
    try:
        rec = _record(state, target, params, profile, diss_accum)
        records.append(rec)
        sup = rec.thm1_metric
        for k in range(n_steps):
            state = stepper.step(state)
            target = step_anelastic(target, params, profile, cfg)
            if params.nu > 0:
                rate = params.nu * grid.integral(
                    dissipation_density(
                        grid, state.velocity(), params.mu, params.lambda_bulk
                    )
                )
                if prev_diss_rate is None:
                    prev_diss_rate = rate
                diss_accum += 0.5 * dt * (rate + prev_diss_rate)
                prev_diss_rate = rate
            if (k + 1) % config.record_interval == 0 or k == n_steps - 1:
                rec = _record(state, target, params, profile, diss_accum)
                records.append(rec)
                sup = max(sup, rec.thm1_metric)
    except Exception:
        _write_csv(csv_path, records)
        manifest["outputs"] = _hash_outputs([csv_path])
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        raise

    _write_csv(csv_path, records)
    written = [csv_path]
    if config.write_checkpoints:
        prim_path = out / "primitive_final.strato"
        write_checkpoint(
            prim_path,
            grid,
            {
                "rho": state.rho,
                "mom1": state.mom[0],
                "mom2": state.mom[1],
                "mom3": state.mom[2],
                "rhoTheta": state.rho_theta,
                "rho_tilde": profile.rho_tilde,
            },
            state.time,
        )
        an_path = out / "anelastic_final.strato"
        write_checkpoint(
            an_path,
            grid,
            {
                "v1": target.v[0],
                "v2": target.v[1],
                "v3": target.v[2],
                "T_pert": target.t_pert,
                "Pi": target.pi,
                "rho_tilde": profile.rho_tilde,
            },
            target.time,
        )
        written += [prim_path, an_path]
    manifest["complete"] = True
    manifest["sup_metric"] = sup
    manifest["outputs"] = _hash_outputs(written)
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return RunResult(
        output_dir=str(out),
        csv_path=str(csv_path),
        manifest_path=str(manifest_path),
        sup_metric=sup,
        records=records,
        epsilon=params.epsilon,
        nu=params.nu,
    )


def _write_csv(path, records) -> None:
    lines = [DiagnosticsRecord.csv_header()]
    lines += [r.csv_row() for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def _hash_outputs(paths) -> dict:
    out = {}
    for p in paths:
        out[Path(p).name] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
    return out


# -- sweeps and rate fitting --------------------------------------------------


@dataclass
class RateFitResult:
    points: list  # (eps + nu, sup_metric)
    fitted_order: float
    fit_residual: float


def fit_rate(points) -> RateFitResult:
    """Least-squares slope of log(sup metric) against log(eps + nu)."""
    pts = [(float(x), float(m)) for x, m in points]
    if len(pts) < 3:
        raise DegeneratePoints(f"need at least 3 points, got {len(pts)}")
    if any(m <= 0 for _, m in pts):
        raise DegeneratePoints("zero metric cannot be rate-fitted (equilibrium data)")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    coeffs, residuals, *_ = np.polyfit(x, y, 1, full=True)
    rms = float(np.sqrt(residuals[0] / len(pts))) if len(residuals) else 0.0
    return RateFitResult(points=pts, fitted_order=float(coeffs[0]), fit_residual=rms)


def _sweep_member(args):
    config, eps, nu, outdir = args
    member = replace(config, epsilon=eps, nu=nu, sweep_epsilon=[], sweep_nu=[])
    result = run_paired(member, output_dir=outdir)
    return eps, nu, result.sup_metric, result.output_dir


def run_sweep(config: ExperimentConfig, threads: int = 1):
    """Run every (epsilon, nu) pair; write per-run artifacts plus rate.csv."""
    config.validate()
    eps_list = list(config.sweep_epsilon) or [config.epsilon]
    nu_list = list(config.sweep_nu) or [config.nu] * len(eps_list)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for eps, nu in zip(eps_list, nu_list):
        subdir = out / f"eps{eps:.6g}_nu{nu:.6g}"
        jobs.append((config, eps, nu, str(subdir)))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_member, jobs))
    else:
        rows = [_sweep_member(j) for j in jobs]
    rows.sort(key=lambda r: -(r[0] + r[1]))
    rate_path = out / "rate.csv"
    lines = ["epsilon,nu,eps_plus_nu,sup_metric"]
    lines += [f"{e!r},{n!r},{e + n!r},{m!r}" for e, n, m, _ in rows]
    rate_path.write_text("\n".join(lines) + "\n")
    fit = None
    if len(rows) >= 3 and all(m > 0 for _, _, m, _ in rows):
        fit = fit_rate([(e + n, m) for e, n, m, _ in rows])
        (out / "rate_fit.json").write_text(
            json.dumps(
                {
                    "fitted_order": fit.fitted_order,
                    "fit_residual": fit.fit_residual,
                    "points": fit.points,
                },
                indent=2,
                sort_keys=True,
            )
        )
    return rows, fit


# -- refinement study ----------------------------------------------------------


def _restrict(fine: np.ndarray, factor: int) -> np.ndarray:
    return fine[..., ::factor, ::factor, ::factor]


def _integrate_pair_to_states(config, grid, n_steps):
    profile = build_profile(config, grid)
    params = config.params()
    shapes = build_shared_shapes(config, grid)
    target = make_anelastic_state(AnelasticInitSpec(shapes["v_raw"], shapes["t0"]), profile)
    data = InitialDataSpec("well_prepared", shapes["rho1"], target.v, shapes["t0"], config.bound_d)
    state = assemble_initial_state(data, params, profile)
    cfg = StepperConfig(dt=config.final_time / n_steps, implicit_tol=config.implicit_tol,
                        implicit_max_iter=config.implicit_max_iter)
    stepper = PrimitiveStepper(params, profile, cfg)
    for _ in range(n_steps):
        state = stepper.step(state)
        target = step_anelastic(target, params, profile, cfg)
    return state, target


def run_convergence_study(config: ExperimentConfig, output_dir=None) -> RunResult:
    """Temporal and spatial self-convergence orders via refinement.

    Temporal: three dt levels on a fixed grid, Richardson ratios. Spatial:
    two grids against a finer reference, restricted to shared nodes.
    """
    out = Path(output_dir if output_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = SlabGrid(config.nx, config.ny, config.nz)
    base_dt = paired_dt(
        config, grid, config.params(), build_profile(config, grid), 1.0
    )

    def state_diff(a, b):
        return max(
            float(np.abs(a.rho - b.rho).max()),
            float(np.abs(a.mom - b.mom).max()),
            float(np.abs(a.rho_theta - b.rho_theta).max()),
        )

    # start four refinements below the stability limit so the three levels
    # sit inside the asymptotic range of the scheme
    n0 = 4 * max(1, int(np.ceil(config.final_time / base_dt)))
    sols = [_integrate_pair_to_states(config, grid, n0 * f)[0] for f in (1, 2, 4)]
    e_coarse = state_diff(sols[0], sols[1])
    e_fine = state_diff(sols[1], sols[2])
    temporal_order = float(np.log2(e_coarse / e_fine))

    grids = [
        SlabGrid(config.nx // 2, config.ny // 2, config.nz // 2),
        SlabGrid(config.nx, config.ny, config.nz),
        SlabGrid(2 * config.nx, 2 * config.ny, 2 * config.nz),
    ]
    # the shared reference dt must satisfy the finest grid's explicit limits
    dt_fine = paired_dt(
        replace(config, nx=grids[-1].nx, ny=grids[-1].ny, nz=grids[-1].nz),
        grids[-1],
        config.params(),
        build_profile(config, grids[-1]),
        1.0,
    )
    n_ref = max(2, int(np.ceil(config.final_time / min(base_dt, dt_fine))) * 4)
    fields = []
    for gobj, factor in zip(grids, (1, 2, 4)):
        st, _ = _integrate_pair_to_states(
            replace(config, nx=gobj.nx, ny=gobj.ny, nz=gobj.nz), gobj, n_ref
        )
        fields.append(_restrict(st.rho, factor))
    es_coarse = float(np.abs(fields[0] - fields[2]).max())
    es_fine = float(np.abs(fields[1] - fields[2]).max())
    spatial_order = float(np.log2(es_coarse / max(es_fine, 1e-300)))

    payload = {
        "temporal_order": temporal_order,
        "temporal_errors": [e_coarse, e_fine],
        "spatial_order": spatial_order,
        "spatial_errors": [es_coarse, es_fine],
        "config_hash": config.config_hash(),
        "code_version": __version__,
        "complete": True,
    }
    csv_path = out / "convergence.csv"
    csv_path.write_text(
        "quantity,coarse_error,fine_error,order\n"
        f"temporal,{e_coarse!r},{e_fine!r},{temporal_order!r}\n"
        f"spatial,{es_coarse!r},{es_fine!r},{spatial_order!r}\n"
    )
    payload["outputs"] = _hash_outputs([csv_path])
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return RunResult(
        output_dir=str(out),
        csv_path=str(csv_path),
        manifest_path=str(manifest_path),
        sup_metric=float("nan"),
        records=[],
        epsilon=config.epsilon,
        nu=config.nu,
    )
