"""Command-line entry point: run, sweep, fit, spectrum, check, info."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core_types import PrimitiveState, SlabGrid, reconstruct_theta
from .errors import ConfigError, DegeneratePoints, StratoError
from .experiment_harness import (
    ExperimentConfig,
    fit_rate,
    load_config,
    run_paired,
    run_sweep,
)
from .hydrostatics import check_equilibrium_identity, solve_hydrostatic


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors (2 is reserved for runtime)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="strato", description=__doc__)
    parser.add_argument("--version", action="version", version=f"strato {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="TOML/JSON config file")
        p.add_argument("--output", type=str, default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override data seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="parallel runs (sweep only); env STRATO_THREADS overrides",
        )

    for name, desc in (
        ("run", "one paired run of the current config"),
        ("sweep", "run every (epsilon, nu) pair and fit the rate"),
        ("check", "run the quick invariant suite"),
        ("info", "print the resolved configuration"),
        ("spectrum", "compute the wave-propagator spectrum"),
    ):
        p = sub.add_parser(name, help=desc)
        common(p)
        if name == "spectrum":
            p.add_argument("--n", type=int, default=20, help="number of eigenvalues")

    pf = sub.add_parser("fit", help="fit a convergence order to a rate CSV")
    pf.add_argument("rate_csv", type=str, help="rate.csv produced by `sweep`")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig().validate()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed).validate()
    if getattr(args, "output", None) is not None:
        config = replace(config, output_dir=args.output).validate()
    return config


def _resolve_threads(args) -> int:
    env = os.environ.get("STRATO_THREADS")
    if env is not None:
        return max(1, int(env))
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    return 1


def _cmd_run(args) -> int:
    config = _resolve_config(args)
    result = run_paired(config)
    print(f"run complete: sup-metric {result.sup_metric!r}")
    print(f"wrote {result.csv_path} and {result.manifest_path}")
    return 0


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    rows, fit = run_sweep(config, threads=_resolve_threads(args))
    for eps, nu, metric, outdir in rows:
        print(f"eps={eps} nu={nu}: sup-metric {metric!r} -> {outdir}")
    if fit is not None:
        print(f"fitted order in (eps + nu): {fit.fitted_order:.4f}")
    return 0


def _cmd_fit(args) -> int:
    path = Path(args.rate_csv)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    try:
        xi = header.index("eps_plus_nu")
        mi = header.index("sup_metric")
    except ValueError:
        print(f"rate CSV missing required columns: {header}", file=sys.stderr)
        return 1
    pts = []
    for line in lines[1:]:
        cells = line.split(",")
        pts.append((float(cells[xi]), float(cells[mi])))
    fit = fit_rate(pts)
    out = path.with_name("rate_fit.json")
    out.write_text(
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
    print(f"fitted order {fit.fitted_order:.6f} (residual {fit.fit_residual:.3e})")
    print(f"wrote {out}")
    return 0


def _cmd_spectrum(args) -> int:
    from .diagnostics import propagator_spectrum

    config = _resolve_config(args)
    grid = SlabGrid(config.nx, config.ny, config.nz)
    profile = solve_hydrostatic(config.gamma, config.g, config.rho_bottom, grid)
    result = propagator_spectrum(profile, grid, args.n, seed=config.seed)
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "spectrum.csv"
    lines = ["eigenvalue,k1,k2,vertical_index"]
    lines += [f"{lam!r},{k1},{k2},{m}" for lam, (k1, k2), m in result.entries]
    path.write_text("\n".join(lines) + "\n")
    print(f"self-adjointness residual {result.selfadjoint_residual:.3e}")
    print(f"wrote {path}")
    return 0


def _cmd_info(args) -> int:
    config = _resolve_config(args)
    print(f"strato {__version__}")
    print(json.dumps(config.canonical_dict(), indent=2, sort_keys=True))
    print(f"config hash: {config.config_hash()}")
    return 0


def _cmd_check(args) -> int:
    """Fast invariant battery on a small grid; exit 0 only if all pass."""
    from . import anelastic_solver as an
    from . import diagnostics as dg
    from . import helmholtz as hh
    from . import primitive_solver as ps

    config = _resolve_config(args)
    checks = []
    grid = SlabGrid(16, 16, 8)
    profile = solve_hydrostatic(config.gamma, config.g, config.rho_bottom, grid)
    params = config.params()
    rng = np.random.default_rng(config.seed)

    resid = check_equilibrium_identity(profile)
    checks.append(("hydrostatic identity", resid, 1e-10))

    w = np.stack(
        [grid.cos_values(grid.cos_coeffs(rng.standard_normal(grid.shape))) for _ in range(2)]
        + [grid.sin_values(grid.sin_coeffs(rng.standard_normal(grid.shape)))]
    )
    p_part, q_part = hh.decompose(w, profile)
    checks.append(
        ("helmholtz reconstruction", float(np.abs(p_part + profile.rho_tilde * q_part - w).max()), 1e-12)
    )
    checks.append(("helmholtz div P", float(np.abs(grid.div(p_part)).max()), 1e-10))
    p2, q2 = hh.decompose(p_part, profile)
    checks.append(("helmholtz idempotence", float(np.abs(p2 - p_part).max()), 1e-10))

    spec = dg.propagator_spectrum(profile, grid, 10, seed=config.seed)
    checks.append(("propagator self-adjointness", spec.selfadjoint_residual, 1e-10))

    st = PrimitiveState(profile.rho_tilde.copy(), grid.vector_zeros(), profile.rho_tilde.copy())
    cfg = ps.StepperConfig(dt=2e-3)
    stepper = ps.PrimitiveStepper(params, profile, cfg)
    s = st
    for _ in range(20):
        s = stepper.step(s)
    drift = max(
        float(np.abs(s.rho - profile.rho_tilde).max()),
        float(np.abs(s.mom).max()),
        float(np.abs(s.rho_theta - profile.rho_tilde).max()),
    )
    checks.append(("equilibrium preservation", drift, 1e-10))

    one = np.ones(grid.shape)
    u0 = np.stack(
        [
            0.3 * np.sin(2 * np.pi * grid.y) * one,
            0.3 * np.sin(2 * np.pi * grid.x) * one,
            grid.sine_restrict(0.2 * np.sin(np.pi * grid.z) * np.cos(2 * np.pi * grid.x) * one),
        ]
    )
    data = ps.InitialDataSpec("well_prepared", 0.2 * np.cos(2 * np.pi * grid.x) * one, u0, 0.5 * one)
    s = ps.assemble_initial_state(data, params, profile)
    mass0 = grid.integral(s.rho)
    z0 = grid.integral(s.rho_theta)
    b20 = grid.integral(s.rho * ((reconstruct_theta(s) - 1.0) / params.epsilon**2) ** 2)
    for _ in range(25):
        s = stepper.step(s)
    checks.append(("mass conservation", abs(grid.integral(s.rho) - mass0) / mass0, 1e-12))
    checks.append(
        ("rho*Theta conservation", abs(grid.integral(s.rho_theta) - z0) / z0, 1e-12)
    )
    b2 = grid.integral(s.rho * ((reconstruct_theta(s) - 1.0) / params.epsilon**2) ** 2)
    checks.append(("transported moment equality", abs(b2 - b20) / b20, 1e-10))

    acoustic = dg.LinearAcousticStepper(profile, dt=0.02)
    sfield = dg._random_admissible_scalar(grid, rng)
    phi = dg._random_admissible_scalar(grid, rng)
    e0 = acoustic.energy(sfield, phi)
    worst = 0.0
    for _ in range(50):
        sfield, phi = acoustic.step(sfield, phi)
        worst = max(worst, abs(acoustic.energy(sfield, phi) - e0) / e0)
    checks.append(("linear acoustic energy", worst, 1e-10))

    vfield = an.project_anelastic(w, profile)
    checks.append(
        ("anelastic projection", an.constraint_defect(vfield, profile), 1e-10)
    )

    failed = 0
    for name, value, tol in checks:
        ok = value <= tol
        failed += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e} (tol {tol:.0e})")
    return 0 if failed == 0 else 2


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "fit": _cmd_fit,
    "spectrum": _cmd_spectrum,
    "info": _cmd_info,
    "check": _cmd_check,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DegeneratePoints, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StratoError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
