"""Command-line interface.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical
failure.  Errors print one machine-greppable line to stderr of the form
``nufocus-error[<tag>]: message``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (
    SimulationConfig,
    default_config,
    load_config,
    parse_quantity,
    precession_frequency,
)
from .errors import (
    ConfigError,
    EmptyInputError,
    NonpositiveFrequencyError,
    NufocusError,
    NumericalError,
)
from .kinetics import (
    NuclearDistribution,
    max_stable_step,
    evolve_distribution,
    moments,
    steady_distribution,
)
from .pipeline import (
    build_cache,
    ensure_outdir,
    fine_drift_curve,
    run_pipeline,
    scan,
    spin_and_alpha,
    write_distribution_csv,
    write_fine_drift_csv,
    write_manifest,
    write_observables_csv,
    write_rates_csv,
    write_spin_csv,
)
from .propagator import propagate_pulse


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", default=None,
                   help="config file (defaults apply when omitted)")
    p.add_argument("--set", metavar="SECTION.KEY=VALUE", action="append",
                   default=[], dest="overrides",
                   help="override a config key (repeatable)")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="output directory (overrides [output] directory)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes for scans "
                        "(default: NUFOCUS_THREADS or machine parallelism)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nufocus",
        description="Nuclear-spin focusing simulator for a pulsed, "
                    "singly-charged quantum dot",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagator", help="dump one pulse propagator as JSON")
    _add_common(p)
    p.add_argument("--n", type=float, default=0.0,
                   help="nuclear polarization selecting the precession "
                        "frequency (default 0)")

    p = sub.add_parser("spin", help="steady-state spin table over the n grid")
    _add_common(p)
    p.add_argument("--fine", action="store_true",
                   help="sample densely between PSCs instead of on the "
                        "master grid")

    p = sub.add_parser("rates", help="nuclear flip-rate table")
    _add_common(p)
    p.add_argument("--fine", action="store_true",
                   help="sample the drift curve densely between PSCs "
                        "instead of on the master grid")

    p = sub.add_parser("distribution", help="stationary nuclear distribution")
    _add_common(p)

    p = sub.add_parser("evolve", help="time-evolve the nuclear distribution")
    _add_common(p)
    p.add_argument("--duration", required=True,
                   help="total evolution time (e.g. 50s)")
    p.add_argument("--dt", default=None,
                   help="explicit step (default: fraction of the stability bound)")
    p.add_argument("--init", default="delta:0", metavar="SPEC",
                   help="initial state: 'steady' or 'delta:<n>' (default delta:0)")

    p = sub.add_parser("pipeline", help="run all stages for one point")
    _add_common(p)

    p = sub.add_parser("scan", help="sweep a parameter axis")
    _add_common(p)
    p.add_argument("--axis", default=None,
                   help="detuning | area | B_field | retardance "
                        "(default: [scan] axis)")
    p.add_argument("--values", default=None,
                   help="comma list and/or start:stop:step ranges with units")

    return parser


def _load(args) -> SimulationConfig:
    overrides = tuple(args.overrides)
    if args.config is None:
        cfg = default_config()
        if overrides:
            import tempfile

            from .config import dump_config

            with tempfile.NamedTemporaryFile(
                "w", suffix=".cfg", delete=False
            ) as fh:
                fh.write(dump_config(cfg))
                path = fh.name
            try:
                cfg = load_config(path, overrides)
            finally:
                os.unlink(path)
    else:
        cfg = load_config(args.config, overrides)
    if args.out is not None:
        cfg = replace(cfg, output=replace(cfg.output, directory=args.out))
    return cfg


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("NUFOCUS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"NUFOCUS_THREADS: not an integer: {env!r}")
    return os.cpu_count() or 1


def _cmd_propagator(cfg: SimulationConfig, args) -> list[str]:
    omega = precession_frequency(args.n, cfg.dot, cfg.bath, cfg.numerics.omega_min)
    prop = propagate_pulse(cfg.pulse, omega, cfg.numerics)
    out = os.path.join(cfg.output.directory, "propagator.json")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(prop.to_json())
        fh.write("\n")
    return [out]


def _cmd_spin(cfg: SimulationConfig, args) -> list[str]:
    cache, grid = build_cache(cfg)
    if args.fine:
        from .pipeline import fine_omega_grid

        omega = fine_omega_grid(cache, cfg)
    else:
        omega = precession_frequency(grid.values, cfg.dot, cfg.bath,
                                     cfg.numerics.omega_min)
    spin, _ = spin_and_alpha(cache, omega, cfg.dot)
    out = os.path.join(cfg.output.directory, "spin.csv")
    write_spin_csv(out, spin)
    return [out]


def _cmd_rates(cfg: SimulationConfig, args) -> list[str]:
    result = run_pipeline(cfg)
    out = os.path.join(cfg.output.directory, "rates.csv")
    if args.fine:
        write_fine_drift_csv(out, result.fine_drift)
    else:
        write_rates_csv(out, result.rates)
    return [out]


def _cmd_distribution(cfg: SimulationConfig, args) -> list[str]:
    result = run_pipeline(cfg)
    out = os.path.join(cfg.output.directory, "distribution.csv")
    write_distribution_csv(out, result.distribution, result.spin.omega)
    return [out]


def _parse_init(spec: str, result) -> NuclearDistribution:
    if spec == "steady":
        return result.distribution
    if spec.startswith("delta:"):
        n0 = float(spec.split(":", 1)[1])
        grid = result.grid
        idx = int(np.argmin(np.abs(grid.values - n0)))
        p = np.zeros(len(grid))
        p[idx] = 1.0
        return NuclearDistribution(grid=grid, p=p)
    raise ConfigError(f"evolve --init: unknown spec {spec!r}")


def _cmd_evolve(cfg: SimulationConfig, args) -> list[str]:
    result = run_pipeline(cfg)
    duration = parse_quantity(args.duration, "time", "--duration")
    limit = max_stable_step(result.rates)
    dt = (parse_quantity(args.dt, "time", "--dt") if args.dt
          else cfg.numerics.evolve_safety * limit)
    steps = max(1, int(np.ceil(duration / dt)))
    p0 = _parse_init(args.init, result)
    traj = evolve_distribution(p0, result.rates, dt, steps)
    outdir = cfg.output.directory
    t_csv = os.path.join(outdir, "evolve.csv")
    means = traj.means()
    variances = np.array([
        moments(NuclearDistribution(grid=traj.grid, p=row))[1]
        for row in traj.probs
    ])
    from .pipeline import _write_rows

    _write_rows(
        t_csv, ["t_s", "mean_n", "variance_n"],
        zip(traj.times.tolist(), means.tolist(), variances.tolist()),
    )
    d_csv = os.path.join(outdir, "evolve_final_distribution.csv")
    write_distribution_csv(d_csv, traj.final, result.spin.omega)
    return [t_csv, d_csv]


def _cmd_pipeline(cfg: SimulationConfig, args) -> list[str]:
    result = run_pipeline(cfg)
    outdir = cfg.output.directory
    files = []
    path = os.path.join(outdir, "spin.csv")
    write_spin_csv(path, result.spin)
    files.append(path)
    path = os.path.join(outdir, "rates.csv")
    write_rates_csv(path, result.rates)
    files.append(path)
    path = os.path.join(outdir, "drift_fine.csv")
    write_fine_drift_csv(path, result.fine_drift)
    files.append(path)
    path = os.path.join(outdir, "distribution.csv")
    write_distribution_csv(path, result.distribution, result.spin.omega)
    files.append(path)
    path = os.path.join(outdir, "observables.csv")
    row = replace(result.observables, scan_value=_axis_value(cfg))
    write_observables_csv(path, cfg.scan.axis, [row])
    files.append(path)
    manifest = os.path.join(outdir, "manifest.json")
    write_manifest(manifest, cfg, files)
    files.append(manifest)
    return files


def _axis_value(cfg: SimulationConfig) -> float:
    axis = cfg.scan.axis
    if axis == "detuning":
        return cfg.pulse.detuning
    if axis == "area":
        return cfg.pulse.area
    if axis == "B_field":
        return cfg.dot.B_field
    if axis == "retardance":
        return cfg.pulse.retardance
    return 0.0


def _cmd_scan(cfg: SimulationConfig, args) -> list[str]:
    from .config import parse_scan_values

    axis = args.axis or cfg.scan.axis
    if args.values is not None:
        if axis == "none":
            raise ConfigError("scan: --values given without an axis")
        values = parse_scan_values(args.values, axis)
    else:
        values = cfg.scan.values
    if axis != "none" and not values:
        raise ConfigError("scan: no values for axis " + axis)
    rows = scan(cfg, axis, values, threads=_threads(args))
    if cfg.output.dump_distributions:
        rows = _dump_point_distributions(cfg, axis, rows)
    outdir = cfg.output.directory
    obs = os.path.join(outdir, "observables.csv")
    write_observables_csv(obs, axis, rows)
    manifest = os.path.join(outdir, "manifest.json")
    write_manifest(manifest, cfg, [obs])
    return [obs, manifest]


def _dump_point_distributions(cfg, axis, rows):
    from .config import with_scan_value

    out = []
    for i, row in enumerate(rows):
        if row.status != "ok":
            out.append(row)
            continue
        point = (with_scan_value(cfg, axis, row.scan_value)
                 if axis != "none" else cfg)
        result = run_pipeline(point)
        name = f"distribution_{i:03d}.csv"
        write_distribution_csv(
            os.path.join(cfg.output.directory, name),
            result.distribution, result.spin.omega,
        )
        out.append(replace(row, distribution_ref=name))
    return out


_COMMANDS = {
    "propagator": _cmd_propagator,
    "spin": _cmd_spin,
    "rates": _cmd_rates,
    "distribution": _cmd_distribution,
    "evolve": _cmd_evolve,
    "pipeline": _cmd_pipeline,
    "scan": _cmd_scan,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        ensure_outdir(cfg.output.directory)
        files = _COMMANDS[args.command](cfg, args)
    except (ConfigError, NonpositiveFrequencyError, EmptyInputError) as exc:
        print(f"nufocus-error[{exc.tag}]: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"nufocus-error[{exc.tag}]: {exc}", file=sys.stderr)
        return 2
    except NufocusError as exc:
        print(f"nufocus-error[{exc.tag}]: {exc}", file=sys.stderr)
        return 2
    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
