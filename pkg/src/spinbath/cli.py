"""Command-line entry point: ``spinbath <kind> [options]``.

Values are resolved in the order preset, config file, command-line flags;
later sources win. Rows go to CSV (and optionally JSON lines); progress goes
to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .bath import CapacityError
from .collision import CollisionParams, evolve_collision
from .config import (
    KINDS,
    PRESETS,
    SCHEMA,
    ConfigError,
    ExperimentConfig,
    build_config,
    format_value,
    preset,
    read_config_file,
    serialize,
)
from .ensemble import ensemble_negativity
from .lattice import LatticeConfig
from .molecule import (
    GeometryError,
    Orientation,
    ThermalParams,
    dpme_geometry,
    initial_decay_R,
    initial_decay_R_uncorrelated,
    load_geometry,
    orientation_averaged_decay,
    quantile_counts,
    temperature_grid,
)
from .reset import steady_state_sweep
from .states import negativity, plus_plus, product_state

SCHEMA_VERSION = 1

log = logging.getLogger("spinbath")


# --------------------------------------------------------------------------- experiments


def _workers(config):
    return config.workers or None


def _lattice(config: ExperimentConfig, **changes) -> LatticeConfig:
    base = LatticeConfig(
        width=config.width,
        height=config.height,
        n_env=config.n_env,
        g_aa_dt=config.g_aa_dt,
        g_ab_dt=config.g_ab_dt,
        h_dt=0.0,
        eta_b=config.eta_b,
        mode=config.modes[0],
        system_sites=config.system_sites,
        n_steps=config.n_steps,
        master_seed=config.master_seed,
    )
    return base.with_params(**changes)


def _collision_rows(config):
    params = CollisionParams(config.g_aa_dt, config.g_ab_dt, config.n_b)
    neg = negativity(evolve_collision(plus_plus(), params, config.n_steps))
    for s, n in enumerate(neg):
        yield {
            "curve": "collision",
            "mode": "markov",
            "h_dt": 0.0,
            "step": s,
            "gate_time": config.g_aa_dt * s / math.pi,
            "negativity": float(n),
            "stderr": 0.0,
        }


def run_lattice_trace(config):
    for mode in config.modes:
        for h in config.h_dt:
            log.info("lattice-trace: mode=%s h_dt=%r, %d trajectories", mode, h, config.n_traj)
            res = ensemble_negativity(
                _lattice(config, mode=mode, h_dt=h), config.n_traj, n_batches=config.n_batches, workers=_workers(config)
            )
            for rec in res.records():
                yield {"curve": "lattice", "mode": mode, "h_dt": h, **rec}
    if config.overlay:
        yield from _collision_rows(config)


def run_collision(config):
    yield from _collision_rows(config)


def run_lattice_sweep(config):
    for mode in config.modes:
        for ratio in config.g_ab_ratios:
            g_ab = ratio * config.g_aa_dt
            log.info("lattice-sweep: mode=%s g_ab/g_aa=%r", mode, ratio)
            res = ensemble_negativity(
                _lattice(config, mode=mode, g_ab_dt=g_ab, h_dt=config.h_dt[0]),
                config.n_traj,
                n_batches=config.n_batches,
                workers=_workers(config),
            )
            step, peak = res.first_peak()
            yield {
                "mode": mode,
                "g_ab_ratio": ratio,
                "g_ab_dt": g_ab,
                "h_dt": config.h_dt[0],
                "peak_step": step,
                "peak_gate_time": config.g_aa_dt * step / math.pi,
                "peak_negativity": peak,
                "stderr": float(res.stderr[step]),
            }


def run_reset_sweep(config):
    state = plus_plus() if config.reset_state == "plus_plus" else product_state((1, 0), (1, 0))
    for mode in config.modes:
        log.info("reset-sweep: mode=%s, %d x %d grid", mode, len(config.g_aa_grid), len(config.kappa_grid))
        res = steady_state_sweep(
            _lattice(config, mode=mode, h_dt=config.h_dt[0]),
            config.kappa_grid,
            config.g_aa_grid,
            config.n_traj,
            config.eval_step,
            reset_state=state,
            timing=config.timing,
            n_batches=config.n_batches,
            workers=_workers(config),
        )
        for rec in res.records():
            yield {"mode": mode, "eval_step": config.eval_step, **rec}


def _geometry(config):
    return dpme_geometry() if config.geometry == "dpme" else load_geometry(config.geometry)


def _temperatures(config):
    return temperature_grid() if config.temperature_grid else np.array(config.temperatures)


def _thermals(config, b_z_mt):
    out = []
    for t in _temperatures(config):
        for bath in config.baths:
            out.append(
                ThermalParams.from_temperature(
                    float(t), b_z_mt * 1e-3, correlated=bath == "correlated", per_spin=config.per_spin
                )
            )
    return out


def _orientation_args(config):
    if config.theta is not None:
        return {"orientations": [Orientation(config.theta, config.gamma)]}, "fixed"
    return {"n_orientations": config.n_orientations, "master_seed": config.master_seed}, "average"


def _bath(th):
    return "correlated" if th.correlated else "uncorrelated"


def run_nmr_decay(config):
    geometry = _geometry(config)
    times = np.linspace(0.0, config.t_max_ms * 1e-3, config.n_times)
    kwargs, how = _orientation_args(config)
    for b in config.b_z_mt:
        thermals = _thermals(config, b)
        log.info("nmr-decay: B=%r mT, %d thermal settings", b, len(thermals))
        res = orientation_averaged_decay(
            geometry, thermals, times, convention=config.convention, workers=_workers(config), **kwargs
        )
        for th, curve in zip(thermals, res.negativity):
            for t, n in zip(times, curve):
                yield {
                    "b_z_mt": b,
                    "temperature": th.temperature,
                    "bath": _bath(th),
                    "orientation": how,
                    "time_ms": t * 1e3,
                    "negativity": float(n),
                }


def run_nmr_initial_decay(config):
    geometry = _geometry(config)
    tau = config.tau_us * 1e-6
    kwargs, how = _orientation_args(config)
    for b in config.b_z_mt:
        thermals = _thermals(config, b)
        log.info("nmr-initial-decay: B=%r mT, %d thermal settings", b, len(thermals))
        r = initial_decay_R(tau, geometry, thermals, convention=config.convention, workers=_workers(config), **kwargs)
        for th, value in zip(thermals, r):
            closed = math.nan
            if not th.correlated:
                closed = initial_decay_R_uncorrelated(tau, geometry, th, convention=config.convention, **kwargs)
            yield {
                "b_z_mt": b,
                "temperature": th.temperature,
                "bath": _bath(th),
                "orientation": how,
                "tau_us": config.tau_us,
                "R": float(value),
                "R_closed_form": closed,
            }


def run_nmr_quantile(config):
    geometry = _geometry(config)
    kwargs, how = _orientation_args(config)
    for b in config.b_z_mt:
        thermals = _thermals(config, b)
        log.info("nmr-quantile: B=%r mT, %d thermal settings", b, len(thermals))
        counts = quantile_counts(
            geometry,
            thermals,
            config.quantile,
            convention=config.convention,
            workers=_workers(config),
            by_level=config.by_level,
            **kwargs,
        )
        for th, c in zip(thermals, counts):
            yield {
                "b_z_mt": b,
                "temperature": th.temperature,
                "bath": _bath(th),
                "orientation": how,
                "quantile": config.quantile,
                "count": float(c),
            }


RUNNERS = {
    "lattice-trace": run_lattice_trace,
    "lattice-sweep": run_lattice_sweep,
    "collision": run_collision,
    "reset-sweep": run_reset_sweep,
    "nmr-decay": run_nmr_decay,
    "nmr-initial-decay": run_nmr_initial_decay,
    "nmr-quantile": run_nmr_quantile,
}


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """All result rows; each carries the full parameter context."""
    context = {k: config.values[k] for k in config.relevant_keys() if k not in ("output", "jsonl", "workers")}
    rows = []
    for row in RUNNERS[config.kind](config):
        full = {k: v for k, v in context.items() if k not in row}
        full.update(row)
        rows.append(full)
    return rows


# --------------------------------------------------------------------------- output


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return format_value(value)


def _json_value(value):
    if isinstance(value, tuple):
        return [_json_value(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_csv(rows: list[dict], kind: str, stream) -> None:
    stream.write(f"# spinbath-schema: {kind}/v{SCHEMA_VERSION}\n")
    if not rows:
        return
    fields = list(rows[0])
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_cell(row[f]) for f in fields])


def write_jsonl(rows: list[dict], stream) -> None:
    for row in rows:
        stream.write(json.dumps({k: _json_value(v) for k, v in row.items()}) + "\n")


def read_csv(path) -> tuple[str, list[dict]]:
    """Schema tag and rows (as strings) of a CSV written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip()
        tag = head.split(":", 1)[1].strip() if head.startswith("#") else ""
        return tag, list(csv.DictReader(fh))


def _write_outputs(config, rows):
    if config.output == "-":
        write_csv(rows, config.kind, sys.stdout)
    else:
        path = Path(config.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, config.kind, fh)
    if config.jsonl:
        with open(config.jsonl, "w", encoding="utf-8") as fh:
            write_jsonl(rows, fh)


# --------------------------------------------------------------------------- argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinbath", description="Spin-bath dephasing experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="KIND")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", help="sectioned key-value config file")
        p.add_argument("--preset", choices=sorted(n for n, v in PRESETS.items() if v["kind"] == kind))
        p.add_argument("--full", action="store_true", help="paper-scale sample sizes for the preset")
        p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        p.add_argument("--quiet", action="store_true", help="no progress messages")
        group = p.add_argument_group("config keys (override the file)")
        for name, spec in SCHEMA.items():
            if name == "kind":
                continue
            group.add_argument("--" + name.replace("_", "-"), dest=f"key_{name}", metavar="VALUE", help=spec.help or None)
    return parser


def resolve_config(args) -> ExperimentConfig:
    raw: dict[str, str] = {}
    if args.preset:
        raw.update(preset(args.preset, args.full))
    elif args.full:
        raise ConfigError("--full applies to presets only")
    if args.config:
        file_raw = read_config_file(args.config)
        if file_raw.get("kind", args.command) != args.command:
            raise ConfigError(f"{args.config}: kind {file_raw['kind']!r} does not match subcommand {args.command!r}")
        raw.update(file_raw)
    for name in SCHEMA:
        value = getattr(args, f"key_{name}", None)
        if value is not None:
            raw[name] = value
    if raw.get("kind", args.command) != args.command:
        raise ConfigError(f"preset kind {raw['kind']!r} does not match subcommand {args.command!r}")
    raw["kind"] = args.command
    if args.dump_config and "output" not in raw:
        raw["output"] = "-"
    return build_config(raw, "command line")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="[spinbath] %(message)s",
        stream=sys.stderr,
    )
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"spinbath: error: {exc}", file=sys.stderr)
        return 2
    if args.dump_config:
        sys.stdout.write(serialize(config))
        return 0
    try:
        rows = run_experiment(config)
    except CapacityError as exc:
        print(f"spinbath: error: {exc}", file=sys.stderr)
        return 3
    except GeometryError as exc:
        print(f"spinbath: error: {exc} (check the geometry file)", file=sys.stderr)
        return 3
    _write_outputs(config, rows)
    log.info("wrote %d rows to %s", len(rows), config.output)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
