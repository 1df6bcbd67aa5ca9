"""Experiment configuration: a sectioned key-value file, presets, and validation.

Every key lives in exactly one section. A configuration file looks like::

    [experiment]
    kind = lattice-trace
    output = fig3.csv

    [lattice]
    g_ab_dt = 0.025
    modes = relocate, static

Lists are comma separated; system sites are ``x,y`` pairs separated by ``;``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

KINDS = (
    "lattice-trace",
    "lattice-sweep",
    "collision",
    "reset-sweep",
    "nmr-decay",
    "nmr-initial-decay",
    "nmr-quantile",
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key and origin."""


# --------------------------------------------------------------------------- value types


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_list(item):
    def parse(text: str):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("expected a non-empty comma-separated list")
        return tuple(item(p) for p in parts)

    return parse


def _parse_sites(text: str):
    sites = []
    for chunk in text.split(";"):
        xy = [v.strip() for v in chunk.split(",")]
        if len(xy) != 2:
            raise ValueError(f"expected 'x,y;x,y', got {text!r}")
        sites.append((int(xy[0]), int(xy[1])))
    if len(sites) != 2:
        raise ValueError(f"expected exactly two sites, got {len(sites)}")
    return tuple(sites)


def _parse_optional_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ";".join(f"{x},{y}" for x, y in value)
        return ", ".join(_fmt(v) for v in value)
    return str(value)


#: default marker of keys without a default
REQUIRED_KEY = object()


@dataclass(frozen=True)
class Key:
    section: str
    parse: object
    default: object
    check: object = None  # callable(value) -> error message or None
    help: str = ""


def _positive(v):
    return None if v > 0 else "must be positive"


def _nonneg(v):
    return None if v >= 0 else "must be nonnegative"


def _all(pred, msg):
    return lambda vs: None if all(pred(v) for v in vs) else msg


def _choice(*options):
    return lambda v: None if v in options else f"must be one of {options}"


def _choices(*options):
    return lambda vs: None if all(v in options for v in vs) else f"entries must be among {options}"


def _unit_open(v):
    return None if 0 < v < 1 else "must lie in (0, 1)"


def _eta(v):
    return None if 0 < v <= 1 else "must lie in (0, 1]"


_LIST_F = _parse_list(float)
_LIST_S = _parse_list(str)

SCHEMA: dict[str, Key] = {
    # experiment
    "kind": Key("experiment", str, REQUIRED_KEY, _choice(*KINDS), "experiment kind"),
    "output": Key("experiment", str, REQUIRED_KEY, None, "CSV output path ('-' for stdout)"),
    "jsonl": Key("experiment", str, "", None, "optional JSON-lines output path"),
    "master_seed": Key("experiment", int, 0, _nonneg, "master seed"),
    "n_traj": Key("experiment", int, 10_000, _positive, "trajectories per ensemble"),
    "n_batches": Key("experiment", int, 20, lambda v: None if v >= 2 else "must be at least 2", "batches for error bars"),
    "n_orientations": Key("experiment", int, 500, _positive, "random molecular orientations"),
    "workers": Key("experiment", int, 0, _nonneg, "worker processes (0: environment default)"),
    # lattice
    "width": Key("lattice", int, 10, _positive),
    "height": Key("lattice", int, 10, _positive),
    "n_env": Key("lattice", int, 100, _positive, "environment spins"),
    "g_aa_dt": Key("lattice", float, 0.05, None, "system coupling per step (rad)"),
    "g_ab_dt": Key("lattice", float, 0.025, None, "system-bath coupling per step (rad)"),
    "h_dt": Key("lattice", _LIST_F, (0.0,), None, "three-body couplings per step (rad), one curve each"),
    "eta_b": Key("lattice", float, 0.2, _eta, "hopping frequency"),
    "modes": Key("lattice", _LIST_S, ("relocate", "static"), _choices("relocate", "static")),
    "system_sites": Key("lattice", _parse_sites, ((2, 1), (3, 1)), None, "static system sites 'x,y;x,y'"),
    "n_steps": Key("lattice", int, 200, _positive),
    # collision
    "n_b": Key("collision", int, 8, _nonneg, "fresh bath spins per collision"),
    "overlay": Key("collision", _parse_bool, True, None, "add the collision curve to lattice traces"),
    # lattice sweep
    "g_ab_ratios": Key("sweep", _LIST_F, (0.1, 0.2, 0.3, 0.5, 0.7, 1.0), _all(lambda v: v >= 0, "must be nonnegative"), "g_AB/g_AA values"),
    # reset
    "kappa_grid": Key("reset", _LIST_F, (0.0, 0.1, 0.2, 0.5, 1.0, 2.0), _all(lambda v: v >= 0, "must be nonnegative")),
    "g_aa_grid": Key("reset", _LIST_F, (0.2, 0.4), None),
    "eval_step": Key("reset", int, 15, _positive),
    "timing": Key("reset", str, "continuous", _choice("continuous", "step")),
    "reset_state": Key("reset", str, "plus_plus", _choice("plus_plus", "zero_zero")),
    # nmr
    "geometry": Key("nmr", str, "dpme", None, "geometry file, or 'dpme' for the bundled molecule"),
    "b_z_mt": Key("nmr", _LIST_F, (0.05,), _all(lambda v: v > 0, "must be positive"), "fields in mT"),
    "temperatures": Key("nmr", _LIST_F, (1e-8, 1e-7, 1e-6), _all(lambda v: v > 0, "must be positive"), "temperatures in K"),
    "temperature_grid": Key("nmr", _parse_bool, False, None, "use 40 log-spaced temperatures from 1 nK to 100 uK"),
    "t_max_ms": Key("nmr", float, 6.0, _positive),
    "n_times": Key("nmr", int, 301, _positive),
    "baths": Key("nmr", _LIST_S, ("correlated", "uncorrelated"), _choices("correlated", "uncorrelated")),
    "per_spin": Key("nmr", _parse_bool, False, None, "uncorrelated bath at the shifted per-spin resonances"),
    "theta": Key("nmr", _parse_optional_float, None, lambda v: None if v is None or 0 <= v <= math.pi else "must lie in [0, pi]", "fixed orientation polar angle"),
    "gamma": Key("nmr", float, 0.0, lambda v: None if 0 <= v < 2 * math.pi else "must lie in [0, 2 pi)"),
    "tau_us": Key("nmr", float, 10.0, _nonneg, "initial-decay time step in microseconds"),
    "quantile": Key("nmr", float, 0.99, _unit_open),
    "by_level": Key("nmr", _parse_bool, False, None, "count whole degenerate energy levels in quantiles"),
    "convention": Key("nmr", str, "h", _choice("h", "hbar"), "dipolar prefactor convention"),
}

SECTIONS = tuple(dict.fromkeys(k.section for k in SCHEMA.values()))
REQUIRED = tuple(name for name, k in SCHEMA.items() if k.default is REQUIRED_KEY)

#: keys that matter for each kind (beyond the experiment section)
KIND_SECTIONS = {
    "lattice-trace": ("lattice", "collision"),
    "lattice-sweep": ("lattice", "sweep"),
    "collision": ("lattice", "collision"),
    "reset-sweep": ("lattice", "reset"),
    "nmr-decay": ("nmr",),
    "nmr-initial-decay": ("nmr",),
    "nmr-quantile": ("nmr",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.values == other.values

    def __hash__(self):
        return hash(tuple(sorted((k, _fmt(v)) for k, v in self.values.items())))

    def replace(self, **changes) -> "ExperimentConfig":
        return build_config({**{k: _fmt(v) for k, v in self.values.items()}, **{k: _fmt(v) for k, v in changes.items()}}, "replace")

    def relevant_keys(self) -> list[str]:
        sections = ("experiment",) + KIND_SECTIONS[self.kind]
        return [k for k, spec in SCHEMA.items() if spec.section in sections]


def build_config(raw: dict[str, str], origin: str = "<config>") -> ExperimentConfig:
    """Validate raw string values, fill defaults, and check required keys.

    ``raw`` maps key names to strings (from a file or command line flags).
    """
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"{origin}: unknown key(s): {', '.join(unknown)}")
    missing = [k for k in REQUIRED if k not in raw or raw[k] in (None, "")]
    if missing:
        raise ConfigError(f"{origin}: missing required field(s): {', '.join(missing)}")
    values = {}
    for name, spec in SCHEMA.items():
        if name in raw and raw[name] is not None:
            text = raw[name]
            try:
                value = spec.parse(text) if isinstance(text, str) else text
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{origin}: [{spec.section}] {name} = {text!r}: {exc}") from None
        else:
            value = spec.default
        if spec.check is not None:
            problem = spec.check(value)
            if problem:
                raise ConfigError(f"{origin}: [{spec.section}] {name} = {_fmt(value)}: {problem}")
        values[name] = value
    _check_cross(values, origin)
    return ExperimentConfig(values)


def _check_cross(v: dict, origin: str) -> None:
    for x, y in v["system_sites"]:
        if not (0 <= x < v["width"] and 0 <= y < v["height"]):
            raise ConfigError(f"{origin}: [lattice] system_sites: site ({x},{y}) outside the {v['width']}x{v['height']} lattice")
    if v["kind"].startswith("nmr") and v["geometry"] != "dpme" and not Path(v["geometry"]).is_file():
        raise ConfigError(f"{origin}: [nmr] geometry: file not found: {v['geometry']}")


def read_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Raw key-value pairs of a config file, checking section membership."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    raw = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{origin}: unknown section [{section}]; expected one of {', '.join(SECTIONS)}")
        for key, value in parser.items(section):
            if key not in SCHEMA:
                raise ConfigError(f"{origin}: [{section}] unknown key {key!r}")
            if SCHEMA[key].section != section:
                raise ConfigError(f"{origin}: key {key!r} belongs in [{SCHEMA[key].section}], not [{section}]")
            raw[key] = value
    return raw


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return read_config_text(path.read_text(encoding="utf-8"), str(path))


def parse_config(source, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Build a config from a file path or raw mapping, then apply overrides."""
    if isinstance(source, dict):
        raw, origin = dict(source), "<mapping>"
    else:
        raw, origin = read_config_file(source), str(source)
    raw.update(overrides or {})
    return build_config(raw, origin)


def serialize(config: ExperimentConfig) -> str:
    """Sectioned text form; ``parse_config`` on it reproduces ``config``."""
    out = []
    for section in SECTIONS:
        out.append(f"[{section}]")
        out += [f"{k} = {_fmt(config.values[k])}" for k, spec in SCHEMA.items() if spec.section == section]
        out.append("")
    return "\n".join(out)


def format_value(value) -> str:
    return _fmt(value)


# --------------------------------------------------------------------------- presets

_PAPER_SCALE = {"n_traj": "200000", "n_orientations": "5000"}

PRESETS: dict[str, dict[str, str]] = {
    "fig2": {
        "kind": "lattice-sweep",
        "g_aa_dt": "0.05",
        "g_ab_ratios": "0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0",
        "n_steps": "130",
    },
    "fig3": {
        "kind": "lattice-trace",
        "g_aa_dt": "0.05",
        "g_ab_dt": "0.025",
        "n_b": "8",
        "overlay": "true",
        "n_steps": "200",
    },
    "fig4a": {
        "kind": "reset-sweep",
        "g_ab_dt": "0.1",
        "g_aa_grid": "0.4",
        "kappa_grid": "0.0, 0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0",
        "eval_step": "15",
    },
    "fig4b": {
        "kind": "reset-sweep",
        "g_ab_dt": "0.1",
        "g_aa_grid": "0.1, 0.2, 0.3, 0.4, 0.6, 0.8",
        "kappa_grid": "0.0, 0.1, 0.2, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0, 5.6, 8.0",
        "eval_step": "15",
        "modes": "relocate",
    },
    "fig5": {
        "kind": "lattice-trace",
        "g_aa_dt": "0.05",
        "g_ab_dt": "0.025",
        "h_dt": "0.0, -0.000375",
        "overlay": "false",
        "n_steps": "200",
    },
    "fig6": {
        "kind": "nmr-decay",
        "b_z_mt": "0.05, 1.0",
        "temperatures": "1e-8, 1e-7, 1e-6",
        "t_max_ms": "6.0",
        "n_times": "301",
    },
    "fig7a": {"kind": "nmr-initial-decay", "b_z_mt": "0.05", "tau_us": "10", "temperature_grid": "true"},
    "fig7b": {"kind": "nmr-quantile", "b_z_mt": "0.05", "quantile": "0.99", "temperature_grid": "true"},
}

_FULL = {
    "fig2": _PAPER_SCALE,
    "fig3": {"n_traj": "100000"},
    "fig4a": {"n_traj": "100000"},
    "fig4b": {"n_traj": "100000"},
    "fig5": {"n_traj": "100000"},
    "fig6": _PAPER_SCALE,
    "fig7a": _PAPER_SCALE,
    "fig7b": _PAPER_SCALE,
}


def preset(name: str, full: bool = False) -> dict[str, str]:
    """Raw values of a named preset (without an output path)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    raw = dict(PRESETS[name])
    if full:
        raw.update(_FULL[name])
    return raw
