"""Run configuration: INI-style structured text with a documented key set,
strict unknown-key rejection, and a resolved echo written next to outputs.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .errors import ValidationError

# section -> key -> (type, default, help)
CONFIG_SCHEMA = {
    "model": {
        "kind": (str, "fignar", "fignar | gnarfi"),
        "estimation": (str, "exact", "exact | conditional (gnarfi only)"),
        "p": (int, 1, "autoregressive order"),
        "s": (str, "1", "comma-separated neighbour stages, one per lag"),
        "covariates": (int, 1, "covariate channel count C"),
        "alpha_mode": (str, "global", "global | individual"),
        "d_mode": (str, "individual", "global | individual"),
        "sigma_mode": (str, "individual", "global | individual"),
        "weight_scheme": (str, "equal", "equal | inverse_distance"),
    },
    "graph": {
        "source": (str, "", "path to a graph file, or fivenet/tennet"),
        "coords": (str, "", "coordinates CSV (node,x,y) for mst"),
        "strategy": (str, "", "fully_connected | mst | gnar_inf_approx"),
        "metric": (str, "euclidean", "euclidean | greatcircle"),
    },
    "simulate": {
        "preset": (str, "", "dgp1 | dgp2 | dgp3"),
        "t": (int, 500, "series length"),
        "method": (str, "truncated_filter", "truncated_filter | exact"),
        "burn_in": (int, 5000, "discarded recursion prefix"),
        "filter_order": (int, 2000, "integration filter truncation J"),
        "seed": (int, 0, "PRNG seed"),
    },
    "optimizer": {
        "tol": (float, 1e-7, "gradient tolerance"),
        "max_iter": (int, 500, "iteration cap"),
        "det_method": (str, "auto", "auto | exact | spline"),
        "pcg_tol": (float, 1e-9, "conjugate-gradient residual tolerance"),
        "trunc_tol": (float, 1e-12, "autocovariance truncation tolerance"),
    },
    "output": {
        "directory": (str, ".", "output directory"),
        "figures": (bool, True, "render figures next to the CSV outputs"),
        "threads": (int, 0, "worker processes, 0 = auto"),
    },
}


def default_config() -> dict:
    return {sec: {k: spec[1] for k, spec in keys.items()}
            for sec, keys in CONFIG_SCHEMA.items()}


def _coerce(section, key, raw):
    typ = CONFIG_SCHEMA[section][key][0]
    if typ is bool:
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"[{section}] {key}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"[{section}] {key}: {exc}") from exc


def load_config(path=None, overrides=None) -> dict:
    """Defaults, overlaid by the file (when given), overlaid by overrides
    (``{(section, key): value}``). Unknown sections or keys are errors."""
    cfg = default_config()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read([path])
        if not read:
            raise ValidationError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in CONFIG_SCHEMA:
                raise ValidationError(f"unknown config section [{section}]")
            for key, raw in parser.items(section):
                if key not in CONFIG_SCHEMA[section]:
                    raise ValidationError(f"unknown key {key!r} in [{section}]")
                cfg[section][key] = _coerce(section, key, raw)
    for (section, key), value in (overrides or {}).items():
        if section not in CONFIG_SCHEMA or key not in CONFIG_SCHEMA[section]:
            raise ValidationError(f"unknown config entry [{section}] {key}")
        cfg[section][key] = _coerce(section, key, value)
    return cfg


def write_resolved(cfg: dict, path):
    """Echo the fully resolved configuration; re-running with this file
    reproduces the outputs bit for bit (seeds included)."""
    parser = configparser.ConfigParser()
    for section, keys in cfg.items():
        parser[section] = {k: str(v) for k, v in keys.items()}
    with open(path, "w") as fh:
        fh.write("# resolved configuration echo\n")
        parser.write(fh)


def parse_stages(raw: str, p: int):
    try:
        stages = tuple(int(v) for v in str(raw).split(",")) if str(raw).strip() else ()
    except ValueError as exc:
        raise ValidationError(f"malformed stage list {raw!r}") from exc
    if len(stages) != p:
        raise ValidationError(f"stage list {raw!r} must have one entry per lag (p={p})")
    return stages
