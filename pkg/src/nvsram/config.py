"""Sectioned YAML scenario configuration with defaults and unknown-key rejection."""

from __future__ import annotations

import copy
import dataclasses

import yaml

from .cell import CellConfig
from .engine import TransientConfig
from .errors import ConfigError, NvsramError
from .mtj import MtjParams
from .montecarlo import McConfig

MTJ_KEYS = [f.name for f in dataclasses.fields(MtjParams)]
TRANSISTOR_KEYS = ["vdd", "vth", "lam", "beta_pull_up", "beta_pull_down", "beta_access", "beta_x1",
                   "beta_x2", "beta_logic", "beta_bl_driver"]
CELL_KEYS = [f.name for f in dataclasses.fields(CellConfig) if f.name not in TRANSISTOR_KEYS + ["mtj"]]
CELL_EXTRA = {"terminate": True, "initial_mtj": ["AP", "P"], "initial_bit": 0}
OPERATIONS = ("write", "read", "backup", "restore", "power_down", "power_up")


def _dataclass_defaults(cls, keys):
    inst = cls() if cls is not MtjParams else MtjParams()
    out = {}
    for k in keys:
        v = getattr(inst, k)
        out[k] = list(map(list, v)) if isinstance(v, tuple) else v
    return out


def defaults() -> dict:
    cell = CellConfig()
    return {
        "seed": 0,
        "mtj": _dataclass_defaults(MtjParams, MTJ_KEYS),
        "transistors": {k: getattr(cell, k) for k in TRANSISTOR_KEYS},
        "cell": {**{k: getattr(cell, k) for k in CELL_KEYS if k != "node_caps"}, "node_caps": {},
                 **copy.deepcopy(CELL_EXTRA)},
        "engine": {"dt": 1e-12, "t_end": None, "newton_tol": 1e-6, "newton_max_iters": 50, "gmin": 1e-12},
        "scenario": {
            "temperature": 0.0,
            "operations": normalize_operations([{"op": "write", "bit": 1}, "read", "backup", "power_down",
                                                "power_up", "restore", "read"]),
            "montecarlo": {"kind": "switching", "n_runs": 100, "temperature": 300.0,
                           "overdrives": [1.5], "pulse_widths": [], "horizon": 50e-9, "workers": 1},
        },
        "output": {"csv": "trace.csv", "report": "report.yaml", "samples_csv": None, "sample_stride": 1},
    }


def _merge(base: dict, override: dict, path: str = ""):
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key != "node_caps":
            if not isinstance(value, dict):
                raise ConfigError(f"config section {where!r} must be a mapping")
            _merge(base[key], value, where)
        else:
            base[key] = value


def resolve(raw: dict | None) -> dict:
    """Defaults overlaid with ``raw``; unknown keys raise ConfigError."""
    cfg = defaults()
    if raw is None:
        return cfg
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")
    _merge(cfg, raw)
    _check(cfg)
    return cfg


def load(path) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return resolve(raw)


def normalize_operations(ops) -> list[dict]:
    out = []
    for item in ops or []:
        if isinstance(item, str):
            item = {"op": item}
        if not isinstance(item, dict) or "op" not in item:
            raise ConfigError(f"bad operation entry {item!r}")
        extra = set(item) - {"op", "bit"}
        if extra:
            raise ConfigError(f"unknown operation keys {sorted(extra)}")
        if item["op"] not in OPERATIONS:
            raise ConfigError(f"unknown operation {item['op']!r}")
        if item["op"] == "write" and item.get("bit") not in (0, 1):
            raise ConfigError("write needs bit: 0 or 1")
        out.append({"op": item["op"], "bit": item.get("bit")})
    return out


def _check(cfg):
    # canonical forms keep the echoed config byte-stable across re-runs
    cfg["scenario"]["operations"] = normalize_operations(cfg["scenario"]["operations"])
    mc = cfg["scenario"]["montecarlo"]
    if mc["kind"] not in ("switching", "savings"):
        raise ConfigError(f"montecarlo.kind must be 'switching' or 'savings', got {mc['kind']!r}")
    if not isinstance(cfg["cell"]["node_caps"], dict):
        raise ConfigError("cell.node_caps must be a mapping")
    cfg["cell"]["node_caps"] = dict(sorted(cfg["cell"]["node_caps"].items()))


def mtj_params(cfg: dict) -> MtjParams:
    return _build(MtjParams, cfg["mtj"])


def cell_config(cfg: dict) -> CellConfig:
    fields = {k: v for k, v in cfg["cell"].items() if k not in CELL_EXTRA}
    fields["node_caps"] = tuple(sorted((str(k), float(v)) for k, v in fields["node_caps"].items()))
    fields.update(cfg["transistors"])
    fields["mtj"] = mtj_params(cfg)
    return _build(CellConfig, fields)


def engine_config(cfg: dict) -> TransientConfig:
    e = cfg["engine"]
    return _build(TransientConfig, {"dt": e["dt"], "t_end": e["t_end"] or e["dt"],
                                    "newton_tol": e["newton_tol"], "newton_max_iters": e["newton_max_iters"],
                                    "gmin": e["gmin"], "sample_stride": cfg["output"]["sample_stride"]})


def mc_config(cfg: dict, overdrive: float | None = None) -> McConfig:
    mc = cfg["scenario"]["montecarlo"]
    return _build(McConfig, {
        "n_runs": mc["n_runs"], "seed": cfg["seed"], "temperature": mc["temperature"],
        "overdrive": mc["overdrives"][0] if overdrive is None else overdrive,
        "horizon": mc["horizon"], "dt": cfg["engine"]["dt"],
        "pulse_widths": tuple(mc["pulse_widths"]), "workers": mc["workers"]})


def _build(cls, fields):
    try:
        return cls(**fields)
    except NvsramError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)
