"""Run configuration: one JSON document plus ``--set`` overrides."""
from __future__ import annotations

import copy
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigInvalid, InvalidParameters
from .model import ModelParams, canonical_coupling
from .vdp import VdpParams

COMMANDS = ("ness", "entanglement", "dynamics", "torus", "diffusion", "vdp", "oracle-check")

MODEL_KEYS = ("N", "u", "D", "kappa", "h")
VDP_KEYS = ("kappa", "gamma1", "gamma2")

# per-command starting points; user config is merged on top
DEFAULTS: dict[str, dict[str, Any]] = {
    "ness": {"params": {"N": 2, "u": 0.1, "D": 1.0, "kappa": 1.0}},
    "entanglement": {"params": {"N": 2, "u": 0.1, "D": 1.0, "kappa": 1.0}, "numerics": {"cutoff": 60}},
    "dynamics": {
        "params": {"N": 2, "u": 0.02, "D": 1.0, "kappa": 1.0, "h": 0.3},
        "numerics": {"T": 100.0, "seed_amplitude": 0.1},
    },
    "torus": {
        "params": {"N": 4, "u": 0.02, "D": 1.0, "kappa": 1.0, "h": 0.2, "lambdas": [1.0, 2**0.5]},
        "numerics": {"T": 200.0, "seed_amplitude": 0.1},
    },
    "diffusion": {
        "params": {"N": 2, "u": 1e-3, "D": 0.2525, "kappa": 1.0},
        "numerics": {"T": 200.0, "n_traj": 1000},
    },
    "vdp": {"vdp": {"kappa": 0.0, "gamma1": 200.0, "gamma2": 1.0}},
    "oracle-check": {
        "params": {"N": 2, "u": 1.0, "D": 0.5, "kappa": 1.0, "h": 0.3},
        "numerics": {"cutoff": 10, "tolerance": 1e-5},
    },
}


@dataclass(frozen=True)
class SweepAxis:
    var: str
    values: tuple[float, ...]

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SweepAxis":
        if "var" not in d:
            raise ConfigInvalid("sweep axis needs 'var'")
        if "values" in d:
            values = tuple(float(v) for v in d["values"])
        else:
            try:
                lo, hi, count = float(d["min"]), float(d["max"]), int(d["count"])
            except KeyError as exc:
                raise ConfigInvalid(f"sweep axis needs min/max/count or values: missing {exc}") from None
            scale = d.get("scale", "linear")
            if count < 2:
                raise ConfigInvalid("sweep count must be >= 2")
            if scale == "linear":
                values = tuple(np.linspace(lo, hi, count).tolist())
            elif scale == "log":
                if lo <= 0 or hi <= 0:
                    raise ConfigInvalid("log sweep needs positive bounds")
                values = tuple(np.geomspace(lo, hi, count).tolist())
            else:
                raise ConfigInvalid(f"sweep scale must be linear or log, got {scale!r}")
        if len(values) < 2:
            raise ConfigInvalid("sweep needs at least two values")
        return cls(str(d["var"]), values)


@dataclass(frozen=True)
class Numerics:
    cutoff: int = 60
    tolerance: float = 1e-5
    dt: float | None = None
    T: float = 100.0
    n_traj: int = 1000
    seed: int = 0
    m_max: int | None = None
    delta_u: float = 0.0
    seed_amplitude: float = 0.1
    every: int = 10
    dump: bool = False

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Numerics":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigInvalid(f"unknown numerics keys: {sorted(unknown)}")
        out = cls(**d)
        if not out.tolerance > 0:
            raise ConfigInvalid("tolerance must be > 0")
        if out.dt is not None and not out.dt > 0:
            raise ConfigInvalid("dt must be > 0")
        if not out.T > 0 or out.n_traj < 2 or out.cutoff < 1 or out.every < 1:
            raise ConfigInvalid("T > 0, n_traj >= 2, cutoff >= 1 and every >= 1 required")
        return out


@dataclass(frozen=True, eq=False)
class RunConfig:
    command: str
    raw: dict[str, Any]
    params: dict[str, Any]
    sweep: tuple[SweepAxis, ...] = ()
    numerics: Numerics = field(default_factory=Numerics)
    output: dict[str, Any] = field(default_factory=dict)

    def points(self) -> list[dict[str, float]]:
        """Sweep points as dicts var -> value (a single empty dict without sweep)."""
        if not self.sweep:
            return [{}]
        return [
            {ax.var: v for ax, v in zip(self.sweep, combo)}
            for combo in itertools.product(*(ax.values for ax in self.sweep))
        ]

    def model_params(self, point: dict[str, float]) -> ModelParams:
        p = dict(self.params)
        lambdas = p.pop("lambdas", None)
        for k, v in point.items():
            if k in MODEL_KEYS:
                p[k] = v
        if "N" in p:
            p["N"] = int(p["N"])
        try:
            if lambdas is not None and "K" not in p:
                p["K"] = canonical_coupling(int(p["N"]), lambdas)
            return ModelParams.from_dict(p)
        except (InvalidParameters, TypeError) as exc:
            raise ConfigInvalid(f"invalid model parameters {p}: {exc}") from exc

    def vdp_params(self, point: dict[str, float]) -> VdpParams:
        p = dict(self.raw.get("vdp", {}))
        for k, v in point.items():
            if k in VDP_KEYS:
                p[k] = v
        try:
            return VdpParams(**p)
        except (InvalidParameters, TypeError) as exc:
            raise ConfigInvalid(f"invalid vdP parameters {p}: {exc}") from exc

    def numerics_at(self, point: dict[str, float]) -> Numerics:
        upd = {k: v for k, v in point.items() if k in Numerics.__dataclass_fields__}
        if not upd:
            return self.numerics
        d = dict(self.numerics.__dict__)
        d.update(upd)
        if "cutoff" in upd:
            d["cutoff"] = int(d["cutoff"])
        return Numerics.from_dict(d)


def _deep_merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b=value``; the value is read as JSON when possible, else as a string."""
    if "=" not in text:
        raise ConfigInvalid(f"--set expects key=value, got {text!r}")
    key, value = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigInvalid(f"empty key in {text!r}")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return path, parsed


def apply_override(doc: dict, path: list[str], value: Any) -> None:
    node = doc
    for p in path[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigInvalid(f"cannot set {'.'.join(path)}: {p} is not an object")
    node[path[-1]] = value


def build_config(command: str, doc: dict | None = None, overrides=(), seed: int | None = None,
                 out: str | None = None) -> RunConfig:
    if command not in COMMANDS:
        raise ConfigInvalid(f"unknown command {command!r}")
    doc = dict(doc or {})
    if doc.get("command", command) != command:
        raise ConfigInvalid(f"config is for {doc['command']!r}, not {command!r}")
    full = _deep_merge(DEFAULTS[command], doc)
    full["command"] = command
    for text in overrides:
        apply_override(full, *parse_override(text))
    if seed is not None:
        apply_override(full, ["numerics", "seed"], seed)
    if out is not None:
        apply_override(full, ["output", "dir"], out)

    sweep_doc = full.get("sweep")
    if sweep_doc is None:
        axes = ()
    elif isinstance(sweep_doc, dict):
        axes = (SweepAxis.from_dict(sweep_doc),)
    elif isinstance(sweep_doc, list):
        axes = tuple(SweepAxis.from_dict(a) for a in sweep_doc)
    else:
        raise ConfigInvalid("sweep must be an object or a list of objects")
    numerics = Numerics.from_dict(full.get("numerics", {}))
    params = full.get("params", {})
    if not isinstance(params, dict):
        raise ConfigInvalid("params must be an object")
    unknown = set(params) - set(MODEL_KEYS) - {"K", "lambdas"}
    if unknown:
        raise ConfigInvalid(f"unknown params keys: {sorted(unknown)}")
    cfg = RunConfig(command, full, params, axes, numerics, full.get("output", {}))
    # fail early on the base point
    if command == "vdp":
        cfg.vdp_params({})
    else:
        cfg.model_params({})
    for ax in axes:
        if ax.var not in MODEL_KEYS + VDP_KEYS + tuple(Numerics.__dataclass_fields__):
            raise ConfigInvalid(f"cannot sweep unknown variable {ax.var!r}")
    return cfg


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigInvalid("config must be a JSON object")
    return doc


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj
