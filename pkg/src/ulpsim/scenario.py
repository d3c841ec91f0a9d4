"""JSON scenario files: loading, validation and serialization.

A scenario names a module and carries a parameter tree that mirrors that
module's config dataclasses.  Unknown keys, wrong types and violated model
invariants are all reported with the dotted path of the offending entry.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .devices import ModelError, MosDevice
from .dt_amp import AmpConfig
from .piezo import RectifierConfig
from .swcap import PgState, SwCapConfig


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path

    def __str__(self):
        msg = super().__str__()
        return f"{self.path}: {msg}" if self.path else msg


# --------------------------------------------------------------------------
# per-module parameter trees

@dataclass(frozen=True)
class SwcapParams:
    config: SwCapConfig = field(default_factory=SwCapConfig)
    device: MosDevice = field(default_factory=lambda: MosDevice(
        v_sg_max=3.3, gate_leak_density=1e-8, width=15e-3))
    calibrate_gidl: bool = True
    v_opt: float = 0.30
    reduction_ratio: float = 186.0
    temperature: float = 300.0
    v_b_start: float = 0.0
    v_b_stop: float = 1.5
    v_b_steps: int = 31
    trace: bool = False
    schedule: tuple = ((0.0, "OFF"), (0.5, "SUPER_OFF"), (1.0, "SUPER_ON"), (1.5, "ON"))
    duration: float = 2.0


@dataclass(frozen=True)
class NemsPgParams:
    preset: str = "14nm"
    alpha: float = 0.1
    r_start: float = 0.001
    r_stop: float = 10.0
    r_steps: int = 41
    log_spacing: bool = True
    temperature: float = 300.0
    f_pg: float = 1e3
    v_pg: float = 2.5
    stack_factor: float = 1.0
    table: str = "none"  # none | table-3.5 | table-3.6


@dataclass(frozen=True)
class DtAmpParams:
    config: AmpConfig = field(default_factory=AmpConfig)
    waveform: str = "sine"  # dc | sine | gain_sweep
    amplitude: float = 0.2
    f_in: float = 1e3
    n_samples: int = 100
    a_start: float = 0.001
    a_stop: float = 0.35
    a_steps: int = 15
    temperature: float = 300.0


@dataclass(frozen=True)
class PiezoParams:
    rectifier: RectifierConfig = field(default_factory=RectifierConfig)
    n_cycles: int = 100
    mode: str = "summary"  # summary | trace | steady_state


MODULE_PARAMS = {
    "swcap": SwcapParams,
    "nems-pg": NemsPgParams,
    "dt-amp": DtAmpParams,
    "piezo": PiezoParams,
}

_CHOICES = {
    (NemsPgParams, "table"): ("none", "table-3.5", "table-3.6"),
    (DtAmpParams, "waveform"): ("dc", "sine", "gain_sweep"),
    (PiezoParams, "mode"): ("summary", "trace", "steady_state"),
}


@dataclass(frozen=True)
class Sweep:
    parameter: str
    start: float
    stop: float
    steps: int

    def values(self) -> list[float]:
        if self.steps == 1:
            return [self.start]
        step = (self.stop - self.start) / (self.steps - 1)
        return [self.start + i * step for i in range(self.steps)]


@dataclass(frozen=True)
class Scenario:
    name: str
    module: str
    parameters: Any
    sweep: Sweep | None = None
    output: str | None = None


# --------------------------------------------------------------------------
# dict <-> dataclass

def _type_name(tp) -> str:
    return getattr(tp, "__name__", str(tp))


def _coerce(value, tp, path):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"expected object for {_type_name(tp)}", path)
        return from_dict(tp, value, path)
    if isinstance(tp, type) and issubclass(tp, enum.Enum):
        try:
            return tp(value)
        except ValueError:
            allowed = ", ".join(m.value for m in tp)
            raise ConfigError(f"expected one of {allowed}, got {value!r}", path) from None
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected boolean, got {value!r}", path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected integer, got {value!r}", path)
        return value
    if tp is float:
        if isinstance(value, str) and value in ("inf", "Infinity"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected number, got {value!r}", path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected string, got {value!r}", path)
        return value
    if tp is tuple:
        if not isinstance(value, list):
            raise ConfigError("expected array", path)
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    raise ConfigError(f"unsupported field type {tp}", path)


def from_dict(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}", _join(path, key))
    kwargs = {}
    for key, value in data.items():
        p = _join(path, key)
        kwargs[key] = _coerce(value, hints[key], p)
        choices = _CHOICES.get((cls, key))
        if choices and kwargs[key] not in choices:
            raise ConfigError(f"expected one of {', '.join(choices)}, got {value!r}", p)
    try:
        return cls(**kwargs)
    except ModelError as exc:
        raise ConfigError(f"invariant violated: {exc}", path or cls.__name__) from None
    except TypeError as exc:
        raise ConfigError(str(exc), path or cls.__name__) from None


def to_dict(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, tuple):
        return [to_dict(v) for v in obj]
    return obj


def _join(path, key):
    return f"{path}.{key}" if path else str(key)


# --------------------------------------------------------------------------
# scenario files

def parse_scenario(data: Any) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    allowed = {"name", "module", "parameters", "sweep", "output"}
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r}", key)
    name = data.get("name", "scenario")
    if not isinstance(name, str):
        raise ConfigError("expected string", "name")
    module = data.get("module")
    if module not in MODULE_PARAMS:
        raise ConfigError(f"expected one of {', '.join(MODULE_PARAMS)}, got {module!r}", "module")
    raw = data.get("parameters", {})
    if not isinstance(raw, dict):
        raise ConfigError("expected object", "parameters")
    params = from_dict(MODULE_PARAMS[module], raw, "parameters")
    if module == "swcap":
        _check_schedule(params.schedule)
    sweep = None
    if data.get("sweep") is not None:
        sweep = from_dict(Sweep, data["sweep"], "sweep")
        if sweep.steps < 2:
            raise ConfigError("invariant violated: sweep steps must be >= 2", "sweep.steps")
        _check_sweep_target(MODULE_PARAMS[module], raw, sweep.parameter)
    output = data.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("expected string", "output")
    return Scenario(name, module, params, sweep, output)


def _check_schedule(schedule):
    for i, entry in enumerate(schedule):
        p = f"parameters.schedule.{i}"
        if not (isinstance(entry, tuple) and len(entry) == 2):
            raise ConfigError("expected [time, state] pair", p)
        t, st = entry
        if isinstance(t, bool) or not isinstance(t, (int, float)):
            raise ConfigError("expected number for time", p)
        try:
            PgState(st)
        except ValueError:
            raise ConfigError(f"unknown PG state {st!r}", p) from None


def _check_sweep_target(cls, raw, dotted):
    p = "sweep.parameter"
    parts = dotted.split(".")
    tp = cls
    for part in parts:
        if not dataclasses.is_dataclass(tp):
            raise ConfigError(f"{dotted!r} does not name a parameter", p)
        hints = typing.get_type_hints(tp)
        if part not in hints:
            raise ConfigError(f"{dotted!r} does not name a parameter", p)
        tp = hints[part]
        if typing.get_origin(tp) in (typing.Union, types.UnionType):
            tp = [a for a in typing.get_args(tp) if a is not type(None)][0]
    if tp not in (float, int):
        raise ConfigError(f"sweep over non-numeric parameter {dotted!r}", p)


def with_parameter(scn: Scenario, dotted: str, value: float) -> Scenario:
    """Copy of the scenario with one parameter replaced (re-validated)."""
    raw = to_dict(scn.parameters)
    node = raw
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node[part]
    old = node[parts[-1]]
    node[parts[-1]] = int(round(value)) if isinstance(old, int) and not isinstance(old, bool) else value
    params = from_dict(MODULE_PARAMS[scn.module], raw, "parameters")
    return dataclasses.replace(scn, parameters=params, sweep=None)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno} column {exc.colno}: {exc.msg}",
                          str(path)) from None
    return parse_scenario(data)


def scenario_to_dict(scn: Scenario) -> dict:
    out = {"name": scn.name, "module": scn.module, "parameters": to_dict(scn.parameters)}
    if scn.sweep is not None:
        out["sweep"] = to_dict(scn.sweep)
    if scn.output is not None:
        out["output"] = scn.output
    return out


def dump_scenario(scn: Scenario) -> str:
    return json.dumps(scenario_to_dict(scn), indent=2, sort_keys=True) + "\n"
