"""Run configuration: parsing, validation, canonical serialization.

Configs are JSON documents with nested sections (grid/time/model/ensemble/
solver/initial/loops/output, plus study for convergence sweeps).  Unknown
keys are rejected with their full key path; every run serializes its fully
resolved config (defaults expanded) next to its outputs, and re-running a
serialized config reproduces every numeric output bit-exactly.

The config hash covers the physics-relevant sections only (everything
except ``output``), so artifacts written to different directories from the
same physical configuration carry the same hash.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key path."""


@dataclass
class GridConfig:
    n: int = 64


@dataclass
class TimeConfig:
    T: float = 0.5
    dt: float = 0.05
    window: float = 0.0  # 0 resolves to one window per step


@dataclass
class ModelConfig:
    kind: str = "gsqg"
    alpha: float = 0.0
    nu: float = 0.0


@dataclass
class EnsembleConfig:
    m: int = 1
    seed: int = 0


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 12
    flow_substeps: int = 1
    existence_constant: float = 1.0


@dataclass
class FieldIC:
    preset: str = "zero"
    amplitude: float = 1.0
    kx: int = 1
    ky: int = 1
    kmax: int = 3
    seed: int = 1


@dataclass
class InitialConfig:
    preset: str = "taylor-green"
    amplitude: float = 1.0
    kx: int = 1
    ky: int = 1
    kmax: int = 3
    seed: int = 1
    snapshot: str = ""
    theta: FieldIC = field(default_factory=lambda: FieldIC("zero"))
    b: FieldIC = field(default_factory=lambda: FieldIC("zero"))


@dataclass
class LoopConfig:
    kind: str = "circle"
    name: str = "loop"
    center: list = field(default_factory=lambda: [math.pi, math.pi])
    radius: float = 1.0
    y0: float = math.pi
    nodes: int = 256


@dataclass
class OutputConfig:
    directory: str = "out"
    snapshot_stride: int = 1
    formats: list = field(default_factory=lambda: ["csv", "snapshots"])


@dataclass
class StudyConfig:
    sweep: str = "ensemble"  # "ensemble" (m) or "time-step" (dt)
    m_values: list = field(default_factory=lambda: [100, 400, 1600])
    dt_values: list = field(default_factory=list)
    repeats: int = 1


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    loops: list = field(default_factory=list)
    output: OutputConfig = field(default_factory=OutputConfig)
    study: StudyConfig = field(default_factory=StudyConfig)

    def window(self) -> float:
        return self.time.window if self.time.window > 0 else self.time.dt


_VELOCITY_PRESETS = ("taylor-green", "shear", "random-band-limited", "single-mode", "zero")
_FIELD_PRESETS = ("zero", "constant", "single-mode", "random-band-limited", "taylor-green")


def _fill(obj, data: dict, path: str) -> None:
    fields = {f: getattr(obj, f) for f in vars(obj)}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown key {path}{key}")
        current = fields[key]
        if isinstance(current, (GridConfig, TimeConfig, ModelConfig, EnsembleConfig,
                                SolverConfig, InitialConfig, OutputConfig, StudyConfig,
                                FieldIC)):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{key} must be a table")
            _fill(current, value, f"{path}{key}.")
        elif isinstance(current, bool):
            setattr(obj, key, bool(value))
        elif isinstance(current, int) and not isinstance(value, bool):
            if not isinstance(value, (int, float)) or int(value) != value:
                raise ConfigError(f"{path}{key} must be an integer")
            setattr(obj, key, int(value))
        elif isinstance(current, float):
            if not isinstance(value, (int, float)):
                raise ConfigError(f"{path}{key} must be a number")
            setattr(obj, key, float(value))
        elif isinstance(current, str):
            if not isinstance(value, str):
                raise ConfigError(f"{path}{key} must be a string")
            setattr(obj, key, value)
        elif isinstance(current, list):
            if not isinstance(value, list):
                raise ConfigError(f"{path}{key} must be a list")
            setattr(obj, key, value)
        else:
            raise ConfigError(f"unsupported key {path}{key}")


def _validate(cfg: RunConfig) -> None:
    g = cfg.grid
    if g.n < 16 or (g.n & (g.n - 1)) != 0:
        raise ConfigError("grid.n must be a power of two >= 16")
    t = cfg.time
    if t.T <= 0 or t.dt <= 0:
        raise ConfigError("time.T and time.dt must be positive")
    nsteps = round(t.T / t.dt)
    if nsteps < 1 or abs(nsteps * t.dt - t.T) > 1e-9 * max(1.0, t.T):
        raise ConfigError("time.dt must divide time.T")
    if t.window > 0:
        sw = round(t.window / t.dt)
        if sw < 1 or abs(sw * t.dt - t.window) > 1e-9:
            raise ConfigError("time.window must be a multiple of time.dt")
    m = cfg.model
    if m.kind not in ("gsqg", "navier_stokes", "euler", "boussinesq_mhd"):
        raise ConfigError(f"model.kind {m.kind!r} is not a known model")
    if not (0.0 <= m.alpha <= 1.0):
        raise ConfigError("model.alpha must lie in [0, 1]")
    if m.nu < 0:
        raise ConfigError("model.nu must be >= 0")
    if cfg.ensemble.m < 1:
        raise ConfigError("ensemble.m must be >= 1")
    if not (0 <= cfg.ensemble.seed < 2**64):
        raise ConfigError("ensemble.seed must be a u64")
    if cfg.solver.tol <= 0 or cfg.solver.max_iter < 1 or cfg.solver.flow_substeps < 1:
        raise ConfigError("solver.tol/max_iter/flow_substeps out of range")
    if cfg.initial.preset not in _VELOCITY_PRESETS:
        raise ConfigError(f"initial.preset {cfg.initial.preset!r} is not a preset")
    for sub in ("theta", "b"):
        p = getattr(cfg.initial, sub).preset
        if p not in _FIELD_PRESETS:
            raise ConfigError(f"initial.{sub}.preset {p!r} is not a preset")
    loops = []
    for i, raw in enumerate(cfg.loops):
        lc = LoopConfig()
        if not isinstance(raw, dict):
            raise ConfigError(f"loops[{i}] must be a table")
        _fill(lc, raw, f"loops[{i}].")
        if lc.kind not in ("circle", "horizontal"):
            raise ConfigError(f"loops[{i}].kind must be circle or horizontal")
        if lc.nodes < 64:
            raise ConfigError(f"loops[{i}].nodes must be >= 64")
        loops.append(lc)
    cfg.loops = loops
    if cfg.output.snapshot_stride < 1:
        raise ConfigError("output.snapshot_stride must be >= 1")
    if cfg.study.sweep not in ("ensemble", "time-step"):
        raise ConfigError("study.sweep must be 'ensemble' or 'time-step'")


def normalized_model_kind(cfg: RunConfig) -> tuple[str, float, float]:
    """(kind, alpha, nu) with the navier_stokes/euler aliases resolved."""
    m = cfg.model
    if m.kind == "navier_stokes":
        return "gsqg", 0.0, m.nu
    if m.kind == "euler":
        return "gsqg", 0.0, 0.0
    return m.kind, m.alpha, m.nu


def parse_config(document: str | dict) -> RunConfig:
    """Parse and validate a JSON config document (text or mapping)."""
    if isinstance(document, str):
        try:
            data = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}") from exc
    else:
        data = document
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = RunConfig()
    _fill(cfg, data, "")
    _validate(cfg)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    out = asdict(cfg)
    out["loops"] = [asdict(lc) if isinstance(lc, LoopConfig) else lc for lc in cfg.loops]
    return out


def serialize_config(cfg: RunConfig) -> str:
    """Canonical JSON (sorted keys, fixed separators) of the resolved config."""
    return json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ": "),
                      indent=1) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """sha256 over every section except ``output`` (artifact-location-free)."""
    data = config_to_dict(cfg)
    data.pop("output", None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
