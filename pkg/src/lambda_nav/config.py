"""Scenario configuration: TOML loading, validation against the defaults table, and dumping."""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field, replace
from importlib.resources import files
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError, ParseError, ValidationError
from .grid import GridSpec
from .planner import PlannerConfig
from .risk import WheelModel
from .sim import LidarModel, PRIMITIVES, primitive_from_dict, primitive_to_dict

# Every tunable with its default. Values in dem, lambda, wheel and the first
# block of planner reproduce the published experiment.
DEFAULTS: dict = {
    "name": "scenario",
    "grid": {"origin": [-10.0, -10.0], "cell_size": 0.1, "width": 200, "height": 200},
    "dem": {"H_safe": 0.05},
    "lambda": {"e": 1e-4},
    "wheel": {"R": 0.25, "k_r": 150000.0, "m": 50.0},
    "planner": {
        "dt": 0.1,
        "v_max": 1.5,
        "delta_max_deg": 11.0,
        "Q": [0.05, 0.05, 0.05],
        "Q_N": [1.0, 1.0, 1.0],
        "w_v": 0.1,
        "r_threshold": 3.0,
        "L": 0.6,
        "N_p": 40,
        "track_width": 0.8,
        "n_speed_levels": 16,
        "n_steer_levels": 5,
        "n_profile_levels": 7,
        "n_perturbations": 48,
    },
    "lidar": {
        "range": 10.0,
        "azimuth_count": 360,
        "ring_elevations_deg": [float(a) for a in np.linspace(-15.0, 1.0, 16)],
        "z_noise_sigma": 0.005,
        "noise_clip": 1.0,
        "mount_height": 0.5,
        "march_step": 0.02,
    },
    "reference": {"path": [[-8.0, 0.0], [8.0, 0.0]]},
    "run": {"seed": 0, "max_time": 60.0, "goal_tolerance": 0.3, "stall_time": 5.0, "stall_speed": 0.01},
    "environment": [],
}

# Keys accepted in addition to DEFAULTS: exact-radian alternatives and optional poses.
_OPTIONAL = {
    "planner": {"delta_max"},
    "lidar": {"ring_elevations"},
    "reference": {"goal", "start"},
}
_EXCLUSIVE = {("planner", "delta_max", "delta_max_deg"), ("lidar", "ring_elevations", "ring_elevations_deg")}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    grid: GridSpec
    H_safe: float
    e: float
    wheel: WheelModel
    planner: PlannerConfig
    lidar: LidarModel
    environment: tuple
    reference: tuple
    goal: tuple
    start: tuple
    seed: int = 0
    max_time: float = 60.0
    goal_tolerance: float = 0.3
    stall_time: float = 5.0
    stall_speed: float = 0.01
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def with_threshold(self, r_threshold: float) -> "ScenarioConfig":
        if r_threshold < 0:
            raise ValidationError("planner.r_threshold", "must be >= 0")
        return replace(self, planner=replace(self.planner, r_threshold=float(r_threshold)))

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=int(seed))


def _merge(user: dict) -> dict:
    merged = copy.deepcopy(DEFAULTS)
    for key, val in user.items():
        if key not in DEFAULTS:
            raise ValidationError(key, "unknown section")
        if isinstance(DEFAULTS[key], dict):
            if not isinstance(val, dict):
                raise ValidationError(key, "expected a table")
            allowed = set(DEFAULTS[key]) | _OPTIONAL.get(key, set())
            for k, v in val.items():
                if k not in allowed:
                    raise ValidationError(f"{key}.{k}", "unknown key")
                merged[key][k] = v
        else:
            merged[key] = val
    for sec, a, b in _EXCLUSIVE:
        if a in user.get(sec, {}) and b in user.get(sec, {}):
            raise ValidationError(f"{sec}.{a}", f"give either {a} or {b}")
        if a in user.get(sec, {}):
            merged[sec].pop(b, None)
    return merged


def _num(d: dict, sec: str, key: str, *, positive=False, nonneg=False, integer=False, minimum=None):
    name = f"{sec}.{key}"
    v = d[sec][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(name, "expected a number")
    if integer and not (isinstance(v, int) or float(v).is_integer()):
        raise ValidationError(name, "expected an integer")
    if not math.isfinite(v):
        raise ValidationError(name, "must be finite")
    if positive and not v > 0:
        raise ValidationError(name, "must be > 0")
    if nonneg and v < 0:
        raise ValidationError(name, "must be >= 0")
    if minimum is not None and v < minimum:
        raise ValidationError(name, f"must be >= {minimum}")
    return int(v) if integer else float(v)


def _vec(d: dict, sec: str, key: str, n: int | None = None, nonneg=False) -> list[float]:
    name = f"{sec}.{key}"
    v = d[sec][key]
    if not isinstance(v, list) or (n is not None and len(v) != n):
        raise ValidationError(name, f"expected a list of {n} numbers" if n else "expected a list")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise ValidationError(name, "expected numbers")
        if nonneg and x < 0:
            raise ValidationError(name, "entries must be >= 0")
        out.append(float(x))
    return out


def _points(d: dict, sec: str, key: str, dim: int) -> list[tuple]:
    name = f"{sec}.{key}"
    v = d[sec][key]
    if not isinstance(v, list):
        raise ValidationError(name, "expected a list")
    pts = []
    for p in v:
        if not isinstance(p, list) or len(p) != dim or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in p):
            raise ValidationError(name, f"expected [{', '.join('xyz'[:dim])}] entries")
        pts.append(tuple(float(x) for x in p))
    return pts


def from_dict(user: dict) -> ScenarioConfig:
    """Validate a parsed config mapping, filling missing keys from :data:`DEFAULTS`."""
    d = _merge(user)
    name = d["name"]
    if not isinstance(name, str):
        raise ValidationError("name", "expected a string")

    origin = _vec(d, "grid", "origin", 2)
    grid = GridSpec(tuple(origin), _num(d, "grid", "cell_size", positive=True),
                    _num(d, "grid", "width", integer=True, minimum=1),
                    _num(d, "grid", "height", integer=True, minimum=1))
    H_safe = _num(d, "dem", "H_safe", positive=True)
    e = _num(d, "lambda", "e", positive=True)
    wheel = WheelModel(_num(d, "wheel", "R", positive=True), _num(d, "wheel", "k_r", positive=True),
                       _num(d, "wheel", "m", positive=True))

    if "delta_max" in d["planner"]:
        delta_max = _num(d, "planner", "delta_max", nonneg=True)
    else:
        delta_max = math.radians(_num(d, "planner", "delta_max_deg", nonneg=True))
    if delta_max >= math.pi / 2:
        raise ValidationError("planner.delta_max", "must be below 90 degrees")
    planner = PlannerConfig(
        L=_num(d, "planner", "L", positive=True),
        dt=_num(d, "planner", "dt", positive=True),
        N_p=_num(d, "planner", "N_p", integer=True, minimum=1),
        Q=tuple(_vec(d, "planner", "Q", 3, nonneg=True)),
        Q_N=tuple(_vec(d, "planner", "Q_N", 3, nonneg=True)),
        w_v=_num(d, "planner", "w_v", nonneg=True),
        v_max=_num(d, "planner", "v_max", positive=True),
        delta_max=delta_max,
        r_threshold=_num(d, "planner", "r_threshold", nonneg=True),
        track_width=_num(d, "planner", "track_width", positive=True),
        n_speed_levels=_num(d, "planner", "n_speed_levels", integer=True, minimum=2),
        n_steer_levels=_num(d, "planner", "n_steer_levels", integer=True, minimum=1),
        n_profile_levels=_num(d, "planner", "n_profile_levels", integer=True, minimum=2),
        n_perturbations=_num(d, "planner", "n_perturbations", integer=True, minimum=0),
    )

    if "ring_elevations" in d["lidar"]:
        rings = _vec(d, "lidar", "ring_elevations")
    else:
        rings = [math.radians(a) for a in _vec(d, "lidar", "ring_elevations_deg")]
    if any(not -math.pi / 2 < a < math.pi / 2 for a in rings):
        raise ValidationError("lidar.ring_elevations", "pitch must lie strictly within +-90 degrees")
    lidar = LidarModel(
        range=_num(d, "lidar", "range", positive=True),
        azimuth_count=_num(d, "lidar", "azimuth_count", integer=True, minimum=1),
        ring_elevations=tuple(rings),
        z_noise_sigma=_num(d, "lidar", "z_noise_sigma", nonneg=True),
        noise_clip=_num(d, "lidar", "noise_clip", positive=True),
        mount_height=_num(d, "lidar", "mount_height", positive=True),
        march_step=_num(d, "lidar", "march_step", positive=True),
    )

    env = d["environment"]
    if not isinstance(env, list):
        raise ValidationError("environment", "expected an array of tables")
    prims = []
    for i, item in enumerate(env):
        where = f"environment[{i}]"
        if not isinstance(item, dict) or "type" not in item:
            raise ValidationError(where, "missing type")
        if item["type"] not in PRIMITIVES:
            raise ValidationError(f"{where}.type", f"unknown primitive {item['type']!r}")
        cls = PRIMITIVES[item["type"]]
        known = set(cls.__dataclass_fields__)
        for k in item:
            if k != "type" and k not in known:
                raise ValidationError(f"{where}.{k}", "unknown key")
        for k, v in item.items():
            if k == "profile":
                continue
            if k != "type" and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ValidationError(f"{where}.{k}", "expected a number")
        for k in ("height", "length", "width", "radius", "depth"):
            if k in item and not item[k] > 0:
                raise ValidationError(f"{where}.{k}", "must be > 0")
        try:
            prims.append(primitive_from_dict({k: (float(v) if isinstance(v, int) else v)
                                              for k, v in item.items()}))
        except (TypeError, ValueError) as exc:
            raise ValidationError(where, str(exc)) from None

    path = _points(d, "reference", "path", 2)
    if len(path) < 2:
        raise ValidationError("reference.path", "needs at least 2 points")
    goal = tuple(_vec(d, "reference", "goal", 2)) if "goal" in d["reference"] else path[-1]
    if "start" in d["reference"]:
        start = tuple(_vec(d, "reference", "start", 3))
    else:
        (x0, y0), (x1, y1) = path[0], path[1]
        start = (x0, y0, math.atan2(y1 - y0, x1 - x0))

    return ScenarioConfig(
        name=name, grid=grid, H_safe=H_safe, e=e, wheel=wheel, planner=planner, lidar=lidar,
        environment=tuple(prims), reference=tuple(path), goal=tuple(goal), start=tuple(start),
        seed=_num(d, "run", "seed", integer=True),
        max_time=_num(d, "run", "max_time", positive=True),
        goal_tolerance=_num(d, "run", "goal_tolerance", positive=True),
        stall_time=_num(d, "run", "stall_time", positive=True),
        stall_speed=_num(d, "run", "stall_speed", nonneg=True),
    )


def loads_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        err = ParseError(f"{source}: {exc}")
        err.lineno = int(m.group(1)) if m else None
        raise err from None
    return from_dict(raw)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return loads_config(text, str(path))


def to_dict(cfg: ScenarioConfig) -> dict:
    p = cfg.planner
    return {
        "name": cfg.name,
        "grid": {"origin": list(cfg.grid.origin), "cell_size": cfg.grid.cell_size,
                 "width": cfg.grid.width, "height": cfg.grid.height},
        "dem": {"H_safe": cfg.H_safe},
        "lambda": {"e": cfg.e},
        "wheel": {"R": cfg.wheel.R, "k_r": cfg.wheel.k_r, "m": cfg.wheel.m},
        "planner": {"L": p.L, "dt": p.dt, "N_p": p.N_p, "Q": list(p.Q), "Q_N": list(p.Q_N), "w_v": p.w_v,
                    "v_max": p.v_max, "delta_max": p.delta_max, "r_threshold": p.r_threshold,
                    "track_width": p.track_width, "n_speed_levels": p.n_speed_levels,
                    "n_steer_levels": p.n_steer_levels, "n_profile_levels": p.n_profile_levels,
                    "n_perturbations": p.n_perturbations},
        "lidar": {"range": cfg.lidar.range, "azimuth_count": cfg.lidar.azimuth_count,
                  "ring_elevations": list(cfg.lidar.ring_elevations),
                  "z_noise_sigma": cfg.lidar.z_noise_sigma, "noise_clip": cfg.lidar.noise_clip,
                  "mount_height": cfg.lidar.mount_height,
                  "march_step": cfg.lidar.march_step},
        "reference": {"path": [list(pt) for pt in cfg.reference], "goal": list(cfg.goal),
                      "start": list(cfg.start)},
        "run": {"seed": cfg.seed, "max_time": cfg.max_time, "goal_tolerance": cfg.goal_tolerance,
                "stall_time": cfg.stall_time, "stall_speed": cfg.stall_speed},
        "environment": [primitive_to_dict(pr) for pr in cfg.environment],
    }


def dump_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def bundled_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in files("lambda_nav").joinpath("scenarios").iterdir()
                  if p.name.endswith(".toml"))


def resolve_config(name_or_path) -> ScenarioConfig:
    """Load a config file, or a bundled scenario by name (``bump_walled``)."""
    path = Path(name_or_path)
    if not path.exists() and str(name_or_path) in bundled_scenarios():
        res = files("lambda_nav").joinpath("scenarios", f"{name_or_path}.toml")
        return loads_config(res.read_text(), str(name_or_path))
    return load_config(path)
