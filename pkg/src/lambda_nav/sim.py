"""Deterministic closed-loop simulation: synthetic terrain, ray-marched lidar,
kinematic vehicle, and the perceive -> map -> plan -> act loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from functools import lru_cache
from typing import ClassVar, Sequence

import numpy as np

from ._kernels import march_beams
from .dem import ElevationMap, touched_cells
from .grid import GridSpec, cells_of_points, transverse_cells
from .lambda_field import LambdaField
from .planner import ControlInput, VehicleState, plan, sample_reference, step_model
from .risk import collision_energy

log = logging.getLogger(__name__)


# --- terrain primitives -------------------------------------------------------

def _local(x, y, cx, cy, heading):
    """Coordinates in a frame centred at (cx, cy) whose u axis points along ``heading``."""
    c, s = math.cos(heading), math.sin(heading)
    dx, dy = x - cx, y - cy
    return c * dx + s * dy, -s * dx + c * dy


@dataclass(frozen=True)
class SpeedBump:
    """Bump crossed along ``heading``: ``length`` along it, ``width`` across.

    ``trapezoid``: a vertical ``lip`` at each foot, then a linear ramp of
    length ``ramp`` up to ``height``, flat top in between. ``cosine``: raised
    cosine over the full length (``ramp`` and ``lip`` unused). The lateral
    ends are vertical in both profiles.
    """

    kind: ClassVar[str] = "speed_bump"
    x: float
    y: float
    length: float = 0.9
    width: float = 2.0
    height: float = 0.10
    heading: float = 0.0
    profile: str = "trapezoid"
    ramp: float = 0.2
    lip: float = 0.06

    def __post_init__(self):
        if self.profile not in ("trapezoid", "cosine"):
            raise ValueError(f"unknown bump profile {self.profile!r}")
        if self.profile == "trapezoid" and 2 * self.ramp > self.length:
            raise ValueError("ramps longer than the bump")
        if not 0 <= self.lip <= self.height:
            raise ValueError("lip must lie in [0, height]")

    def height_at(self, x, y):
        u, w = _local(x, y, self.x, self.y, self.heading)
        inside = (np.abs(u) <= self.length / 2) & (np.abs(w) <= self.width / 2)
        d = self.length / 2 - np.abs(u)  # distance in from the nearer foot
        if self.profile == "cosine":
            z = 0.5 * self.height * (1 + np.cos(2 * np.pi * u / self.length))
        elif self.ramp > 0:
            z = np.minimum(self.height, self.lip + (self.height - self.lip) * d / self.ramp)
        else:
            z = np.full(np.shape(d), self.height)
        return np.where(inside, z, 0.0)

    def bbox(self):
        r = 0.5 * math.hypot(self.length, self.width)
        return (self.x - r, self.y - r, self.x + r, self.y + r)

    @property
    def top(self) -> float:
        return self.height


@dataclass(frozen=True)
class Curb:
    """Step of ``height`` on the left of the directed line through (x, y) at ``heading``,
    limited to ``length`` along the line (centred on (x, y)) and ``depth`` across."""

    kind: ClassVar[str] = "curb"
    x: float
    y: float
    heading: float = 0.0
    height: float = 0.12
    length: float = 20.0
    depth: float = 2.0

    def height_at(self, x, y):
        u, w = _local(x, y, self.x, self.y, self.heading)
        inside = (np.abs(u) <= self.length / 2) & (w >= 0) & (w <= self.depth)
        return np.where(inside, self.height, 0.0)

    def bbox(self):
        r = math.hypot(self.length / 2, self.depth)
        return (self.x - r, self.y - r, self.x + r, self.y + r)

    @property
    def top(self) -> float:
        return self.height


@dataclass(frozen=True)
class Cone:
    """Truncated cone (traffic cone)."""

    kind: ClassVar[str] = "cone"
    x: float
    y: float
    radius: float = 0.2
    height: float = 0.5
    top_radius: float = 0.03

    def height_at(self, x, y):
        d = np.hypot(x - self.x, y - self.y)
        span = self.radius - self.top_radius
        z = np.where(d <= self.top_radius, self.height,
                     self.height * (self.radius - d) / span if span > 0 else 0.0)
        return np.where(d <= self.radius, z, 0.0)

    def bbox(self):
        return (self.x - self.radius, self.y - self.radius, self.x + self.radius, self.y + self.radius)

    @property
    def top(self) -> float:
        return self.height


@dataclass(frozen=True)
class Box:
    """Wall or block: ``length`` along ``heading``, ``width`` across."""

    kind: ClassVar[str] = "box"
    x: float
    y: float
    length: float = 1.0
    width: float = 0.2
    height: float = 0.4
    heading: float = 0.0

    def height_at(self, x, y):
        u, w = _local(x, y, self.x, self.y, self.heading)
        inside = (np.abs(u) <= self.length / 2) & (np.abs(w) <= self.width / 2)
        return np.where(inside, self.height, 0.0)

    def bbox(self):
        r = 0.5 * math.hypot(self.length, self.width)
        return (self.x - r, self.y - r, self.x + r, self.y + r)

    @property
    def top(self) -> float:
        return self.height


@dataclass(frozen=True)
class Cylinder:
    """Pole."""

    kind: ClassVar[str] = "cylinder"
    x: float
    y: float
    radius: float = 0.1
    height: float = 2.0

    def height_at(self, x, y):
        return np.where(np.hypot(x - self.x, y - self.y) <= self.radius, self.height, 0.0)

    def bbox(self):
        return (self.x - self.radius, self.y - self.radius, self.x + self.radius, self.y + self.radius)

    @property
    def top(self) -> float:
        return self.height


PRIMITIVES = {cls.kind: cls for cls in (SpeedBump, Curb, Cone, Box, Cylinder)}


def primitive_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("type")
    cls = PRIMITIVES[kind]
    return cls(**d)


def primitive_to_dict(p) -> dict:
    out = {"type": p.kind}
    out.update({f.name: getattr(p, f.name) for f in fields(p)})
    return out


@dataclass(frozen=True)
class Heightfield:
    """Ground at z = 0 with primitives combined by pointwise max."""

    primitives: tuple = ()

    @property
    def max_height(self) -> float:
        return max([0.0] + [p.top for p in self.primitives])

    def height_at(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        z = np.zeros(np.broadcast(x, y).shape)
        for p in self.primitives:
            x0, y0, x1, y1 = p.bbox()
            m = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
            if np.any(m):
                xm = np.broadcast_to(x, z.shape)[m]
                ym = np.broadcast_to(y, z.shape)[m]
                z[m] = np.maximum(z[m], p.height_at(xm, ym))
        return z


def sample_height(hf: Heightfield, p: Sequence[float]) -> float:
    return float(hf.height_at(p[0], p[1]))


# --- lidar ----------------------------------------------------------------------

@dataclass(frozen=True)
class LidarModel:
    range: float = 10.0
    azimuth_count: int = 360
    ring_elevations: tuple = tuple(math.radians(a) for a in np.linspace(-15.0, 1.0, 16))
    z_noise_sigma: float = 0.005
    mount_height: float = 0.5
    march_step: float = 0.02
    noise_clip: float = 1.0  # bounded error: noise clipped to +-noise_clip * sigma

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("lidar range must be > 0")
        if self.azimuth_count < 1:
            raise ValueError("azimuth_count must be >= 1")
        if self.z_noise_sigma < 0:
            raise ValueError("z_noise_sigma must be >= 0")
        if not self.noise_clip > 0:
            raise ValueError("noise_clip must be > 0")
        if not self.march_step > 0:
            raise ValueError("march_step must be > 0")
        object.__setattr__(self, "ring_elevations", tuple(float(a) for a in self.ring_elevations))


RASTER_RES = 0.01


@lru_cache(maxsize=8)
def height_raster(hf: Heightfield, spec: GridSpec, res: float = RASTER_RES) -> np.ndarray:
    """True terrain sampled at the centres of a ``res`` lattice covering the grid, indexed [j, i]."""
    nx = int(round(spec.width * spec.cell_size / res))
    ny = int(round(spec.height * spec.cell_size / res))
    cx = spec.origin[0] + (np.arange(nx) + 0.5) * res
    cy = spec.origin[1] + (np.arange(ny) + 0.5) * res
    z = np.zeros((ny, nx))
    for p in hf.primitives:
        x0, y0, x1, y1 = p.bbox()
        i = np.flatnonzero((cx >= x0) & (cx <= x1))
        j = np.flatnonzero((cy >= y0) & (cy <= y1))
        if i.size and j.size:
            X, Y = np.meshgrid(cx[i], cy[j])
            sub = z[j[0]:j[-1] + 1, i[0]:i[-1] + 1]
            np.maximum(sub, p.height_at(X, Y), out=sub)
    return z


def scan(hf: Heightfield, pose: Sequence[float], lidar: LidarModel, rng_seed=0,
         spec: GridSpec | None = None) -> np.ndarray:
    """One lidar revolution from ``pose``; returns hit points (n, 3) in the world frame.

    The terrain is rastered at 1 cm over ``spec`` (default: a 20 m square
    centred on the origin); outside it the ground is flat. Each beam is marched
    in ``march_step`` increments; the first sample at or below the surface is
    refined by one bisection and reported, so returns never sit above the
    surface before noise is added.
    """
    spec = spec or _DEFAULT_EXTENT
    rings = np.asarray(lidar.ring_elevations, dtype=float)
    if rings.size == 0:
        return np.empty((0, 3))
    x0, y0, th = float(pose[0]), float(pose[1]), float(pose[2])
    z0 = lidar.mount_height
    az = th + 2 * np.pi * np.arange(lidar.azimuth_count) / lidar.azimuth_count
    A, P = np.meshgrid(az, rings, indexing="ij")
    A, P = A.ravel(), P.ravel()
    dirx = np.cos(P) * np.cos(A)
    diry = np.cos(P) * np.sin(A)
    dirz = np.sin(P)

    step = lidar.march_step
    n_steps = int(math.floor(lidar.range / step))
    # Only the stretch of each beam below the tallest primitive can hit anything.
    top = hf.max_height
    k_lo = np.ones(A.size, dtype=np.int64)
    k_hi = np.full(A.size, n_steps, dtype=np.int64)
    down = dirz < 0
    if z0 > top:
        k_lo[down] = np.maximum(1, np.floor((z0 - top) / (-dirz[down] * step)).astype(np.int64))
        k_hi[~down] = 0
    raster = height_raster(hf, spec)
    pts = march_beams(x0, y0, z0, dirx, diry, dirz, k_lo, k_hi, step, raster,
                      float(spec.origin[0]), float(spec.origin[1]), RASTER_RES)
    if lidar.z_noise_sigma > 0 and len(pts):
        rng = np.random.default_rng(rng_seed)
        noise = rng.normal(0.0, 1.0, len(pts))
        pts[:, 2] += lidar.z_noise_sigma * np.clip(noise, -lidar.noise_clip, lidar.noise_clip)
    return pts


_DEFAULT_EXTENT = GridSpec((-10.0, -10.0), 0.1, 200, 200)


# --- closed loop ------------------------------------------------------------------

TRACE_FIELDS = ("t", "x", "y", "theta", "v", "delta", "expected_risk", "ground_truth_risk",
                "cost", "feasible_count", "event")


@dataclass
class TraceRecord:
    t: float
    x: float
    y: float
    theta: float
    v: float
    delta: float
    expected_risk: float
    ground_truth_risk: float
    cost: float
    feasible_count: int
    event: str = ""

    def row(self) -> list:
        return [repr(float(getattr(self, f))) if f not in ("feasible_count", "event") else getattr(self, f)
                for f in TRACE_FIELDS]


def write_trace(trace: Sequence[TraceRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(TRACE_FIELDS)
        for rec in trace:
            wr.writerow(rec.row())


def ground_truth_diff_map(hf: Heightfield, spec: GridSpec, sub: int = 10) -> np.ndarray:
    """Neighbour elevation difference of the true terrain, per-cell max sampled on a sub-grid."""
    emap = ElevationMap(spec)
    off = (np.arange(sub) + 0.5) / sub
    cx = spec.origin[0] + (np.arange(spec.width)[:, None] + off[None, :]).ravel() * spec.cell_size
    cy = spec.origin[1] + (np.arange(spec.height)[:, None] + off[None, :]).ravel() * spec.cell_size
    z = np.zeros(spec.shape)
    for p in hf.primitives:
        x0, y0, x1, y1 = p.bbox()
        xs = cx[(cx >= x0) & (cx <= x1)]
        ys = cy[(cy >= y0) & (cy <= y1)]
        if xs.size == 0 or ys.size == 0:
            continue
        X, Y = np.meshgrid(xs, ys)
        Zp = p.height_at(X, Y)
        cols, rows, inside = cells_of_points(spec, np.column_stack([X.ravel(), Y.ravel()]))
        np.maximum.at(z, (rows[inside], cols[inside]), Zp.ravel()[inside])
    emap.z = z
    emap.n_points[:] = 1
    return emap.elevation_diff_map()


@dataclass
class ScenarioResult:
    trace: list
    field: LambdaField
    dem: ElevationMap
    status: str  # "goal", "stall" or "timeout"
    heightfield: Heightfield = None

    @property
    def goal_reached(self) -> bool:
        return self.status == "goal"


def tick_seed(seed: int, tick: int) -> tuple:
    return (int(seed), int(tick))


def full_scan(hf: Heightfield, dem: ElevationMap, field: LambdaField, poses, cfg, tick0: int = 0) -> int:
    """Scan from every pose, integrate all clouds, then update the field once.

    Returns the number of scans taken (the next free tick for seeding).
    """
    clouds = [scan(hf, p, cfg.lidar, tick_seed(cfg.seed, tick0 + i), cfg.grid) for i, p in enumerate(poses)]
    pts = np.vstack(clouds) if clouds else np.empty((0, 3))
    dem.integrate_cloud(pts)
    field.ingest_scan(dem, touched_cells(cfg.grid, pts), cfg.H_safe, cfg.wheel.R)
    return len(clouds)


def perception_sweep(cfg, passes: int = 1):
    """Build DEM and Lambda-Field from full scans along the reference, without planning.

    Each pass scans from every reference sample (spacing v_max * dt).
    """
    hf = Heightfield(tuple(cfg.environment))
    dem = ElevationMap(cfg.grid)
    lf = LambdaField(cfg.grid, cfg.e)
    poses = [tuple(r) for r in sample_reference(cfg.reference, cfg.planner.v_max * cfg.planner.dt)]
    tick = 0
    for _ in range(passes):
        tick += full_scan(hf, dem, lf, poses, cfg, tick)
    return dem, lf


class _EventTracker:
    """Tags hazard detection and the climb / top / descend / off-obstacle phases
    from the true terrain height under the rear axle."""

    def __init__(self):
        self.detected = False
        self.prev_z = 0.0
        self.phase = "off"

    def update(self, field: LambdaField, z: float) -> str:
        tags = []
        if not self.detected and np.any(field.lam > 0):
            self.detected = True
            tags.append("hazard_detected")
        eps = 1e-9
        if self.phase == "off":
            if z > eps:
                self.phase = "rising"
                tags.append("climb")
        elif z <= eps:
            self.phase = "off"
            tags.append("off_obstacle")
        elif self.phase == "rising" and z <= self.prev_z + eps:
            self.phase = "top"
            tags.append("top")
        elif self.phase == "top" and z < self.prev_z - eps:
            self.phase = "descending"
            tags.append("descend")
        self.prev_z = z
        return "|".join(tags)


def run_scenario(cfg) -> ScenarioResult:
    """Run the closed loop until the goal is reached, the robot stalls, or time runs out."""
    pc = cfg.planner
    hf = Heightfield(tuple(cfg.environment))
    dem = ElevationMap(cfg.grid)
    lf = LambdaField(cfg.grid, cfg.e)
    ref = sample_reference(cfg.reference, pc.v_max * pc.dt)
    goal = np.asarray(cfg.goal, dtype=float)
    gt_diff = np.nan_to_num(ground_truth_diff_map(hf, cfg.grid), nan=0.0)

    state = VehicleState(*cfg.start)
    previous = None
    trace: list[TraceRecord] = []
    events = _EventTracker()
    slow_time = 0.0
    n_ticks = int(round(cfg.max_time / pc.dt))
    status = "timeout"
    for k in range(n_ticks + 1):
        t = k * pc.dt
        if math.hypot(state.x - goal[0], state.y - goal[1]) <= cfg.goal_tolerance:
            trace.append(TraceRecord(t, state.x, state.y, state.theta, 0.0, 0.0, 0.0, 0.0, 0.0, 0, "goal"))
            status = "goal"
            break
        if k == n_ticks:
            trace.append(TraceRecord(t, state.x, state.y, state.theta, 0.0, 0.0, 0.0, 0.0, 0.0, 0, "timeout"))
            break

        pts = scan(hf, state, cfg.lidar, tick_seed(cfg.seed, k), cfg.grid)
        dem.integrate_cloud(pts)
        lf.ingest_scan(dem, touched_cells(cfg.grid, pts), cfg.H_safe, cfg.wheel.R)

        controls, diag = plan(state, ref, lf, dem, pc, cfg.wheel, previous=previous,
                              seed=hash_seed(cfg.seed, k))
        u = controls[0]
        H_gt = max(gt_diff[c.row, c.col] for c in transverse_cells(cfg.grid, state, pc.track_width))
        tag = events.update(lf, sample_height(hf, state))
        trace.append(TraceRecord(t, state.x, state.y, state.theta, u.v, u.delta, diag.expected_risk,
                                 collision_energy(u.v, H_gt, cfg.wheel), diag.cost, diag.feasible, tag))
        log.debug("t=%.1f x=%.2f y=%.2f v=%.2f E[r]=%.3g feasible=%d", t, state.x, state.y, u.v,
                  diag.expected_risk, diag.feasible)

        previous = controls
        state = step_model(state, ControlInput(*u), pc.L, pc.dt)

        slow_time = slow_time + pc.dt if u.v < cfg.stall_speed else 0.0
        if slow_time >= cfg.stall_time - 1e-9:
            trace.append(TraceRecord(t + pc.dt, state.x, state.y, state.theta, 0.0, 0.0, 0.0, 0.0, 0.0, 0,
                                     "stall"))
            status = "stall"
            break
    return ScenarioResult(trace, lf, dem, status, hf)


def hash_seed(seed: int, tick: int) -> int:
    """Per-tick planner seed, stable across runs and platforms."""
    return (int(seed) * 1_000_003 + int(tick)) % (2**63)
