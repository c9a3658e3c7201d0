"""Receding-horizon planner with a hard expected-risk constraint.

Candidate control sequences are rolled out through the discrete Ackermann
model, scored with the three-term tracking/terminal/speed cost, and filtered
by expected risk. The cheapest admissible candidate wins; standing still is
always admissible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .dem import ElevationMap
from .errors import EmptyReference, InvalidSteering
from .lambda_field import LambdaField
from .risk import DEFAULT_TRACK_WIDTH, WheelModel, expected_path_risk


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    return math.pi - np.mod(math.pi - a, 2 * math.pi) if isinstance(a, np.ndarray) else \
        math.pi - math.fmod(math.fmod(math.pi - a, 2 * math.pi) + 2 * math.pi, 2 * math.pi)


class _State(NamedTuple):
    x: float
    y: float
    theta: float


class VehicleState(_State):
    """Rear-axle pose; the yaw is kept in (-pi, pi]."""

    __slots__ = ()

    def __new__(cls, x: float, y: float, theta: float = 0.0):
        return super().__new__(cls, float(x), float(y), float(wrap_angle(float(theta))))


class ControlInput(NamedTuple):
    v: float
    delta: float


@dataclass(frozen=True)
class PlannerConfig:
    L: float = 0.6
    dt: float = 0.1
    N_p: int = 40
    Q: tuple[float, float, float] = (0.05, 0.05, 0.05)
    Q_N: tuple[float, float, float] = (1.0, 1.0, 1.0)
    w_v: float = 0.1
    v_max: float = 1.5
    delta_max: float = math.radians(11.0)
    r_threshold: float = 3.0
    track_width: float = DEFAULT_TRACK_WIDTH
    # candidate lattice
    n_speed_levels: int = 16
    n_steer_levels: int = 5
    n_profile_levels: int = 7
    n_perturbations: int = 48

    def __post_init__(self):
        if not self.dt > 0 or not self.L > 0:
            raise ValueError("dt and L must be > 0")
        if self.N_p < 1:
            raise ValueError("N_p must be >= 1")
        if min(self.Q) < 0 or min(self.Q_N) < 0 or self.w_v < 0:
            raise ValueError("weights must be >= 0")
        if self.r_threshold < 0:
            raise ValueError("r_threshold must be >= 0")
        if not 0 <= self.delta_max < math.pi / 2:
            raise ValueError("delta_max must lie in [0, pi/2)")


@dataclass
class PlanDiagnostics:
    cost: float
    expected_risk: float
    evaluated: int
    feasible: int
    states: np.ndarray = field(repr=False, default=None)
    fallback: bool = False


def step_model(s: VehicleState, u: ControlInput, L: float, dt: float) -> VehicleState:
    if abs(u[1]) >= math.pi / 2:
        raise InvalidSteering(f"|delta| = {abs(u[1])} >= pi/2")
    x, y, th = s
    v = u[0]
    return VehicleState(x + dt * v * math.cos(th), y + dt * v * math.sin(th), th + dt * v * math.tan(u[1]) / L)


def rollout(s0: VehicleState, controls: Sequence[ControlInput], cfg: PlannerConfig):
    """States x_1..x_N each paired with the control that produced it."""
    out = []
    s = s0
    for u in controls:
        s = step_model(s, u, cfg.L, cfg.dt)
        out.append((s, ControlInput(*u)))
    return out


def batch_rollout(s0, V: np.ndarray, D: np.ndarray, L: float, dt: float) -> np.ndarray:
    """Vectorised rollout of (n, N) speed/steer arrays; returns (n, N+1, 3) with the start in slot 0.

    Same update order as :func:`step_model`; the two agree to rounding.
    """
    n, N = V.shape
    X = np.empty((n, N + 1, 3))
    X[:, 0] = s0[:3]
    tan_d = np.tan(D)
    for k in range(N):
        th = X[:, k, 2]
        X[:, k + 1, 0] = X[:, k, 0] + dt * V[:, k] * np.cos(th)
        X[:, k + 1, 1] = X[:, k, 1] + dt * V[:, k] * np.sin(th)
        X[:, k + 1, 2] = wrap_angle(th + dt * V[:, k] * tan_d[:, k] / L)
    return X


def sample_reference(polyline: Sequence[Sequence[float]], spacing: float) -> np.ndarray:
    """Resample a polyline at fixed arc length into desired states (x, y, theta)."""
    pts = np.asarray(polyline, dtype=float)
    if len(pts) == 0:
        raise EmptyReference("reference polyline is empty")
    if len(pts) == 1:
        return np.array([[pts[0, 0], pts[0, 1], 0.0]])
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    keep = seg_len > 0
    seg, seg_len = seg[keep], seg_len[keep]
    starts = pts[:-1][keep]
    cum = np.concatenate(([0.0], np.cumsum(seg_len)))
    s = np.arange(0.0, cum[-1], spacing)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    xy = starts[idx] + frac[:, None] * seg[idx]
    head = np.arctan2(seg[:, 1], seg[:, 0])
    out = np.column_stack([xy, head[idx]])
    if cum[-1] - s[-1] > 1e-9:
        out = np.vstack([out, [pts[-1, 0], pts[-1, 1], head[-1]]])
    return out


def nearest_reference_index(ref: np.ndarray, s) -> int:
    d = (ref[:, 0] - s[0]) ** 2 + (ref[:, 1] - s[1]) ** 2
    return int(np.argmin(d))


def reference_slice(ref, s, cfg: PlannerConfig) -> np.ndarray:
    """The N_p + 1 desired states starting at the sample nearest to ``s``,
    repeating the final sample past the end of the path."""
    ref = np.asarray(ref, dtype=float)
    if ref.size == 0:
        raise EmptyReference("reference trajectory is empty")
    k = nearest_reference_index(ref, s)
    idx = np.minimum(np.arange(k, k + cfg.N_p + 1), len(ref) - 1)
    return ref[idx]


def batch_cost(X: np.ndarray, V: np.ndarray, refs: np.ndarray, cfg: PlannerConfig) -> np.ndarray:
    """Three-term cost for (n, N+1, 3) states and (n, N) speeds against (N+1, 3) references."""
    err = X - refs[None]
    err[..., 2] = wrap_angle(err[..., 2])
    q = np.asarray(cfg.Q, dtype=float)
    qn = np.asarray(cfg.Q_N, dtype=float)
    track = np.einsum("nkj,j->n", err[:, :-1] ** 2, q)
    terminal = (err[:, -1] ** 2) @ qn
    speed = cfg.w_v * np.sum((V - cfg.v_max) ** 2, axis=1)
    return track + terminal + speed


def cost(states, controls, refs, cfg: PlannerConfig) -> float:
    """Cost of one trajectory: ``states`` holds x_0..x_N, ``controls`` u_0..u_{N-1}."""
    X = np.asarray(states, dtype=float)[None, :, :3]
    V = np.array([[u[0] for u in controls]], dtype=float)
    return float(batch_cost(X, V, np.asarray(refs, dtype=float), cfg)[0])


def candidate_controls(cfg: PlannerConfig, previous=None, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Candidate (speed, steer) sequences, each of shape (n, N_p).

    Order: constant speed with one steering switch at mid-horizon; two-level
    speed profiles going straight or reusing the previous steering; the
    previous solution shifted by one step and its random perturbations; the
    all-stop sequence last.
    """
    N = cfg.N_p
    half = N // 2
    vs = np.linspace(0.0, cfg.v_max, cfg.n_speed_levels)
    ds = np.linspace(-cfg.delta_max, cfg.delta_max, cfg.n_steer_levels) if cfg.n_steer_levels > 1 \
        else np.zeros(1)
    V_list, D_list = [], []

    for v in vs:
        for d1 in ds:
            for d2 in ds:
                V_list.append(np.full(N, v))
                D_list.append(np.concatenate([np.full(half, d1), np.full(N - half, d2)]))

    prev_d = None
    prev = None
    if previous is not None and len(previous):
        prev = np.array([[u[0], u[1]] for u in previous], dtype=float)
        prev = np.vstack([prev[1:], prev[-1:]])[:N]
        if len(prev) < N:
            prev = np.vstack([prev, np.repeat(prev[-1:], N - len(prev), axis=0)])
        prev_d = prev[:, 1]

    levels = np.linspace(0.0, cfg.v_max, cfg.n_profile_levels)
    switches = sorted({max(1, N // 4), max(1, N // 2), max(1, 3 * N // 4)})
    steer_profiles = [np.zeros(N)] + ([prev_d] if prev_d is not None else [])
    for v1 in levels:
        for v2 in levels:
            if v1 == v2:
                continue
            for m in switches:
                for dprof in steer_profiles:
                    V_list.append(np.concatenate([np.full(m, v1), np.full(N - m, v2)]))
                    D_list.append(dprof.copy())

    if prev is not None:
        V_list.append(prev[:, 0].copy())
        D_list.append(prev[:, 1].copy())
        if rng is not None:
            for _ in range(cfg.n_perturbations):
                V_list.append(prev[:, 0] + rng.normal(0.0, 0.15 * cfg.v_max, N))
                D_list.append(prev[:, 1] + rng.normal(0.0, 0.25 * cfg.delta_max, N))

    V_list.append(np.zeros(N))
    D_list.append(np.zeros(N))
    V = np.clip(np.array(V_list), 0.0, cfg.v_max)
    D = np.clip(np.array(D_list), -cfg.delta_max, cfg.delta_max)
    return V, D


def _hmap(dem: ElevationMap) -> np.ndarray:
    return np.nan_to_num(dem.elevation_diff_map(), nan=0.0)


def score_candidates(s0, V, D, field: LambdaField, dem: ElevationMap, cfg: PlannerConfig,
                     wheel: WheelModel, hmap=None) -> tuple[np.ndarray, np.ndarray]:
    """Rollout states and expected risk for each candidate (``inf`` when leaving the grid)."""
    X = batch_rollout(s0, V, D, cfg.L, cfg.dt)
    spec = field.spec
    if hmap is None:
        hmap = _hmap(dem)
    E = _kernels.batch_expected_risk(
        np.ascontiguousarray(X[:, :, 0]), np.ascontiguousarray(X[:, :, 1]),
        np.ascontiguousarray(X[:, :, 2]), np.ascontiguousarray(V),
        field.lam, hmap, spec.origin[0], spec.origin[1], spec.cell_size, spec.cell_area,
        wheel.R, wheel.k_r, wheel.omega, cfg.track_width)
    return X, E


def plan(s: VehicleState, ref, field: LambdaField, dem: ElevationMap, cfg: PlannerConfig,
         wheel: WheelModel, previous=None, seed: int = 0) -> tuple[list[ControlInput], PlanDiagnostics]:
    """Pick the cheapest candidate whose expected risk is within ``cfg.r_threshold``.

    Candidates are ranked by (cost, expected risk, index), so the result does
    not depend on scoring order. The winner is re-checked with the reference
    :func:`expected_path_risk`; the all-stop sequence is always admissible.
    """
    s = VehicleState(*s[:3])
    rng = np.random.default_rng(seed)
    refs = reference_slice(ref, s, cfg)
    V, D = candidate_controls(cfg, previous, rng)
    X, E = score_candidates(s, V, D, field, dem, cfg, wheel)
    Z = batch_cost(X, V, refs, cfg)
    feasible = np.isfinite(E) & (E <= cfg.r_threshold)
    n_feasible = int(feasible.sum())

    order = np.lexsort((np.arange(len(Z)), E, Z))
    for i in order:
        if not feasible[i]:
            continue
        controls = [ControlInput(float(v), float(d)) for v, d in zip(V[i], D[i])]
        checked = expected_path_risk(field, dem, rollout(s, controls, cfg), wheel, cfg.track_width, start=s)
        if checked.expected_risk <= cfg.r_threshold:
            diag = PlanDiagnostics(float(Z[i]), checked.expected_risk, len(Z), n_feasible, X[i])
            return controls, diag
        feasible[i] = False
        n_feasible -= 1

    # Unreachable in practice: the stop sequence carries zero energy.
    stop = [ControlInput(0.0, 0.0)] * cfg.N_p
    Xs = batch_rollout(s, np.zeros((1, cfg.N_p)), np.zeros((1, cfg.N_p)), cfg.L, cfg.dt)
    Zs = float(batch_cost(Xs, np.zeros((1, cfg.N_p)), refs, cfg)[0])
    return stop, PlanDiagnostics(Zs, 0.0, len(Z), n_feasible, Xs[0], fallback=True)
