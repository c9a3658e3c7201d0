"""Wheel spring-collision energy and expected risk of a path over the Lambda-Field."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dem import ElevationMap
from .errors import NonPositiveRadius, OutOfGrid
from .grid import CellIndex, GridSpec, raster_polyline, transverse_cells
from .lambda_field import LambdaField

DEFAULT_TRACK_WIDTH = 0.8


@dataclass(frozen=True)
class WheelModel:
    R: float = 0.25
    k_r: float = 150_000.0
    m: float = 50.0

    def __post_init__(self):
        for name in ("R", "k_r", "m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"WheelModel.{name} must be > 0")

    @property
    def omega(self) -> float:
        return math.sqrt(self.k_r / self.m)


@dataclass
class RiskProfile:
    cells: list[CellIndex] = field(default_factory=list)
    v: list[float] = field(default_factory=list)
    H: list[float] = field(default_factory=list)
    psi: list[float] = field(default_factory=list)
    K: list[float] = field(default_factory=list)
    r: list[float] = field(default_factory=list)

    @property
    def expected_risk(self) -> float:
        return float(sum(k * r for k, r in zip(self.K, self.r)))

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["step", "col", "row", "v", "H", "psi", "K", "r"])
        for i, c in enumerate(self.cells):
            wr.writerow([i, c.col, c.row, repr(self.v[i]), repr(self.H[i]), repr(self.psi[i]),
                         repr(self.K[i]), repr(self.r[i])])
        return buf.getvalue() if fh is None else ""


def attack_angle(H: float, R: float) -> float:
    """Contact-normal angle of the wheel on an obstacle of height H: 0 head-on, pi/2 grazing."""
    if not R > 0:
        raise NonPositiveRadius(f"wheel radius must be > 0, got {R}")
    return math.asin((R - min(H, R)) / R)


def max_compression(v: float, psi: float, wheel: WheelModel) -> float:
    # cos(pi/2) is 6e-17 in floating point; a grazing contact compresses nothing.
    c = 0.0 if psi >= math.pi / 2 else math.cos(psi)
    return v * c / wheel.omega


def collision_energy(v: float, H: float, wheel: WheelModel) -> float:
    """Peak spring energy (J) absorbed by the wheel hitting a step of height H at speed v."""
    lm = max_compression(v, attack_angle(H, wheel.R), wheel)
    return 0.5 * wheel.k_r * lm * lm


def event_probabilities(field: LambdaField, cells: Sequence[CellIndex]) -> list[float]:
    """Probability that the first hazardous event of the path happens in each cell."""
    da = field.spec.cell_area
    lam = np.empty(len(cells))
    for i, c in enumerate(cells):
        if not field.spec.contains(c):
            raise OutOfGrid(f"cell {tuple(c)} outside grid")
        lam[i] = field.lam[c[1], c[0]]
    return first_event_probabilities(lam, da).tolist()


def first_event_probabilities(lam: np.ndarray, da: float) -> np.ndarray:
    prior = np.concatenate(([0.0], np.cumsum(lam)[:-1]))
    return np.exp(-da * prior) * -np.expm1(-da * lam)


def _transverse_H(spec: GridSpec, dem: ElevationMap, pose, track_width: float, own: CellIndex) -> float:
    best = 0.0
    for c in transverse_cells(spec, pose, track_width) + [own]:
        if dem.n_points[c.row, c.col] > 0:
            best = max(best, dem.elevation_diff(c))
    return best


def expected_path_risk(field: LambdaField, dem: ElevationMap, trajectory, wheel: WheelModel,
                       track_width: float = DEFAULT_TRACK_WIDTH, start=None) -> RiskProfile:
    """Expected collision energy of driving ``trajectory``.

    ``trajectory`` is a sequence of ``(state, control)`` pairs as returned by
    rollout: each state is paired with the control that produced it. With
    ``start`` given it is the first polyline vertex; otherwise the first state
    is, and its control is unused. States are ``(x, y, theta)``, controls
    ``(v, delta)``.

    Each rasterised cell takes the speed of the segment that first reached it
    and the heading of that segment's start state; the obstacle height is the
    largest neighbour difference under the axle at the point of entry (the
    cell itself included).
    """
    states = [tuple(s)[:3] for s, _ in trajectory]
    speeds = [float(u[0]) for _, u in trajectory]
    if start is not None:
        states = [tuple(start)[:3]] + states
        seg_speed = speeds
    else:
        seg_speed = speeds[1:]
    if len(states) == 1:
        states = states * 2
        seg_speed = [0.0]
    spec = field.spec
    poly = [(s[0], s[1]) for s in states]
    profile = RiskProfile()
    for col, row, k, t in raster_polyline(spec, poly):
        c = CellIndex(col, row)
        a, b = poly[k], poly[k + 1]
        pose = (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), states[k][2])
        H = _transverse_H(spec, dem, pose, track_width, c)
        v = seg_speed[k]
        profile.cells.append(c)
        profile.v.append(v)
        profile.H.append(H)
        profile.psi.append(attack_angle(H, wheel.R))
        profile.r.append(collision_energy(v, H, wheel))
    profile.K = event_probabilities(field, profile.cells)
    return profile
