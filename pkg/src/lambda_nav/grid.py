"""2D tessellation shared by the elevation map, the Lambda-Field and risk evaluation.

Cells own the half-open square ``[lo, hi)`` on both axes. Arrays backing the
map layers are indexed ``[row, col]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import OutOfGrid

# Coordinates within this many cells of a lattice line are snapped onto it, so
# decimal inputs such as 0.3 with 0.1 m cells land where a human expects.
SNAP_TOL = 1e-9
# Two crossing parameters closer than this are a lattice-corner crossing.
TIE_TOL = 1e-10


class CellIndex(NamedTuple):
    col: int
    row: int


@dataclass(frozen=True)
class GridSpec:
    origin: tuple[float, float]
    cell_size: float
    width: int
    height: int

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError("cell_size must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be >= 1")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(height, width)`` of a layer on this grid."""
        return (self.height, self.width)

    def contains(self, c: CellIndex) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def to_units(self, x: float, y: float) -> tuple[float, float]:
        """World coordinates expressed in (snapped) cell units."""
        return _snap((x - self.origin[0]) / self.cell_size), _snap((y - self.origin[1]) / self.cell_size)


def _snap(u: float) -> float:
    u = float(u)
    k = round(u)
    return float(k) if abs(u - k) < SNAP_TOL else u


def world_to_cell(spec: GridSpec, p: Sequence[float]) -> CellIndex:
    ux, uy = spec.to_units(p[0], p[1])
    c = CellIndex(math.floor(ux), math.floor(uy))
    if not spec.contains(c):
        raise OutOfGrid(f"point {tuple(p)} outside grid")
    return c


def cells_of_points(spec: GridSpec, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised :func:`world_to_cell`: returns ``(cols, rows, inside_mask)``."""
    u = (xy[:, 0] - spec.origin[0]) / spec.cell_size
    w = (xy[:, 1] - spec.origin[1]) / spec.cell_size
    ru, rw = np.round(u), np.round(w)
    u = np.where(np.abs(u - ru) < SNAP_TOL, ru, u)
    w = np.where(np.abs(w - rw) < SNAP_TOL, rw, w)
    cols = np.floor(u).astype(np.int64)
    rows = np.floor(w).astype(np.int64)
    inside = (cols >= 0) & (cols < spec.width) & (rows >= 0) & (rows < spec.height)
    return cols, rows, inside


def cell_center(spec: GridSpec, c: CellIndex) -> tuple[float, float]:
    if not spec.contains(c):
        raise OutOfGrid(f"cell {tuple(c)} outside grid")
    return (
        spec.origin[0] + (c[0] + 0.5) * spec.cell_size,
        spec.origin[1] + (c[1] + 0.5) * spec.cell_size,
    )


def segment_cells(spec: GridSpec, a: Sequence[float], b: Sequence[float]) -> list[tuple[int, int, float]]:
    """Supercover traversal of one segment.

    Returns ``(col, row, t)`` triples in path order, ``t`` being the segment
    parameter in [0, 1] at which the cell is entered. When the segment passes
    exactly through a lattice corner both corner-adjacent cells are emitted
    (x-neighbour first) before the diagonal one. A corner at either endpoint
    contributes only the endpoint's own cell.
    """
    start = world_to_cell(spec, a)
    end = world_to_cell(spec, b)
    ux0, uy0 = spec.to_units(a[0], a[1])
    ux1, uy1 = spec.to_units(b[0], b[1])
    return _traverse(ux0, uy0, ux1, uy1, start, end, spec.width, spec.height)


def _crossing(bound: int, u0: float, d: float) -> float:
    # Computed from the boundary each time, not accumulated, so the final
    # boundary of a segment ending on a lattice line comes out as exactly 1.
    return (bound - u0) / d


def _traverse(ux0, uy0, ux1, uy1, start, end, width, height):
    c, r = start
    dx, dy = ux1 - ux0, uy1 - uy0
    sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    inf = math.inf
    # next lattice line to cross on each axis
    bx = c + 1 if sx > 0 else c
    by = r + 1 if sy > 0 else r
    out = [(c, r, 0.0)]
    budget = abs(end[0] - c) + abs(end[1] - r) + 2
    while (c, r) != tuple(end) and budget > 0:
        budget -= 1
        tmx = _crossing(bx, ux0, dx) if sx else inf
        tmy = _crossing(by, uy0, dy) if sy else inf
        t = min(tmx, tmy)
        if t > 1.0:
            break
        if abs(tmx - tmy) <= TIE_TOL:
            # Corner crossing. Cells that meet the segment only at one of its
            # endpoints are left out, so the cover does not depend on direction.
            if 0.0 < t < 1.0:
                if 0 <= c + sx < width:
                    out.append((c + sx, r, t))
                if 0 <= r + sy < height:
                    out.append((c, r + sy, t))
            if t >= 1.0:
                c, r = end
            else:
                c += sx
                r += sy
            bx += sx
            by += sy
        elif tmx < tmy:
            c += sx
            bx += sx
        else:
            r += sy
            by += sy
        out.append((c, r, t))
    return out


def raster_polyline(spec: GridSpec, polyline: Sequence[Sequence[float]]) -> list[tuple[int, int, int, float]]:
    """Supercover of a polyline as ``(col, row, segment, t)`` with consecutive duplicates removed.

    A cell keeps the segment index (and entry parameter) of the segment that
    first produced it; a cell left and re-entered later appears again.
    """
    if len(polyline) < 2:
        raise ValueError("polyline needs at least 2 points")
    out: list[tuple[int, int, int, float]] = []
    for k in range(len(polyline) - 1):
        for c, r, t in segment_cells(spec, polyline[k], polyline[k + 1]):
            if out and out[-1][0] == c and out[-1][1] == r:
                continue
            out.append((c, r, k, t))
    return out


def raster_path(spec: GridSpec, polyline: Sequence[Sequence[float]]) -> list[CellIndex]:
    """Ordered supercover of ``polyline`` (every cell the path touches)."""
    return [CellIndex(c, r) for c, r, _, _ in raster_polyline(spec, polyline)]


def transverse_endpoints(x: float, y: float, theta: float, track_width: float):
    """Endpoints of the axle segment, ordered lexicographically so the result is
    independent of the heading's sense."""
    hx = -math.sin(theta) * track_width / 2.0
    hy = math.cos(theta) * track_width / 2.0
    p, q = (x - hx, y - hy), (x + hx, y + hy)
    return (p, q) if p <= q else (q, p)


def transverse_cells(spec: GridSpec, pose: Sequence[float], track_width: float) -> list[CellIndex]:
    """Cells under the segment of length ``track_width`` centred on the pose and
    perpendicular to its heading, in row-major order."""
    p, q = transverse_endpoints(pose[0], pose[1], pose[2], track_width)
    # Sorted, so that near-equal endpoint orderings at theta and theta + pi agree.
    return sorted(set(raster_path(spec, [p, q])), key=lambda c: (c.row, c.col))
