"""Digital elevation model: per-cell running-max elevation and neighbour differences."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import OutOfGrid, UnobservedCell
from .grid import CellIndex, GridSpec, cells_of_points

_NEIGHBOURS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


class Outcome(enum.Enum):
    SAFE = "safe"
    HAZARDOUS = "hazardous"


@dataclass(frozen=True)
class ElevationCell:
    z: float
    n_points: int
    observed: bool


class ElevationMap:
    """Dense elevation layer. ``z`` is NaN where no point has landed yet."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.z = np.full(spec.shape, np.nan)
        self.n_points = np.zeros(spec.shape, dtype=np.int64)

    @property
    def observed(self) -> np.ndarray:
        return self.n_points > 0

    def cell(self, c: CellIndex) -> ElevationCell:
        self._check(c)
        n = int(self.n_points[c[1], c[0]])
        return ElevationCell(float(self.z[c[1], c[0]]), n, n > 0)

    def copy(self) -> "ElevationMap":
        other = ElevationMap(self.spec)
        other.z = self.z.copy()
        other.n_points = self.n_points.copy()
        return other

    def _check(self, c: CellIndex):
        if not self.spec.contains(c):
            raise OutOfGrid(f"cell {tuple(c)} outside grid")

    def integrate_cloud(self, points: np.ndarray) -> "ElevationMap":
        """Fold a cloud of world-frame points into the map; out-of-grid points are skipped."""
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        cols, rows, inside = cells_of_points(self.spec, pts[:, :2])
        cols, rows, zs = cols[inside], rows[inside], pts[inside, 2]
        flat = rows * self.spec.width + cols
        z = self.z.reshape(-1)
        seen = np.zeros(z.shape, dtype=bool)
        seen[flat] = True
        # NaN never wins a max; seed new cells with -inf first.
        z[seen & np.isnan(z)] = -np.inf
        np.maximum.at(z, flat, zs)
        np.add.at(self.n_points.reshape(-1), flat, 1)
        return self

    def elevation_diff(self, c: CellIndex) -> float:
        """Max |z_c - z_j| over observed 8-neighbours j; 0 when none is observed."""
        self._check(c)
        col, row = c
        if self.n_points[row, col] == 0:
            raise UnobservedCell(f"cell {tuple(c)} has no points")
        zc = self.z[row, col]
        best = 0.0
        for dr, dc in _NEIGHBOURS:
            r, k = row + dr, col + dc
            if 0 <= r < self.spec.height and 0 <= k < self.spec.width and self.n_points[r, k] > 0:
                best = max(best, abs(zc - self.z[r, k]))
        return float(best)

    def elevation_diff_map(self) -> np.ndarray:
        """:meth:`elevation_diff` for every cell at once; NaN on unobserved cells."""
        h, w = self.spec.shape
        padded = np.full((h + 2, w + 2), np.nan)
        padded[1:-1, 1:-1] = np.where(self.observed, self.z, np.nan)
        centre = padded[1:-1, 1:-1]
        out = np.zeros((h, w))
        for dr, dc in _NEIGHBOURS:
            nb = padded[1 + dr:h + 1 + dr, 1 + dc:w + 1 + dc]
            d = np.abs(centre - nb)
            out = np.fmax(out, np.where(np.isnan(d), 0.0, d))
        out[~self.observed] = np.nan
        return out

    def classify(self, c: CellIndex, H_safe: float) -> Outcome:
        return classify_diff(self.elevation_diff(c), H_safe)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["col", "row", "z", "n_points", "observed"])
            for row in range(self.spec.height):
                for col in range(self.spec.width):
                    n = int(self.n_points[row, col])
                    z = repr(float(self.z[row, col])) if n else ""
                    wr.writerow([col, row, z, n, int(n > 0)])

    @classmethod
    def from_csv(cls, spec: GridSpec, path) -> "ElevationMap":
        m = cls(spec)
        with open(Path(path), newline="") as fh:
            for rec in csv.DictReader(fh):
                col, row, n = int(rec["col"]), int(rec["row"]), int(rec["n_points"])
                m.n_points[row, col] = n
                if n:
                    m.z[row, col] = float(rec["z"])
        return m


def classify_diff(H: float, H_safe: float) -> Outcome:
    # A tie goes to hazardous.
    return Outcome.HAZARDOUS if H >= H_safe else Outcome.SAFE


def integrate_cloud(emap: ElevationMap, points) -> ElevationMap:
    return emap.integrate_cloud(points)


def elevation_diff(emap: ElevationMap, c: CellIndex) -> float:
    return emap.elevation_diff(c)


def classify(emap: ElevationMap, c: CellIndex, H_safe: float) -> Outcome:
    return emap.classify(c, H_safe)


def touched_cells(spec: GridSpec, points) -> list[CellIndex]:
    """Distinct in-grid cells hit by a cloud, in row-major order."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    cols, rows, inside = cells_of_points(spec, pts[:, :2])
    flat = np.unique(rows[inside] * spec.width + cols[inside])
    return [CellIndex(int(f % spec.width), int(f // spec.width)) for f in flat]
