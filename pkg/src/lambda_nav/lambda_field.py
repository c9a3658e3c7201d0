"""Severity-weighted Lambda-Field: per-cell hazard intensity from safe/hazard counts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .dem import ElevationMap, Outcome
from .errors import NonPositiveRadius, OutOfGrid, UnobservedCell
from .grid import CellIndex, GridSpec

# Virtual safe count substituted for s = 0, keeping the intensity finite.
VIRTUAL_SAFE = 0.5


@dataclass(frozen=True)
class LambdaCell:
    s: int
    h: int
    p: float
    lam: float


def severity(H: float, R: float) -> float:
    """Fraction of a collision that actually stops the wheel: min(|H|/R, 1)."""
    if not R > 0:
        raise NonPositiveRadius(f"wheel radius must be > 0, got {R}")
    return min(abs(H) / R, 1.0)


def intensity(s, h, p, e: float):
    """lambda = ln(1 + h/s) * p / e, with s = 0 replaced by :data:`VIRTUAL_SAFE`.

    Works elementwise on arrays.
    """
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    denom = np.where(s > 0, s, VIRTUAL_SAFE)
    lam = np.log1p(h / denom) * np.asarray(p, dtype=float) / e
    return lam if lam.ndim else float(lam)


class LambdaField:
    def __init__(self, spec: GridSpec, e: float):
        if not e > 0:
            raise ValueError("error-region area e must be > 0")
        self.spec = spec
        self.e = float(e)
        self.s = np.zeros(spec.shape, dtype=np.int64)
        self.h = np.zeros(spec.shape, dtype=np.int64)
        self.p = np.zeros(spec.shape)
        self.lam = np.zeros(spec.shape)

    def copy(self) -> "LambdaField":
        other = LambdaField(self.spec, self.e)
        for name in ("s", "h", "p", "lam"):
            setattr(other, name, getattr(self, name).copy())
        return other

    def cell(self, c: CellIndex) -> LambdaCell:
        self._check(c)
        col, row = c
        return LambdaCell(int(self.s[row, col]), int(self.h[row, col]), float(self.p[row, col]), float(self.lam[row, col]))

    def _check(self, c: CellIndex):
        if not self.spec.contains(c):
            raise OutOfGrid(f"cell {tuple(c)} outside grid")

    def observe(self, c: CellIndex, outcome: Outcome, H: float, R: float) -> "LambdaField":
        self._check(c)
        col, row = c
        p = severity(H, R)
        if outcome is Outcome.HAZARDOUS:
            self.h[row, col] += 1
        else:
            self.s[row, col] += 1
        self.p[row, col] = p
        self.lam[row, col] = intensity(self.s[row, col], self.h[row, col], p, self.e)
        return self

    def collision_probability(self, cells: Iterable[CellIndex]) -> float:
        total = 0.0
        for c in cells:
            self._check(c)
            total += self.lam[c[1], c[0]]
        return -math.expm1(-self.spec.cell_area * total)

    def ingest_scan(self, dem: ElevationMap, touched: Iterable[CellIndex], H_safe: float, R: float) -> "LambdaField":
        """Classify each touched cell from the DEM and record the measurement."""
        touched = list(touched)
        if not touched:
            return self
        if not R > 0:
            raise NonPositiveRadius(f"wheel radius must be > 0, got {R}")
        cols = np.array([c[0] for c in touched])
        rows = np.array([c[1] for c in touched])
        if np.any((cols < 0) | (cols >= self.spec.width) | (rows < 0) | (rows >= self.spec.height)):
            raise OutOfGrid("touched cell outside grid")
        if not np.all(dem.n_points[rows, cols] > 0):
            raise UnobservedCell("ingest_scan given a cell the DEM never observed")
        H = dem.elevation_diff_map()[rows, cols]
        hazardous = H >= H_safe
        np.add.at(self.h, (rows, cols), hazardous.astype(np.int64))
        np.add.at(self.s, (rows, cols), (~hazardous).astype(np.int64))
        self.p[rows, cols] = np.minimum(np.abs(H) / R, 1.0)
        self.lam[rows, cols] = intensity(self.s[rows, cols], self.h[rows, cols], self.p[rows, cols], self.e)
        return self

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["col", "row", "s", "h", "p", "lambda"])
            for row in range(self.spec.height):
                for col in range(self.spec.width):
                    wr.writerow([col, row, int(self.s[row, col]), int(self.h[row, col]),
                                 repr(float(self.p[row, col])), repr(float(self.lam[row, col]))])

    @classmethod
    def from_csv(cls, spec: GridSpec, e: float, path, rtol: float = 1e-9) -> "LambdaField":
        """Load a field dump; intensities are recomputed from the counts and
        must agree with the stored column."""
        f = cls(spec, e)
        stored = np.zeros(spec.shape)
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                col, row = int(rec["col"]), int(rec["row"])
                f.s[row, col] = int(rec["s"])
                f.h[row, col] = int(rec["h"])
                f.p[row, col] = float(rec["p"])
                stored[row, col] = float(rec["lambda"])
        f.lam = np.asarray(intensity(f.s, f.h, f.p, f.e), dtype=float)
        if not np.allclose(f.lam, stored, rtol=rtol, atol=0.0):
            raise ValueError("stored lambda column disagrees with counts")
        return f


def observe(field: LambdaField, c: CellIndex, outcome: Outcome, H: float, R: float) -> LambdaField:
    return field.observe(c, outcome, H, R)


def collision_probability(field: LambdaField, cells: Iterable[CellIndex]) -> float:
    return field.collision_probability(cells)


def ingest_scan(field: LambdaField, dem: ElevationMap, touched, H_safe: float, R: float) -> LambdaField:
    return field.ingest_scan(dem, touched, H_safe, R)

