import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lambda_nav.errors import OutOfGrid
from lambda_nav.grid import (CellIndex, GridSpec, cell_center, raster_path, raster_polyline, segment_cells,
                             transverse_cells, world_to_cell)

UNIT = GridSpec((0.0, 0.0), 0.1, 50, 50)
MAP = GridSpec((-10.0, -10.0), 0.1, 200, 200)


def clip_chord(a, b, lo, hi):
    """Liang-Barsky: (t0, t1) of the segment inside the closed box, or None."""
    t0, t1 = 0.0, 1.0
    for k in range(2):
        d = b[k] - a[k]
        for p, q in ((-d, a[k] - lo[k]), (d, hi[k] - a[k])):
            if p == 0:
                if q < 0:
                    return None
            else:
                r = q / p
                if p < 0:
                    t0 = max(t0, r)
                else:
                    t1 = min(t1, r)
    return (t0, t1) if t0 <= t1 else None


def exact_cells(spec, a, b):
    """Every cell whose closed square meets the segment, with entry parameter and chord length."""
    cs = spec.cell_size
    c0, c1 = sorted((a[0], b[0]))
    r0, r1 = sorted((a[1], b[1]))
    out = {}
    for col in range(int((c0 - spec.origin[0]) // cs) - 1, int((c1 - spec.origin[0]) // cs) + 2):
        for row in range(int((r0 - spec.origin[1]) // cs) - 1, int((r1 - spec.origin[1]) // cs) + 2):
            lo = (spec.origin[0] + col * cs, spec.origin[1] + row * cs)
            hi = (lo[0] + cs, lo[1] + cs)
            hit = clip_chord(a, b, lo, hi)
            if hit and spec.contains((col, row)):
                out[(col, row)] = (hit[0], (hit[1] - hit[0]) * math.dist(a, b))
    return out


def sampled_cells(spec, a, b, step=0.001):
    n = max(1, int(math.ceil(math.dist(a, b) / step)))
    t = np.linspace(0.0, 1.0, n + 1)
    pts = np.column_stack([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
    return {tuple(world_to_cell(spec, p)) for p in pts}


def test_world_to_cell_examples():
    assert world_to_cell(GridSpec((0, 0), 0.1, 10, 10), (0.05, 0.05)) == (0, 0)
    assert world_to_cell(GridSpec((0, 0), 0.1, 10, 10), (0.10, 0.00)) == (1, 0)
    assert world_to_cell(MAP, (0.0, 0.0)) == (100, 100)


def test_world_to_cell_out_of_bounds():
    with pytest.raises(OutOfGrid):
        world_to_cell(UNIT, (-0.01, 0.0))
    with pytest.raises(OutOfGrid):
        world_to_cell(UNIT, (5.0, 0.0))  # the upper edge belongs to no cell


def test_cell_center_examples():
    assert cell_center(UNIT, CellIndex(0, 0)) == pytest.approx((0.05, 0.05))
    assert cell_center(UNIT, CellIndex(3, 1)) == pytest.approx((0.35, 0.15))
    with pytest.raises(OutOfGrid):
        cell_center(UNIT, CellIndex(50, 0))


def test_gridspec_guards_and_area():
    with pytest.raises(ValueError):
        GridSpec((0, 0), 0.0, 1, 1)
    with pytest.raises(ValueError):
        GridSpec((0, 0), 0.1, 0, 1)
    assert MAP.cell_area == MAP.cell_size * MAP.cell_size


def test_center_round_trip_1000_cells():
    rng = np.random.default_rng(7)
    for col, row in rng.integers(0, 200, size=(1000, 2)):
        c = CellIndex(int(col), int(row))
        assert world_to_cell(MAP, cell_center(MAP, c)) == c


@given(st.integers(0, 199), st.integers(0, 199))
def test_center_round_trip_property(col, row):
    assert world_to_cell(MAP, cell_center(MAP, CellIndex(col, row))) == (col, row)


def test_raster_examples():
    assert raster_path(UNIT, [(0.05, 0.05), (0.25, 0.05)]) == [(0, 0), (1, 0), (2, 0)]
    assert raster_path(UNIT, [(0.05, 0.05), (0.05, 0.05)]) == [(0, 0)]


def test_raster_diagonal_includes_corner_neighbours():
    # Frozen from the exact-clipping oracle: the diagonal passes through two lattice corners.
    cells = raster_path(UNIT, [(0.05, 0.05), (0.25, 0.25)])
    assert cells == [(0, 0), (1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2)]
    assert set(cells) == set(exact_cells(UNIT, (0.05, 0.05), (0.25, 0.25)))
    assert sampled_cells(UNIT, (0.05, 0.05), (0.25, 0.25)) <= set(cells)


def test_raster_matches_oracles_on_100_random_segments():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        a, b = rng.uniform(0.0, 4.99, size=(2, 2))
        cells = raster_path(UNIT, [tuple(a), tuple(b)])
        exact = exact_cells(UNIT, a, b)
        assert len(cells) == len(set(cells))  # a straight segment never re-enters a cell
        assert set(cells) == set(exact)
        # entry order follows the oracle's entry parameters
        ts = [exact[c][0] for c in cells]
        assert ts == sorted(ts)
        sampled = sampled_cells(UNIT, a, b)
        assert sampled <= set(cells)
        # every cell the 1 mm sampler cannot miss (chord over 2 mm) is found by it
        assert {c for c, (_, chord) in exact.items() if chord > 0.002} <= sampled


@given(st.floats(0.0, 4.99), st.floats(0.0, 4.99), st.floats(0.0, 4.99), st.floats(0.0, 4.99))
def test_raster_reversal_symmetry(x0, y0, x1, y1):
    fwd = raster_path(UNIT, [(x0, y0), (x1, y1)])
    rev = raster_path(UNIT, [(x1, y1), (x0, y0)])
    assert set(fwd) == set(rev)
    assert fwd[0] == rev[-1] and fwd[-1] == rev[0]


@given(st.floats(0.0, 4.99), st.floats(0.0, 4.99), st.floats(0.0, 4.99), st.floats(0.0, 4.99))
def test_raster_is_4_connected_and_inclusive(x0, y0, x1, y1):
    cells = raster_path(UNIT, [(x0, y0), (x1, y1)])
    assert cells[0] == world_to_cell(UNIT, (x0, y0))
    assert cells[-1] == world_to_cell(UNIT, (x1, y1))
    for (c0, r0), (c1, r1) in zip(cells, cells[1:]):
        assert abs(c1 - c0) + abs(r1 - r0) <= 2


def test_segment_entry_parameters():
    out = segment_cells(UNIT, (0.05, 0.05), (0.35, 0.05))
    assert [(c, r) for c, r, _ in out] == [(0, 0), (1, 0), (2, 0), (3, 0)]
    assert [t for _, _, t in out] == pytest.approx([0.0, 1 / 6, 0.5, 5 / 6])


def test_polyline_revisits_and_segment_tags():
    poly = [(0.05, 0.05), (0.25, 0.05), (0.05, 0.05)]
    out = raster_polyline(UNIT, poly)
    assert [(c, r) for c, r, _, _ in out] == [(0, 0), (1, 0), (2, 0), (1, 0), (0, 0)]
    assert [k for _, _, k, _ in out] == [0, 0, 0, 1, 1]


def test_raster_errors():
    with pytest.raises(OutOfGrid):
        raster_path(UNIT, [(0.05, 0.05), (6.0, 0.05)])
    with pytest.raises(ValueError):
        raster_path(UNIT, [(0.05, 0.05)])


def test_snapping_of_decimal_inputs():
    # 0.3 / 0.1 is 2.9999999999999996 in floating point; the snap puts it on the boundary.
    assert world_to_cell(UNIT, (0.3, 0.0)) == (3, 0)
    assert raster_path(UNIT, [(0.3, 0.05), (0.55, 0.05)]) == [(3, 0), (4, 0), (5, 0)]


def test_transverse_examples():
    one = transverse_cells(UNIT, (0.25, 0.25, 0.0), 0.1)
    assert 1 <= len(one) <= 2 and {c for c, _ in one} == {2}
    wide = transverse_cells(MAP, (0.05, 0.05, 0.0), 0.8)
    assert 8 <= len(wide) <= 9 and {c for c, _ in wide} == {100}
    rows = [r for _, r in wide]
    assert rows == sorted(rows) and rows == list(range(rows[0], rows[0] + len(rows)))


def test_transverse_matches_sampler():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x, y = rng.uniform(-8, 8, 2)
        th = rng.uniform(-math.pi, math.pi)
        cells = set(transverse_cells(MAP, (x, y, th), 0.8))
        hx, hy = -math.sin(th) * 0.4, math.cos(th) * 0.4
        a, b = (x - hx, y - hy), (x + hx, y + hy)
        assert sampled_cells(MAP, a, b) <= cells
        assert cells == set(exact_cells(MAP, a, b))


@given(st.floats(-8, 8), st.floats(-8, 8), st.floats(-math.pi, math.pi))
def test_transverse_heading_sense_invariance(x, y, th):
    assert transverse_cells(MAP, (x, y, th), 0.8) == transverse_cells(MAP, (x, y, th + math.pi), 0.8)


def test_transverse_quarter_turn_symmetry():
    # Rotating the pose by 90 degrees about a lattice point rotates the cell set.
    spec = GridSpec((-1.0, -1.0), 0.1, 20, 20)
    cells0 = transverse_cells(spec, (0.0, 0.0, 0.0), 0.8)
    cells1 = transverse_cells(spec, (0.0, 0.0, math.pi / 2), 0.8)
    col0 = {c for c, _ in cells0}
    row1 = {r for _, r in cells1}
    assert len(col0) == 1 and len(row1) == 1
    assert sorted(r for _, r in cells0) == sorted(c for c, _ in cells1)


def test_transverse_out_of_grid():
    with pytest.raises(OutOfGrid):
        transverse_cells(UNIT, (0.1, 0.1, 0.0), 0.8)


lattice = st.integers(0, 49).map(lambda k: k / 10)


@given(lattice, lattice, lattice, lattice)
def test_reversal_symmetry_on_lattice_points(x0, y0, x1, y1):
    fwd = raster_path(UNIT, [(x0, y0), (x1, y1)])
    rev = raster_path(UNIT, [(x1, y1), (x0, y0)])
    assert fwd[0] == rev[-1] == world_to_cell(UNIT, (x0, y0))
    assert fwd[-1] == rev[0] == world_to_cell(UNIT, (x1, y1))
    assert set(fwd) == set(rev)
    assert all(UNIT.contains(c) for c in fwd)
