import numpy as np
import pytest
from hypothesis import given, strategies as st

from lambda_nav.dem import ElevationMap, Outcome, classify_diff, touched_cells
from lambda_nav.errors import OutOfGrid, UnobservedCell
from lambda_nav.grid import CellIndex, GridSpec

SPEC = GridSpec((0.0, 0.0), 0.1, 10, 10)


def patch(center_z, neighbours):
    """Map with cell (5, 5) at center_z and the given {(dc, dr): z} neighbours."""
    m = ElevationMap(SPEC)
    pts = [(0.55, 0.55, center_z)]
    pts += [(0.55 + dc * 0.1, 0.55 + dr * 0.1, z) for (dc, dr), z in neighbours.items()]
    return m.integrate_cloud(np.array(pts))


def brute_diff(m, c):
    zc = m.z[c.row, c.col]
    best = 0.0
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            r, k = c.row + dr, c.col + dc
            if (dr, dc) != (0, 0) and 0 <= r < SPEC.height and 0 <= k < SPEC.width and m.n_points[r, k]:
                best = max(best, abs(zc - m.z[r, k]))
    return best


def test_single_point():
    m = ElevationMap(SPEC).integrate_cloud(np.array([[0.05, 0.05, 0.12]]))
    cell = m.cell(CellIndex(0, 0))
    assert (cell.z, cell.n_points, cell.observed) == (0.12, 1, True)
    assert not m.cell(CellIndex(1, 0)).observed


def test_running_max():
    m = ElevationMap(SPEC)
    m.integrate_cloud([[0.05, 0.05, 0.12]]).integrate_cloud([[0.05, 0.05, 0.07]])
    assert m.cell(CellIndex(0, 0)).z == 0.12
    assert m.cell(CellIndex(0, 0)).n_points == 2


def test_out_of_grid_points_are_skipped():
    m = ElevationMap(SPEC).integrate_cloud([[-0.5, 0.05, 1.0], [5.0, 5.0, 1.0], [0.05, 0.05, 0.0]])
    assert m.n_points.sum() == 1


def test_many_ground_points():
    spec = GridSpec((-10.0, -10.0), 0.1, 200, 200)
    rng = np.random.default_rng(1)
    pts = np.column_stack([rng.uniform(-5, 5, 100_000), rng.uniform(-5, 5, 100_000), np.zeros(100_000)])
    m = ElevationMap(spec).integrate_cloud(pts)
    obs = m.observed
    assert np.all(m.z[obs] == 0.0)
    assert np.all(np.isnan(m.z[~obs]))
    assert m.n_points.sum() == 100_000
    assert not obs[:50].any() and not obs[:, 150:].any()


def test_elevation_diff_examples():
    ring = {(dc, dr): 0.0 for dc in (-1, 0, 1) for dr in (-1, 0, 1) if (dc, dr) != (0, 0)}
    assert patch(0.10, ring).elevation_diff(CellIndex(5, 5)) == pytest.approx(0.10)
    plateau = {k: 0.3 for k in ring}
    assert patch(0.3, plateau).elevation_diff(CellIndex(5, 5)) == 0.0
    assert patch(0.0, {(1, 0): -0.05, (0, 1): 0.02}).elevation_diff(CellIndex(5, 5)) == pytest.approx(0.05)


def test_isolated_cell_has_zero_diff():
    assert patch(0.4, {}).elevation_diff(CellIndex(5, 5)) == 0.0


def test_unobserved_and_out_of_grid():
    m = ElevationMap(SPEC)
    with pytest.raises(UnobservedCell):
        m.elevation_diff(CellIndex(0, 0))
    with pytest.raises(UnobservedCell):
        m.classify(CellIndex(0, 0), 0.05)
    with pytest.raises(OutOfGrid):
        m.elevation_diff(CellIndex(10, 0))


@pytest.mark.parametrize("H, expected", [(0.04, Outcome.SAFE), (0.05, Outcome.HAZARDOUS),
                                         (0.20, Outcome.HAZARDOUS)])
def test_classify(H, expected):
    assert classify_diff(H, 0.05) is expected
    assert patch(H, {(1, 0): 0.0}).classify(CellIndex(5, 5), 0.05) is expected


heights = st.floats(-1.0, 1.0, allow_nan=False)


@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), heights), min_size=1, max_size=60))
def test_diff_map_matches_scalar_and_is_nonnegative(cells):
    m = ElevationMap(SPEC).integrate_cloud([(0.05 + c * 0.1, 0.05 + r * 0.1, z) for c, r, z in cells])
    H = m.elevation_diff_map()
    for row in range(SPEC.height):
        for col in range(SPEC.width):
            if m.n_points[row, col]:
                c = CellIndex(col, row)
                assert H[row, col] == m.elevation_diff(c) == brute_diff(m, c)
                assert H[row, col] >= 0
            else:
                assert np.isnan(H[row, col])


@given(st.lists(st.tuples(st.floats(0, 0.999), st.floats(0, 0.999), heights), min_size=1, max_size=50))
def test_integrate_is_idempotent(pts):
    once = ElevationMap(SPEC).integrate_cloud(pts)
    twice = ElevationMap(SPEC).integrate_cloud(pts).integrate_cloud(pts)
    assert np.array_equal(once.z, twice.z, equal_nan=True)
    assert np.array_equal(twice.n_points, 2 * once.n_points)


@given(heights, heights)
def test_pairwise_difference_is_symmetric(a, b):
    m1 = patch(a, {(1, 0): b})
    m2 = patch(b, {(1, 0): a})
    assert m1.elevation_diff(CellIndex(5, 5)) == m2.elevation_diff(CellIndex(5, 5))
    assert m1.elevation_diff(CellIndex(6, 5)) == m2.elevation_diff(CellIndex(6, 5))


@given(st.floats(-2, 2), st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1))
def test_constant_region_has_zero_diff(z, cells):
    m = ElevationMap(SPEC).integrate_cloud([(0.05 + c * 0.1, 0.05 + r * 0.1, z) for c, r in cells])
    assert np.nanmax(m.elevation_diff_map()) == 0.0


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    pts = np.column_stack([rng.uniform(0, 1, 40), rng.uniform(0, 1, 40), rng.normal(0, 0.1, 40)])
    m = ElevationMap(SPEC).integrate_cloud(pts)
    m.to_csv(tmp_path / "dem.csv")
    header = (tmp_path / "dem.csv").read_text().splitlines()[0]
    assert header == "col,row,z,n_points,observed"
    back = ElevationMap.from_csv(SPEC, tmp_path / "dem.csv")
    assert np.array_equal(back.z, m.z, equal_nan=True)
    assert np.array_equal(back.n_points, m.n_points)


def test_touched_cells_row_major_and_unique():
    pts = [(0.55, 0.15, 0), (0.05, 0.05, 0), (0.56, 0.16, 0), (0.05, 0.95, 0), (9.0, 9.0, 0)]
    assert touched_cells(SPEC, pts) == [(0, 0), (5, 1), (0, 9)]
