import math

import numpy as np
import pytest

from fstkit.cutin_sim import CrashMap
from fstkit.fst_estimator import (
    CoveragePartition,
    TestSet,
    estimate_mu,
    fluctuation,
    partition,
    partition_to_csv,
    similarity,
    similarity_cap,
)
from fstkit.scenario_space import Scenario, build_exposure, build_grid, normalize

from conftest import random_test_set_points


def brute_force_partition(points, grid):
    """Independent nearest-point scan; first minimum wins ties."""
    owners = np.empty(grid.n_cells, dtype=np.int64)
    norm = [normalize(Scenario(r, rd), grid) for r, rd in points]
    for k in range(grid.n_cells):
        cx = (grid.cell_r[k] - grid.r_min) / grid.r_span
        cy = (grid.cell_rdot[k] - grid.rdot_min) / grid.rdot_span
        best, best_d = 0, math.inf
        for i, (px, py) in enumerate(norm):
            d = (cx - px) ** 2 + (cy - py) ** 2
            if d < best_d:
                best, best_d = i, d
        owners[k] = best
    return owners


@pytest.fixture(scope="module")
def coarse():
    grid = build_grid(((0.0, 90.0), (-20.0, 10.0)), (7.5, 2.5))
    pmf = build_exposure(grid, [[0.7, 40.0, 0.0, 15.0, 4.0], [0.3, 65.0, -10.0, 10.0, 5.0]])
    return grid, pmf


def test_partition_matches_brute_force_scan(coarse):
    grid, pmf = coarse
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(1, 26))
        ts = TestSet(points=random_test_set_points(rng, grid, n))
        part = partition(ts, grid, pmf)
        assert np.array_equal(part.assignment, brute_force_partition(ts.points, grid))
        assert abs(part.weights.sum() - 1.0) <= 1e-12
        # weights are exactly the owned exposure mass
        for i in range(n):
            owned = pmf.masses[part.assignment == i].sum()
            assert abs(part.weights[i] - owned) <= 1e-15


def test_partition_total_and_disjoint(world, grid, pmf):
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(1, 26))
        ts = TestSet(points=random_test_set_points(rng, grid, n))
        part = partition(ts, grid, pmf)
        assert part.assignment.shape == (grid.n_cells,)
        assert np.all((part.assignment >= 0) & (part.assignment < n))


def test_partition_duplicate_point_owns_nothing(coarse):
    grid, pmf = coarse
    pts = np.array([[40.0, -5.0], [40.0, -5.0], [70.0, 5.0]])
    part = partition(TestSet(points=pts), grid, pmf)
    assert not np.any(part.assignment == 1)  # tie goes to the lower index
    assert part.weights[1] == 0.0


def test_partition_rejects_points_outside_box(coarse):
    grid, pmf = coarse
    with pytest.raises(ValueError):
        partition(TestSet(points=np.array([[0.0, 0.0]])), grid, pmf)  # r-edge open
    with pytest.raises(ValueError):
        partition(TestSet(points=np.array([[50.0, 11.0]])), grid, pmf)


def test_similarity_inverse_distance_and_sentinel(grid):
    a = Scenario(grid.r_min + 1e-9, grid.rdot_min)
    b = Scenario(grid.r_max, grid.rdot_max)
    assert abs(similarity(a, b, grid) - 1.0 / math.sqrt(2.0)) <= 1e-9
    assert similarity(a, a, grid) == math.inf
    assert similarity(a, b, grid) == similarity(b, a, grid)


def test_similarity_cap_is_inverse_half_cell_diagonal(grid):
    expected = 2.0 / math.hypot(grid.r_step / grid.r_span, grid.rdot_step / grid.rdot_span)
    assert abs(similarity_cap(grid) - expected) <= 1e-12


def test_estimate_mu_validates_responses(coarse):
    grid, pmf = coarse
    ts = TestSet(points=np.array([[40.0, -5.0], [70.0, 5.0]]))
    part = partition(ts, grid, pmf)
    with pytest.raises(ValueError):
        estimate_mu(ts, part, [0.5])
    with pytest.raises(ValueError):
        estimate_mu(ts, part, [0.5, 1.5])


def test_estimate_mu_permutation_equivariance(world, grid, pmf, av_map):
    rng = np.random.default_rng(5)
    pts = random_test_set_points(rng, grid, 12)
    ts = TestSet(points=pts)
    part = partition(ts, grid, pmf)
    resp = np.array([av_map.values[grid.cell_index(r, rd)] for r, rd in pts])
    base = estimate_mu(ts, part, resp)
    for _ in range(100):
        perm = rng.permutation(12)
        ts_p = TestSet(points=pts[perm])
        part_p = partition(ts_p, grid, pmf)
        assert estimate_mu(ts_p, part_p, resp[perm]) == base  # bitwise


def test_constant_map_collapses_to_exact_rate(coarse):
    grid, pmf = coarse
    rng = np.random.default_rng(9)
    for c in (0.0, 1.0, 0.37):
        cmap = CrashMap(values=np.full(grid.n_cells, c), grid=grid)
        mu = float(cmap.values @ pmf.masses)
        for _ in range(20):
            n = int(rng.integers(1, 15))
            ts = TestSet(points=random_test_set_points(rng, grid, n))
            part = partition(ts, grid, pmf)
            assert abs(estimate_mu(ts, part, np.full(n, c)) - mu) <= 1e-15


def brute_force_fluctuation(ts, part, cmap, pmf, grid):
    """Direct double loop over points and their owned cells."""
    cap = similarity_cap(grid)
    out = np.zeros(ts.n)
    for i, (r, rd) in enumerate(ts.points):
        p_at = cmap.values[grid.cell_index(r, rd)]
        num = den = 0.0
        for k in np.where(part.assignment == i)[0]:
            s = similarity(Scenario(r, rd), grid.cell_center(int(k)), grid)
            s = min(s, cap)
            num += (cmap.values[k] - p_at) * pmf.masses[k] * s
            den += pmf.masses[k] * s
        if den > 0:
            out[i] = abs(num) / den
    return out


def test_fluctuation_matches_double_loop_oracle(world, grid, pmf):
    m1 = world.crash_map("m1")
    pts = np.array([[30.0, -19.6], [58.0, -16.6], [45.0, 0.5], [70.0, 3.0], [12.0, -8.0]])
    ts = TestSet(points=pts)
    part = partition(ts, grid, pmf)
    got = fluctuation(ts, part, m1, pmf, grid)
    want = brute_force_fluctuation(ts, part, m1, pmf, grid)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-15)
    assert np.all((got >= 0) & (got <= 1))


def test_fluctuation_zero_on_locally_constant_map(coarse):
    grid, pmf = coarse
    cmap = CrashMap(values=np.full(grid.n_cells, 0.37), grid=grid)
    ts = TestSet(points=np.array([[25.0, -12.0], [60.0, 4.0]]))
    part = partition(ts, grid, pmf)
    assert np.all(fluctuation(ts, part, cmap, pmf, grid) == 0.0)


def test_fluctuation_saturates_when_coverage_disagrees_everywhere(coarse):
    grid, pmf = coarse
    # point 1 sits exactly at a cell center, so point 0 (same cell, off
    # center) owns none of it; every cell point 0 owns responds 1 while
    # its own containing cell responds 0.
    center = grid.cell_center(grid.cell_index(41.0, -6.0))
    values = np.ones(grid.n_cells)
    values[grid.cell_index(center.r, center.rdot)] = 0.0
    cmap = CrashMap(values=values, grid=grid)
    ts = TestSet(points=np.array([[center.r + 0.4, center.rdot], [center.r, center.rdot]]))
    part = partition(ts, grid, pmf)
    f = fluctuation(ts, part, cmap, pmf, grid)
    assert f[0] == 1.0


def test_fluctuation_zero_weight_point(coarse):
    grid, pmf = coarse
    cmap = CrashMap(values=np.zeros(grid.n_cells), grid=grid)
    pts = np.array([[40.0, -5.0], [40.0, -5.0]])
    ts = TestSet(points=pts)
    part = partition(ts, grid, pmf)
    f = fluctuation(ts, part, cmap, pmf, grid)
    assert f[1] == 0.0


def test_partition_csv_export(tmp_path, coarse):
    grid, pmf = coarse
    ts = TestSet(points=np.array([[40.0, -5.0], [70.0, 5.0]]))
    part = partition(ts, grid, pmf)
    path = tmp_path / "part.csv"
    partition_to_csv(part, grid, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,rdot,owner_index"
    assert len(lines) == 1 + grid.n_cells
    r, rd, owner = lines[1].split(",")
    assert int(owner) in (0, 1)
    assert float(r) == grid.cell_r[0] and float(rd) == grid.cell_rdot[0]


def test_coverage_partition_weight_validation():
    with pytest.raises(ValueError):
        CoveragePartition(assignment=np.zeros(4, dtype=np.int64), weights=np.array([0.5, 0.4]))


def test_test_set_shape_validation():
    with pytest.raises(ValueError):
        TestSet(points=np.zeros((0, 2)))
    with pytest.raises(ValueError):
        TestSet(points=np.zeros((3, 3)))
    ts = TestSet.from_scenarios([Scenario(40.0, -5.0)])
    assert ts.n == 1 and ts.scenarios()[0] == Scenario(40.0, -5.0)
