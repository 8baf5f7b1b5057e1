import math

import numpy as np
import pytest

from fstkit.cutin_sim import (
    MAX_BRAKE,
    CrashMap,
    IdmParams,
    SimConfig,
    SurrogateSet,
    compute_crash_map,
    convex_combine,
    crash_rate,
    idm_acceleration,
    simulate_cutin,
)
from fstkit.scenario_space import Scenario

P_REF = IdmParams(v0=30.0, T=1.5, a_max=1.0, b=2.0, s0=2.0)


def test_idm_acceleration_hand_value():
    # s* = 2 + 20*1.5 + 20*5 / (2*sqrt(2)) = 67.35533905932738
    # a  = 1 - (20/30)^4 - (s*/30)^2
    a = idm_acceleration(20.0, 15.0, 30.0, P_REF)
    assert abs(a - (-4.238354975083034)) <= 1e-9


def test_idm_acceleration_clamps_at_physical_floor():
    a = idm_acceleration(20.0, 0.0, 5.0, P_REF)
    assert a == MAX_BRAKE


def test_idm_acceleration_rejects_nonpositive_gap():
    with pytest.raises(ValueError):
        idm_acceleration(20.0, 15.0, 0.0, P_REF)


def test_idm_params_validation():
    with pytest.raises(ValueError):
        IdmParams(v0=30.0, T=0.0, a_max=1.0, b=2.0, s0=2.0)
    with pytest.raises(ValueError):
        IdmParams(v0=30.0, T=1.5, a_max=1.0, b=-2.0, s0=2.0)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(horizon=0.5)
    with pytest.raises(ValueError):
        SimConfig(d_th=-1.0)
    assert SimConfig().n_steps == 400


def test_simulate_cutin_immediate_contact():
    cfg = SimConfig()
    crash, min_gap = simulate_cutin(Scenario(2.0, 0.0), P_REF, cfg)
    assert crash and min_gap == 2.0


def test_simulate_cutin_benign_far_opening():
    crash, min_gap = simulate_cutin(Scenario(80.0, 5.0), P_REF, SimConfig())
    assert not crash
    assert min_gap >= SimConfig().d_th


def test_scalar_and_vectorized_rollouts_agree(world, grid):
    cfg = world.sim
    rng = np.random.default_rng(7)
    for name in ("av", "m1", "m4"):
        params = world.model_params(name)
        cmap = world.crash_map(name)
        cells = rng.choice(grid.n_cells, size=150, replace=False)
        # include the crash boundary, where disagreement would hide
        edge = np.where(np.abs(np.diff(cmap.values)) > 0)[0]
        for k in np.concatenate((cells, edge[:150], edge[:150] + 1)):
            c = grid.cell_center(int(k))
            crash, _ = simulate_cutin(c, params, cfg)
            assert float(crash) == cmap.values[k], (name, k, c)


def test_crash_maps_are_binary(world):
    for name in ("av", "m1", "m2", "m3", "m4"):
        vals = world.crash_map(name).values
        assert np.all((vals == 0.0) | (vals == 1.0))


def test_crash_region_is_prefix_in_r_per_column(world, grid):
    # closer initial range can only be worse, at any fixed range rate
    for name in ("av", "m1", "m2", "m3", "m4"):
        by_col = world.crash_map(name).values.reshape(grid.n_r, grid.n_rdot)
        diffs = np.diff(by_col, axis=0)
        assert np.all(diffs <= 0), name


def test_vertex_crash_sets_are_nested(world):
    order = ("av", "m1", "m2", "m3", "m4")
    for lo, hi in zip(order, order[1:]):
        a = world.crash_map(lo).values
        b = world.crash_map(hi).values
        assert np.all(a <= b), (lo, hi)


def test_crash_map_validation(grid):
    with pytest.raises(ValueError):
        CrashMap(values=np.zeros(3), grid=grid)
    with pytest.raises(ValueError):
        CrashMap(values=np.full(grid.n_cells, 1.5), grid=grid)


def test_surrogate_set_needs_two_vertices(av_map):
    with pytest.raises(ValueError):
        SurrogateSet(vertices=(av_map,))


def test_convex_combine_weights_validation(sset):
    with pytest.raises(ValueError):
        convex_combine(sset, [0.5, 0.5])
    with pytest.raises(ValueError):
        convex_combine(sset, [0.7, 0.5, -0.1, -0.1])
    with pytest.raises(ValueError):
        convex_combine(sset, [0.4, 0.3, 0.2, 0.2])


def test_crash_rate_is_linear_over_combinations(world, sset, pmf):
    rng = np.random.default_rng(3)
    vertex_rates = np.array([crash_rate(v, pmf) for v in sset.vertices])
    for _ in range(20):
        c = rng.dirichlet(np.ones(len(sset.vertices)))
        combined = convex_combine(sset, c)
        assert np.all((combined.values >= 0) & (combined.values <= 1))
        assert abs(crash_rate(combined, pmf) - float(c @ vertex_rates)) <= 1e-12


def test_crash_rate_alignment_check(av_map):
    from fstkit.scenario_space import ExposurePmf

    bad = ExposurePmf(masses=np.array([1.0]))
    with pytest.raises(ValueError):
        crash_rate(av_map, bad)
