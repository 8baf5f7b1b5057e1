import numpy as np
import pytest

from fstkit.harness import build_world, load_config


@pytest.fixture(scope="session")
def world():
    return build_world(load_config())


@pytest.fixture(scope="session")
def grid(world):
    return world.grid


@pytest.fixture(scope="session")
def pmf(world):
    return world.pmf


@pytest.fixture(scope="session")
def av_map(world):
    return world.crash_map("av")


@pytest.fixture(scope="session")
def sset(world):
    return world.surrogate_set()


def random_test_set_points(rng, grid, n):
    """Uniform points inside the box; r-edge is open at the minimum."""
    r = grid.r_min + rng.random(n) * grid.r_span
    r = np.maximum(r, grid.r_min + 1e-9 * grid.r_span)
    rdot = grid.rdot_min + rng.random(n) * grid.rdot_span
    return np.column_stack((r, rdot))
