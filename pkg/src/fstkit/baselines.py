"""Monte Carlo reference estimators the synthesis method is compared to.

CMC draws scenarios from the exposure pmf itself (testing as the world
drives); RQMC spreads scenarios evenly over the box with a randomly
shifted Halton sequence and reweights them by exposure so the estimate
still targets the crash rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutin_sim import CrashMap
from .scenario_space import ExposurePmf, ScenarioGrid

__all__ = ["BaselineDraw", "cmc_sample", "rqmc_sample", "halton", "estimate"]


@dataclass(frozen=True, eq=False)
class BaselineDraw:
    """A sampled test set with its estimator weights."""

    method: str  # "CMC" or "RQMC"
    points: np.ndarray = field(repr=False)  # (n, 2)
    weights: np.ndarray = field(repr=False)  # (n,)


def _radical_inverse(i: int, base: int) -> float:
    inv = 0.0
    denom = 1.0
    while i > 0:
        i, digit = divmod(i, base)
        denom *= base
        inv += digit / denom
    return inv


def halton(n: int) -> np.ndarray:
    """First n points of the 2-D Halton sequence (bases 2, 3), index from 1."""
    return np.array(
        [[_radical_inverse(i, 2), _radical_inverse(i, 3)] for i in range(1, n + 1)]
    )


def cmc_sample(n: int, pmf: ExposurePmf, grid: ScenarioGrid, seed: int) -> BaselineDraw:
    """n i.i.d. cells from the exposure pmf, equal weights 1/n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(pmf.masses)
    cells = np.minimum(
        np.searchsorted(cdf, rng.random(n), side="right"), grid.n_cells - 1
    )
    points = np.column_stack((grid.cell_r[cells], grid.cell_rdot[cells]))
    return BaselineDraw(method="CMC", points=points, weights=np.full(n, 1.0 / n))


def rqmc_sample(n: int, pmf: ExposurePmf, grid: ScenarioGrid, seed: int) -> BaselineDraw:
    """Halton prefix with a seeded toroidal shift, mapped onto the box.

    The points are a uniform proposal over the discrete space, so each
    carries a self-normalized importance weight proportional to the
    exposure mass of its cell; a draw landing only on zero-mass cells
    degenerates to all-zero weights (estimate 0).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    unit = (halton(n) + rng.random(2)) % 1.0
    lo_r = grid.r_min + 1e-9 * grid.r_span  # r-edge is open
    points = np.column_stack(
        (
            np.maximum(lo_r, grid.r_min + unit[:, 0] * grid.r_span),
            grid.rdot_min + unit[:, 1] * grid.rdot_span,
        )
    )
    raw = np.array(
        [pmf.masses[grid.cell_index(r, rd)] for r, rd in points]
    )
    total = float(raw.sum())
    weights = raw / total if total > 0.0 else raw
    return BaselineDraw(method="RQMC", points=points, weights=weights)


def estimate(draw: BaselineDraw, cmap: CrashMap, grid: ScenarioGrid) -> float:
    """Weighted estimate of the crash rate from a baseline draw."""
    responses = [cmap.values[grid.cell_index(r, rd)] for r, rd in draw.points]
    return math.fsum(w * resp for w, resp in zip(draw.weights, responses))
