"""Coverage-based estimation from a handful of test scenarios.

Each test point owns the grid cells nearest to it in the min-max
normalized space (a Voronoi cell under the inverse-distance similarity);
its weight is the exposure mass of the owned cells, and the crash-rate
estimate is the weight-averaged response at the test points. The
fluctuation statistic measures, per test point, how much a crash map
varies over the point's coverage set, similarity- and exposure-weighted;
it proxies the estimation error a model could hide in that cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutin_sim import CrashMap
from .scenario_space import ExposurePmf, Scenario, ScenarioGrid, normalize

__all__ = [
    "TestSet",
    "CoveragePartition",
    "similarity",
    "similarity_cap",
    "partition",
    "estimate_mu",
    "fluctuation",
    "partition_to_csv",
]


@dataclass(frozen=True, eq=False)
class TestSet:
    """Ordered test scenarios; order is the argmax tie-breaking key."""

    __test__ = False  # not a pytest class despite the name

    points: np.ndarray = field(repr=False)  # shape (n, 2): columns r, rdot

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.points.shape[1] != 2 or self.points.shape[0] < 1:
            raise ValueError("test set must be an (n, 2) array with n >= 1")

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @classmethod
    def from_scenarios(cls, scenarios) -> "TestSet":
        return cls(points=np.array([[s.r, s.rdot] for s in scenarios], dtype=np.float64))

    def scenarios(self) -> list[Scenario]:
        return [Scenario(float(r), float(rd)) for r, rd in self.points]


@dataclass(frozen=True, eq=False)
class CoveragePartition:
    """Cell ownership and per-point exposure weights for one test set."""

    assignment: np.ndarray = field(repr=False)  # per-cell owner index
    weights: np.ndarray = field(repr=False)  # per-point exposure mass

    def __post_init__(self) -> None:
        total = float(self.weights.sum())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"coverage weights must sum to 1, got {total!r}")


def similarity(a: Scenario, b: Scenario, grid: ScenarioGrid) -> float:
    """Inverse normalized Euclidean distance; +inf for coincident points."""
    ax, ay = normalize(a, grid)
    bx, by = normalize(b, grid)
    d = math.hypot(ax - bx, ay - by)
    return math.inf if d == 0.0 else 1.0 / d


def similarity_cap(grid: ScenarioGrid) -> float:
    """Largest similarity used inside fluctuation sums.

    Half the normalized cell diagonal is the closest a cell center can sit
    to a point inside it, so 1 over that keeps the statistic finite and on
    the scale of the discretization.
    """
    diag = math.hypot(grid.r_step / grid.r_span, grid.rdot_step / grid.rdot_span)
    return 1.0 / (0.5 * diag)


def _check_in_box(ts: TestSet, grid: ScenarioGrid) -> None:
    r = ts.points[:, 0]
    rdot = ts.points[:, 1]
    if (
        np.any(r <= grid.r_min)
        or np.any(r > grid.r_max)
        or np.any(rdot < grid.rdot_min)
        or np.any(rdot > grid.rdot_max)
    ):
        raise ValueError("test point outside the scenario box")


def _normalized_points(ts: TestSet, grid: ScenarioGrid) -> np.ndarray:
    pn = np.empty_like(ts.points)
    pn[:, 0] = (ts.points[:, 0] - grid.r_min) / grid.r_span
    pn[:, 1] = (ts.points[:, 1] - grid.rdot_min) / grid.rdot_span
    return pn


def _sq_distances(ts: TestSet, grid: ScenarioGrid) -> np.ndarray:
    """Squared normalized distances, shape (n, n_cells)."""
    pn = _normalized_points(ts, grid)
    cxn, cyn = grid.normalized_centers()
    return (cxn[None, :] - pn[:, 0:1]) ** 2 + (cyn[None, :] - pn[:, 1:2]) ** 2


def partition(ts: TestSet, grid: ScenarioGrid, pmf: ExposurePmf) -> CoveragePartition:
    """Assign every cell to its most similar test point.

    Maximum similarity is minimum normalized distance; exact ties go to
    the lowest point index. Weights are the exposure mass owned per point.
    """
    _check_in_box(ts, grid)
    d2 = _sq_distances(ts, grid)
    owner = np.argmin(d2, axis=0)  # first minimum wins ties
    weights = np.bincount(owner, weights=pmf.masses, minlength=ts.n)
    return CoveragePartition(assignment=owner.astype(np.int64), weights=weights)


def estimate_mu(ts: TestSet, part: CoveragePartition, responses) -> float:
    """Weighted estimate of the crash rate from per-point responses.

    fsum keeps the result independent of point order, so permuting points
    and responses together reproduces the estimate bit for bit.
    """
    resp = np.asarray(responses, dtype=np.float64)
    if resp.shape != (ts.n,):
        raise ValueError("responses length must match test-set size")
    if np.any(resp < 0) or np.any(resp > 1):
        raise ValueError("responses must lie in [0, 1]")
    return math.fsum(float(r) * float(w) for r, w in zip(resp, part.weights))


def fluctuation(
    ts: TestSet,
    part: CoveragePartition,
    cmap: CrashMap,
    pmf: ExposurePmf,
    grid: ScenarioGrid,
) -> np.ndarray:
    """Per-point coverage fluctuation of one crash map.

    F_i = |sum over owned cells of (P(x) - P(at x_i)) p(x) S(x, x_i)|
          / sum over owned cells of p(x) S(x, x_i)

    with P read at the grid cell containing each point and S capped at
    similarity_cap(grid). Points owning no mass get F_i = 0.
    """
    d2 = _sq_distances(ts, grid)
    cells = np.arange(grid.n_cells)
    d_own = np.sqrt(d2[part.assignment, cells])
    cap = similarity_cap(grid)
    with np.errstate(divide="ignore"):
        s_eff = np.minimum(np.where(d_own > 0.0, 1.0 / d_own, np.inf), cap)
    p_at_point = np.array(
        [cmap.values[grid.cell_index(r, rd)] for r, rd in ts.points]
    )
    ps = pmf.masses * s_eff
    den = np.bincount(part.assignment, weights=ps, minlength=ts.n)
    num = np.bincount(
        part.assignment,
        weights=(cmap.values - p_at_point[part.assignment]) * ps,
        minlength=ts.n,
    )
    out = np.zeros(ts.n)
    nonzero = den > 0.0
    out[nonzero] = np.abs(num[nonzero]) / den[nonzero]
    return out


def partition_to_csv(part: CoveragePartition, grid: ScenarioGrid, path) -> None:
    """Export cell ownership as CSV (r,rdot,owner_index), row-major."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("r,rdot,owner_index\n")
        for r, rd, own in zip(grid.cell_r, grid.cell_rdot, part.assignment):
            fh.write(f"{r:.17g},{rd:.17g},{int(own)}\n")
