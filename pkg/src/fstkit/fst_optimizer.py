"""Minimax synthesis of test sets over a surrogate-model family.

The objective combines the worst estimate-versus-truth gap over the
vertex crash maps (linearity makes the vertex maximum dominate the whole
convex hull) with a coverage-fluctuation penalty that charges each test
point for how much the vertex maps vary inside its coverage cell. The
landscape is piecewise constant in the continuous point coordinates, so
the search is a multi-start compass pattern search rather than a literal
gradient method.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import objective_eval
from .cutin_sim import CrashMap, SurrogateSet, crash_rate
from .fst_estimator import (
    CoveragePartition,
    TestSet,
    estimate_mu,
    fluctuation,
    partition,
    similarity_cap,
)
from .scenario_space import ExposurePmf, ScenarioGrid

__all__ = ["ObjectiveReport", "OptimizerConfig", "objective", "synthesize", "evaluate_av"]

# fraction of the uniform-over-box share in the initialization mixture
UNIFORM_INIT_SHARE = 0.25


@dataclass(frozen=True)
class ObjectiveReport:
    """Breakdown of the synthesis objective at one test set."""

    per_vertex_gap: tuple[float, ...]
    worst_gap: float
    penalty: float
    w_m: float
    total_j: float
    estimation_error_e: float | None = None

    def __post_init__(self) -> None:
        if self.worst_gap < 0 or self.penalty < 0 or min(self.per_vertex_gap) < 0:
            raise ValueError("objective components must be nonnegative")
        expected = (
            self.worst_gap
            if math.isinf(self.w_m)
            else self.w_m * self.worst_gap + self.penalty
        )
        if abs(self.total_j - expected) > 1e-12:
            raise ValueError("total_j inconsistent with its parts")


@dataclass(frozen=True)
class OptimizerConfig:
    """Search settings. Steps are fractions of each box span.

    w_m weighs the worst vertex gap against the fluctuation penalty;
    math.inf selects the pure worst-gap objective.
    """

    n: int
    restarts: int = 8
    max_iters: int = 200
    init_step: float = 0.5
    min_step: float = 0.0028
    seed: int = 0
    w_m: float = 1.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError("restarts and max_iters must be at least 1")
        if not (0 < self.min_step < self.init_step):
            raise ValueError("need 0 < min_step < init_step")
        if self.w_m < 0:
            raise ValueError("w_m must be nonnegative")


def _point_cells(points: np.ndarray, grid: ScenarioGrid) -> np.ndarray:
    return np.array(
        [grid.cell_index(r, rd) for r, rd in points], dtype=np.int64
    )


def _vertex_rates(sset: SurrogateSet, pmf: ExposurePmf) -> np.ndarray:
    return np.array([crash_rate(v, pmf) for v in sset.vertices])


def objective(
    ts: TestSet,
    sset: SurrogateSet,
    pmf: ExposurePmf,
    grid: ScenarioGrid,
    w_m: float = 1.0,
) -> ObjectiveReport:
    """Reference objective, composed from the estimator primitives."""
    part = partition(ts, grid, pmf)
    cells = _point_cells(ts.points, grid)
    gaps = []
    f_stack = np.empty((len(sset.vertices), ts.n))
    for i, vertex in enumerate(sset.vertices):
        mu_tilde = estimate_mu(ts, part, vertex.values[cells])
        gaps.append(abs(mu_tilde - crash_rate(vertex, pmf)))
        f_stack[i] = fluctuation(ts, part, vertex, pmf, grid)
    worst = max(gaps)
    penalty = float(f_stack.max(axis=0) @ part.weights)
    total = worst if math.isinf(w_m) else w_m * worst + penalty
    return ObjectiveReport(
        per_vertex_gap=tuple(gaps),
        worst_gap=worst,
        penalty=penalty,
        w_m=w_m,
        total_j=total,
    )


class _FastObjective:
    """Precomputed kernel inputs for repeated candidate evaluations."""

    def __init__(self, sset: SurrogateSet, pmf: ExposurePmf, grid: ScenarioGrid, w_m: float):
        self.grid = grid
        cxn, cyn = grid.normalized_centers()
        self.cxn = np.ascontiguousarray(cxn)
        self.cyn = np.ascontiguousarray(cyn)
        self.pmf = np.ascontiguousarray(pmf.masses)
        self.pmaps = np.ascontiguousarray(
            np.stack([v.values for v in sset.vertices])
        )
        self.mu = _vertex_rates(sset, pmf)
        self.cap = similarity_cap(grid)
        self.w_m = float(w_m)

    def __call__(self, points: np.ndarray, cells: np.ndarray):
        pn = np.empty_like(points)
        pn[:, 0] = (points[:, 0] - self.grid.r_min) / self.grid.r_span
        pn[:, 1] = (points[:, 1] - self.grid.rdot_min) / self.grid.rdot_span
        return objective_eval(
            pn, cells, self.cxn, self.cyn, self.pmf, self.pmaps, self.mu, self.cap, self.w_m
        )


def _init_points(rng: np.random.Generator, n: int, grid: ScenarioGrid, cdf: np.ndarray) -> np.ndarray:
    """Exposure-proportional initialization with a uniform-over-box share."""
    lo_r = grid.r_min + 1e-9 * grid.r_span  # keep r strictly above the open edge
    pts = np.empty((n, 2))
    for i in range(n):
        if rng.random() < UNIFORM_INIT_SHARE:
            pts[i, 0] = max(lo_r, grid.r_min + rng.random() * grid.r_span)
            pts[i, 1] = grid.rdot_min + rng.random() * grid.rdot_span
        else:
            cell = int(np.searchsorted(cdf, rng.random(), side="right"))
            cell = min(cell, grid.n_cells - 1)
            ir, jd = divmod(cell, grid.n_rdot)
            pts[i, 0] = max(lo_r, grid.r_min + (ir + rng.random()) * grid.r_step)
            pts[i, 1] = grid.rdot_min + (jd + rng.random()) * grid.rdot_step
    return pts


def synthesize(
    cfg: OptimizerConfig,
    sset: SurrogateSet,
    pmf: ExposurePmf,
    grid: ScenarioGrid,
    trace: list | None = None,
) -> tuple[TestSet, ObjectiveReport]:
    """Multi-start compass search for the best n-point test set.

    Per restart: sample an initial set, then sweep the points in order
    trying moves (+r, -r, +rdot, -rdot) of the current step (a fraction
    of each span), accepting the first strict improvement per point;
    after a sweep with no acceptance the step halves, stopping below
    cfg.min_step or at cfg.max_iters sweeps. Deterministic given cfg.seed.
    The returned report is recomputed with the reference objective.
    """
    fast = _FastObjective(sset, pmf, grid, cfg.w_m)
    cdf = np.cumsum(pmf.masses)
    lo_r = grid.r_min + 1e-9 * grid.r_span
    best_total = math.inf
    best_points: np.ndarray | None = None
    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        pts = _init_points(rng, cfg.n, grid, cdf)
        cells = _point_cells(pts, grid)
        cur_total, cur_worst, cur_pen = fast(pts, cells)
        step = cfg.init_step
        if trace is not None:
            trace.append((0, restart, cur_total, cur_worst, cur_pen, step))
        sweep = 0
        while step >= cfg.min_step and sweep < cfg.max_iters:
            sweep += 1
            improved = False
            for j in range(cfg.n):
                for dr, dd in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    cand_r = pts[j, 0] + dr * step * grid.r_span
                    cand_rd = pts[j, 1] + dd * step * grid.rdot_span
                    cand_r = min(max(cand_r, lo_r), grid.r_max)
                    cand_rd = min(max(cand_rd, grid.rdot_min), grid.rdot_max)
                    if cand_r == pts[j, 0] and cand_rd == pts[j, 1]:
                        continue
                    old = (pts[j, 0], pts[j, 1], cells[j])
                    pts[j, 0], pts[j, 1] = cand_r, cand_rd
                    cells[j] = grid.cell_index(cand_r, cand_rd)
                    cand_total, cand_worst, cand_pen = fast(pts, cells)
                    if cand_total < cur_total:
                        cur_total, cur_worst, cur_pen = cand_total, cand_worst, cand_pen
                        improved = True
                        if trace is not None:
                            trace.append((sweep, restart, cur_total, cur_worst, cur_pen, step))
                        break
                    pts[j, 0], pts[j, 1], cells[j] = old
            if not improved:
                step *= 0.5
        if cur_total < best_total:
            best_total = cur_total
            best_points = pts.copy()
    assert best_points is not None
    ts = TestSet(points=best_points)
    return ts, objective(ts, sset, pmf, grid, cfg.w_m)


def evaluate_av(
    ts: TestSet,
    av_map: CrashMap,
    pmf: ExposurePmf,
    grid: ScenarioGrid,
    part: CoveragePartition | None = None,
) -> tuple[float, float]:
    """Estimate an evaluated vehicle on a fixed test set.

    Responses are read from the vehicle's crash map at the points' cells;
    returns (mu_hat, realized absolute error versus the full-grid oracle).
    """
    if part is None:
        part = partition(ts, grid, pmf)
    cells = _point_cells(ts.points, grid)
    mu_hat = estimate_mu(ts, part, av_map.values[cells])
    return mu_hat, abs(mu_hat - crash_rate(av_map, pmf))
