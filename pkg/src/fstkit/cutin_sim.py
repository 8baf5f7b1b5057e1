"""Cut-in encounter simulation under an IDM-controlled following vehicle.

The vehicle under test (AV) follows the cutting-in background vehicle (BV)
with the standard Intelligent Driver Model; the BV holds its speed after
the lane change. A scenario crashes when the center-to-center range drops
below the contact threshold d_th at any point within the horizon. Running
every grid cell through the simulator yields a binary crash map per driver
parameterization; a family of such maps, closed under pointwise convex
combination, stands in for the uncertainty about the vehicle under test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario_space import ExposurePmf, Scenario, ScenarioGrid

__all__ = [
    "IdmParams",
    "SimConfig",
    "CrashMap",
    "SurrogateSet",
    "idm_acceleration",
    "simulate_cutin",
    "compute_crash_map",
    "convex_combine",
    "crash_rate",
    "crash_map_to_csv",
]

# physical braking floor, m/s^2
MAX_BRAKE = -9.8


@dataclass(frozen=True)
class IdmParams:
    """IDM driver parameters.

    v0: desired speed (m/s), T: time headway (s), a_max: max acceleration
    (m/s^2), b: comfortable deceleration (m/s^2), s0: jam distance (m),
    delta: acceleration exponent.
    """

    v0: float
    T: float
    a_max: float
    b: float
    s0: float
    delta: float = 4.0

    def __post_init__(self) -> None:
        for name in ("v0", "T", "a_max", "b", "s0", "delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be positive")


@dataclass(frozen=True)
class SimConfig:
    """Rollout settings shared by all models."""

    dt: float = 0.1
    horizon: float = 40.0
    v_av0: float = 20.0
    d_th: float = 4.4

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon < 1.0:
            raise ValueError("horizon must be at least 1 s")
        if self.v_av0 <= 0:
            raise ValueError("v_av0 must be positive")
        if self.d_th < 0:
            raise ValueError("d_th must be nonnegative")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True, eq=False)
class CrashMap:
    """Per-cell crash probability in [0, 1], aligned with a grid.

    Binary when produced by direct simulation; fractional for convex
    combinations.
    """

    values: np.ndarray = field(repr=False)
    grid: ScenarioGrid = field(repr=False)

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.n_cells,):
            raise ValueError("crash map shape does not match grid")
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("crash map values must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class SurrogateSet:
    """Vertex crash maps whose convex hull is the surrogate family."""

    vertices: tuple[CrashMap, ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 2:
            raise ValueError("surrogate set needs at least 2 vertex maps")
        g0 = self.vertices[0].grid
        if any(v.grid is not g0 and v.grid.n_cells != g0.n_cells for v in self.vertices):
            raise ValueError("all vertex maps must share one grid")

    @property
    def grid(self) -> ScenarioGrid:
        return self.vertices[0].grid


def idm_acceleration(v: float, v_lead: float, gap: float, p: IdmParams) -> float:
    """IDM acceleration, clamped below at the physical braking limit."""
    if gap <= 0:
        raise ValueError("idm_acceleration requires positive gap")
    s_star = p.s0 + v * p.T + v * (v - v_lead) / (2.0 * math.sqrt(p.a_max * p.b))
    a = p.a_max * (1.0 - (v / p.v0) ** p.delta - (s_star / gap) ** 2)
    return max(a, MAX_BRAKE)


def simulate_cutin(s: Scenario, av: IdmParams, cfg: SimConfig) -> tuple[bool, float]:
    """Roll out one scenario; returns (crash, min_gap).

    gap starts at r; the AV starts at cfg.v_av0; the BV holds
    max(0, v_av0 + rdot) for the whole horizon. Explicit Euler at cfg.dt;
    crash when gap < cfg.d_th at any sampled state.
    """
    gap = s.r
    v_av = cfg.v_av0
    v_bv = max(0.0, cfg.v_av0 + s.rdot)
    min_gap = gap
    if gap < cfg.d_th:
        return True, min_gap
    sqrt_ab = math.sqrt(av.a_max * av.b)
    for _ in range(cfg.n_steps):
        if gap <= 0.0:
            break
        s_star = av.s0 + v_av * av.T + v_av * (v_av - v_bv) / (2.0 * sqrt_ab)
        a = max(av.a_max * (1.0 - (v_av / av.v0) ** av.delta - (s_star / gap) ** 2), MAX_BRAKE)
        gap = gap + (v_bv - v_av) * cfg.dt
        v_av = max(0.0, v_av + a * cfg.dt)
        min_gap = min(min_gap, gap)
        if gap < cfg.d_th:
            return True, min_gap
    return False, min_gap


def compute_crash_map(model: IdmParams, grid: ScenarioGrid, cfg: SimConfig) -> CrashMap:
    """Simulate every cell center; binary map, deterministic.

    Vectorized over cells with update expressions identical to
    simulate_cutin, so the two agree cell for cell.
    """
    gap = grid.cell_r.astype(np.float64).copy()
    v_av = np.full(grid.n_cells, cfg.v_av0)
    v_bv = np.maximum(0.0, cfg.v_av0 + grid.cell_rdot)
    crash = gap < cfg.d_th
    alive = ~crash
    sqrt_ab = math.sqrt(model.a_max * model.b)
    for _ in range(cfg.n_steps):
        m = alive & (gap > 0.0)
        if not m.any():
            break
        g = gap[m]
        v = v_av[m]
        vl = v_bv[m]
        s_star = model.s0 + v * model.T + v * (v - vl) / (2.0 * sqrt_ab)
        a = np.maximum(
            model.a_max * (1.0 - (v / model.v0) ** model.delta - (s_star / g) ** 2),
            MAX_BRAKE,
        )
        gap[m] = g + (vl - v) * cfg.dt
        v_av[m] = np.maximum(0.0, v + a * cfg.dt)
        newly = m & (gap < cfg.d_th)
        crash |= newly
        alive &= ~newly & (gap > 0.0)
    return CrashMap(values=crash.astype(np.float64), grid=grid)


def convex_combine(sset: SurrogateSet, c) -> CrashMap:
    """Pointwise convex combination of the vertex maps."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (len(sset.vertices),):
        raise ValueError("weight vector length must match vertex count")
    if np.any(c < 0) or abs(float(c.sum()) - 1.0) > 1e-9:
        raise ValueError("weights must be nonnegative and sum to 1")
    values = np.zeros(sset.grid.n_cells)
    for ci, vertex in zip(c, sset.vertices):
        values += ci * vertex.values
    # guard against accumulation drift just past 1
    return CrashMap(values=np.clip(values, 0.0, 1.0), grid=sset.grid)


def crash_rate(cmap: CrashMap, pmf: ExposurePmf) -> float:
    """Ground-truth exposure-weighted crash probability (the oracle mu)."""
    if cmap.values.shape != pmf.masses.shape:
        raise ValueError("crash map and exposure pmf are not aligned")
    return float(cmap.values @ pmf.masses)


def crash_map_to_csv(cmap: CrashMap, path) -> None:
    """Export a crash map as CSV (r,rdot,p_crash), row-major by cell index."""
    grid = cmap.grid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("r,rdot,p_crash\n")
        for r, rd, p in zip(grid.cell_r, grid.cell_rdot, cmap.values):
            fh.write(f"{r:.17g},{rd:.17g},{p:.17g}\n")
