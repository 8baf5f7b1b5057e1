"""Scenario space for the cut-in encounter.

A scenario is a point (r, rdot): the range and range rate between the
background vehicle and the vehicle under test at the moment of the cut-in.
The space is a box, discretized into a regular grid of cells; exposure
frequency (how often a scenario occurs in natural driving) lives on the
cells as a probability mass function built from a truncated Gaussian
mixture.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfigError",
    "Scenario",
    "ScenarioGrid",
    "ExposurePmf",
    "build_grid",
    "build_exposure",
    "normalize",
]


class ConfigError(ValueError):
    """Invalid configuration (bad bounds, steps, mixture, schema)."""


@dataclass(frozen=True)
class Scenario:
    """A single cut-in scenario: range r (m) and range rate rdot (m/s)."""

    r: float
    rdot: float


@dataclass(frozen=True)
class ScenarioGrid:
    """Regular discretization of the scenario box.

    Cells tile (r_min, r_max] x [rdot_min, rdot_max] exactly; indexing is
    row-major with r slowest, so cell k sits at
    (r_centers[k // n_rdot], rdot_centers[k % n_rdot]).
    """

    r_min: float
    r_max: float
    rdot_min: float
    rdot_max: float
    r_step: float
    rdot_step: float
    n_r: int
    n_rdot: int
    # flat per-cell center coordinates, length n_cells
    cell_r: np.ndarray = field(repr=False)
    cell_rdot: np.ndarray = field(repr=False)

    @property
    def n_cells(self) -> int:
        return self.n_r * self.n_rdot

    @property
    def r_span(self) -> float:
        return self.r_max - self.r_min

    @property
    def rdot_span(self) -> float:
        return self.rdot_max - self.rdot_min

    def contains(self, r: float, rdot: float) -> bool:
        return (
            self.r_min < r <= self.r_max
            and self.rdot_min <= rdot <= self.rdot_max
        )

    def cell_index(self, r: float, rdot: float) -> int:
        """Index of the cell containing (r, rdot), clipped to the grid."""
        i = min(max(int((r - self.r_min) / self.r_step), 0), self.n_r - 1)
        j = min(max(int((rdot - self.rdot_min) / self.rdot_step), 0), self.n_rdot - 1)
        return i * self.n_rdot + j

    def cell_center(self, index: int) -> Scenario:
        return Scenario(float(self.cell_r[index]), float(self.cell_rdot[index]))

    def normalized_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell centers mapped to the unit square."""
        return (
            (self.cell_r - self.r_min) / self.r_span,
            (self.cell_rdot - self.rdot_min) / self.rdot_span,
        )


@dataclass(frozen=True)
class ExposurePmf:
    """Per-cell exposure probability mass, aligned with a ScenarioGrid."""

    masses: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if np.any(self.masses < 0):
            raise ValueError("exposure masses must be nonnegative")
        total = float(self.masses.sum())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"exposure masses must sum to 1, got {total!r}")


def _count_cells(span: float, step: float, axis: str) -> int:
    if step <= 0:
        raise ConfigError(f"{axis} step must be positive, got {step}")
    n = span / step
    n_int = round(n)
    # steps must tile the span exactly (up to float representation)
    if n_int < 1 or abs(n - n_int) > 1e-9:
        raise ConfigError(f"{axis} step {step} does not divide span {span} evenly")
    return int(n_int)


def build_grid(bounds, steps) -> ScenarioGrid:
    """Build the cell grid.

    bounds: ((r_min, r_max), (rdot_min, rdot_max)); steps: (r_step, rdot_step).
    """
    (r_min, r_max), (rdot_min, rdot_max) = (
        (float(bounds[0][0]), float(bounds[0][1])),
        (float(bounds[1][0]), float(bounds[1][1])),
    )
    r_step, rdot_step = float(steps[0]), float(steps[1])
    if r_max <= r_min or rdot_max <= rdot_min:
        raise ConfigError("bounds must define a box with positive spans")
    n_r = _count_cells(r_max - r_min, r_step, "r")
    n_rdot = _count_cells(rdot_max - rdot_min, rdot_step, "rdot")
    r_centers = r_min + (np.arange(n_r) + 0.5) * r_step
    rdot_centers = rdot_min + (np.arange(n_rdot) + 0.5) * rdot_step
    rr, dd = np.meshgrid(r_centers, rdot_centers, indexing="ij")
    return ScenarioGrid(
        r_min=r_min,
        r_max=r_max,
        rdot_min=rdot_min,
        rdot_max=rdot_max,
        r_step=r_step,
        rdot_step=rdot_step,
        n_r=n_r,
        n_rdot=n_rdot,
        cell_r=rr.ravel(),
        cell_rdot=dd.ravel(),
    )


def build_exposure(grid: ScenarioGrid, mixture) -> ExposurePmf:
    """Exposure pmf from a Gaussian mixture evaluated at cell centers.

    mixture: iterable of (weight, mean_r, mean_rdot, sd_r, sd_rdot).
    The density is truncated to the box and renormalized to total mass 1.
    """
    components = [tuple(float(v) for v in comp) for comp in mixture]
    if not components:
        raise ConfigError("exposure mixture must have at least one component")
    dens = np.zeros(grid.n_cells)
    for weight, mean_r, mean_rdot, sd_r, sd_rdot in components:
        if weight <= 0:
            raise ConfigError(f"mixture weight must be positive, got {weight}")
        if sd_r <= 0 or sd_rdot <= 0:
            raise ConfigError("mixture sds must be positive")
        z = (
            ((grid.cell_r - mean_r) / sd_r) ** 2
            + ((grid.cell_rdot - mean_rdot) / sd_rdot) ** 2
        )
        dens += weight / (2.0 * np.pi * sd_r * sd_rdot) * np.exp(-0.5 * z)
    return ExposurePmf(masses=dens / dens.sum())


def normalize(s: Scenario, grid: ScenarioGrid) -> tuple[float, float]:
    """Map a scenario affinely onto the unit square."""
    return (
        (s.r - grid.r_min) / grid.r_span,
        (s.rdot - grid.rdot_min) / grid.rdot_span,
    )
