"""Uniform 2D cell-centered grid and nonnegative scalar fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class Grid2D:
    """Cell-centered uniform grid on [x_min, x_max] x [y_min, y_max].

    Values live at cell centers x_i = x_min + (i + 1/2) hx; fluxes live at
    faces, so zero-flux boundaries conserve mass exactly.
    """

    x_min: float = -1.0
    x_max: float = 1.0
    y_min: float = -1.0
    y_max: float = 1.0
    nx: int = 100
    ny: int = 100

    def __post_init__(self) -> None:
        if self.nx < 1 or self.ny < 1 or self.nx * self.ny < 2:
            raise ValueError("need nx, ny >= 1 with at least 2 cells total")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("degenerate domain extents")

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (X, Y) of shape (ny, nx), y-index outermost."""
        x = self.x_min + (np.arange(self.nx) + 0.5) * self.hx
        y = self.y_min + (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def to_dict(self) -> dict[str, Any]:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "nx": self.nx,
            "ny": self.ny,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Grid2D":
        unknown = set(d) - {"x_min", "x_max", "y_min", "y_max", "nx", "ny"}
        if unknown:
            raise ValueError(f"unknown grid config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ScalarField:
    """Nonnegative density on a Grid2D; data is (ny, nx), row-major."""

    grid: Grid2D
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(
                f"data shape {self.data.shape} does not match grid "
                f"({self.grid.ny}, {self.grid.nx})"
            )

    def validate(self) -> None:
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains NaN/Inf")
        if np.any(self.data < 0):
            raise ValueError("field contains negative values")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.data.copy())


def constant_field(grid: Grid2D, value: float) -> ScalarField:
    return ScalarField(grid, np.full((grid.ny, grid.nx), float(value)))


def mean(f: ScalarField) -> float:
    """Average density; equals the continuum average on a uniform grid."""
    return float(np.sum(f.data) / f.grid.n_cells)


def lp_norm(f: ScalarField, p: float) -> float:
    """Discrete L^p norm with cell-area quadrature weights; p = inf -> max |v|."""
    if p == np.inf:
        return float(np.max(np.abs(f.data)))
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((np.sum(np.abs(f.data) ** p) * f.grid.cell_area) ** (1.0 / p))


def pos_part_excess(f: ScalarField, rho_cr: float) -> ScalarField:
    """Pointwise (v - rho_cr)_+ as a new field."""
    return ScalarField(f.grid, np.maximum(f.data - rho_cr, 0.0))
