"""Zero-mean Neumann Poisson solver and the H^-1 dual-norm diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid2D, ScalarField
from .linsolve import LinearOperator, cg_solve
from .stepper import apply_diffusion


class MassMismatch(ValueError):
    pass


@dataclass
class PoissonSolution:
    potential: ScalarField  # zero mean; may go negative, stored raw
    energy_sq: float  # discrete integral of |grad V|^2


def _unit_coeffs(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    ax = np.zeros((grid.ny, grid.nx + 1))
    ay = np.zeros((grid.ny + 1, grid.nx))
    ax[:, 1:-1] = 1.0
    ay[1:-1, :] = 1.0
    return ax, ay


def neumann_laplacian(grid: Grid2D):
    """Action v -> -Lap_h v with zero-flux boundaries (unit coefficients)."""
    coeffs = _unit_coeffs(grid)
    return lambda v: apply_diffusion(coeffs, v, grid)


def poisson_neumann(
    rhs: np.ndarray,
    grid: Grid2D,
    tol: float = 1e-12,
    max_iter: int = 0,
) -> PoissonSolution:
    """Solve -Lap V = rhs with zero-flux boundaries on the zero-mean subspace.

    The rhs mean is subtracted for compatibility. energy_sq = <V, rhs> hx hy
    by discrete integration by parts.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (grid.ny, grid.nx):
        raise ValueError("rhs shape does not match grid")
    b = rhs - np.sum(rhs) / grid.n_cells
    apply_a = neumann_laplacian(grid)
    op = LinearOperator(apply=apply_a, dimension=grid.n_cells)
    if max_iter <= 0:
        max_iter = 20 * (grid.nx + grid.ny)
    x, _ = cg_solve(op, b, tol=tol, max_iter=max_iter)
    x = x - np.sum(x) / grid.n_cells
    energy_sq = float(np.dot(x.ravel(), b.ravel()) * grid.cell_area)
    # guard against roundoff making a tiny negative
    energy_sq = max(energy_sq, 0.0)
    return PoissonSolution(potential=ScalarField(grid, x), energy_sq=energy_sq)


def hminus1_sq(
    rho_a: ScalarField, rho_b: ScalarField, mass_tol: float = 1e-8
) -> float:
    """Squared homogeneous H^-1 distance between two equal-mass densities."""
    if rho_a.grid != rho_b.grid:
        raise ValueError("fields live on different grids")
    mean_a = float(np.sum(rho_a.data) / rho_a.grid.n_cells)
    mean_b = float(np.sum(rho_b.data) / rho_b.grid.n_cells)
    if abs(mean_a - mean_b) > mass_tol:
        raise MassMismatch(
            f"means differ by {abs(mean_a - mean_b):.3e} (> {mass_tol:.1e})"
        )
    sol = poisson_neumann(rho_a.data - rho_b.data, rho_a.grid)
    return sol.energy_sq
