"""Matrix-free conjugate-gradient solver for SPD / SPSD stencil operators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class NonConvergence(RuntimeError):
    """CG exhausted max_iter; carries the iteration count and last residual."""

    def __init__(self, iters: int, residual: float):
        super().__init__(f"CG failed to converge in {iters} iterations "
                         f"(residual {residual:.3e})")
        self.iters = iters
        self.residual = residual


@dataclass
class LinearOperator:
    """A symmetric linear map on field vectors, given by its action."""

    apply: Callable[[np.ndarray], np.ndarray]
    dimension: int
    symmetric: bool = True


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    # Fixed reduction order: flat BLAS dot, deterministic for fixed inputs.
    return float(np.dot(a.ravel(), b.ravel()))


def cg_solve(
    op: LinearOperator,
    rhs: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 1000,
    x0: Optional[np.ndarray] = None,
    precond_diag: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, int]:
    """Solve op(x) = rhs by (optionally Jacobi-preconditioned) CG.

    Stops when ||op(x) - rhs||_2 <= tol * ||rhs||_2. For a singular SPSD
    operator the rhs must lie in its range. Raises NonConvergence if max_iter
    is exceeded.
    """
    if not op.symmetric:
        raise ValueError("cg_solve requires a symmetric operator")
    rhs = np.asarray(rhs, dtype=float)
    b_norm = np.sqrt(_dot(rhs, rhs))
    if b_norm == 0.0:
        return np.zeros_like(rhs), 0

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - op.apply(x)
    res = np.sqrt(_dot(r, r))
    if res <= tol * b_norm:
        return x, 0

    if precond_diag is not None:
        z = r / precond_diag
    else:
        z = r
    p = z.copy()
    rz = _dot(r, z)

    for k in range(1, max_iter + 1):
        ap = op.apply(p)
        pap = _dot(p, ap)
        if pap <= 0.0:
            # Null-space direction (SPSD case with incompatible rhs) or
            # loss of positivity from roundoff.
            raise NonConvergence(k, res)
        alpha = rz / pap
        x = x + alpha * p
        r = r - alpha * ap
        res = np.sqrt(_dot(r, r))
        if res <= tol * b_norm:
            return x, k
        z = r / precond_diag if precond_diag is not None else r
        rz_new = _dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    raise NonConvergence(max_iter, res)
