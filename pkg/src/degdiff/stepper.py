"""Implicit time-marching for d/dt rho = Lap f(rho) with zero-flux boundaries.

Backward Euler in time, centered finite differences in space. The nonlinear
step is linearized by freezing the diffusivity f' at the previous Picard
iterate, which turns each iteration into a symmetric positive semidefinite
linear system solved matrix-free by CG. The timestep adapts: rejected or
too-large steps are halved, calm steps grow by 11/10.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Any, Optional, Sequence

import numpy as np

from .flux import FluxFunction
from .grid import Grid2D, ScalarField
from .linsolve import LinearOperator, NonConvergence, cg_solve


class Stalled(RuntimeError):
    """Picard iteration hit its cap without meeting the stopping criterion."""


class TimestepUnderflow(RuntimeError):
    """Adaptive controller drove tau below tau_min; the step is intractable."""


@dataclass
class StepperConfig:
    tau_init: float = 1e-4
    tau_min: float = 1e-12
    tau_max: float = 1e-1
    picard_tol: float = 1e-9
    picard_max: int = 50
    accept_tol: float = 1e-2
    grow_factor: float = 1.1
    shrink_factor: float = 0.5
    grow_picard_threshold: int = 10
    lin_tol: float = 1e-10
    lin_max_iter: int = 0  # 0 -> 10 * (nx + ny)
    use_jacobi: bool = True

    def __post_init__(self) -> None:
        if not (0 < self.tau_min <= self.tau_init <= self.tau_max):
            raise ValueError("need 0 < tau_min <= tau_init <= tau_max")
        if not (self.shrink_factor < 1.0 < self.grow_factor):
            raise ValueError("need shrink_factor < 1 < grow_factor")

    def effective_lin_max_iter(self, grid: Grid2D) -> int:
        return self.lin_max_iter if self.lin_max_iter > 0 else 10 * (grid.nx + grid.ny)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tau_init": self.tau_init,
            "tau_min": self.tau_min,
            "tau_max": self.tau_max,
            "picard_tol": self.picard_tol,
            "picard_max": self.picard_max,
            "accept_tol": self.accept_tol,
            "grow_factor": self.grow_factor,
            "shrink_factor": self.shrink_factor,
            "grow_picard_threshold": self.grow_picard_threshold,
            "lin_tol": self.lin_tol,
            "lin_max_iter": self.lin_max_iter,
            "use_jacobi": self.use_jacobi,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StepperConfig":
        known = set(cls().to_dict())
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown stepper config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class StepRecord:
    t: float
    tau_used: float
    picard_iters: int
    cg_iters_total: int
    rejected_attempts: int


def face_coefficients(
    fld: ScalarField, flux: FluxFunction
) -> tuple[np.ndarray, np.ndarray]:
    """Face diffusivities: arithmetic mean of f' at the two adjacent cells.

    Boundary faces carry coefficient 0 (zero-flux condition). ax has shape
    (ny, nx+1), ay has shape (ny+1, nx).
    """
    d = flux.deriv(fld.data)
    ny, nx = fld.data.shape
    ax = np.zeros((ny, nx + 1))
    ay = np.zeros((ny + 1, nx))
    ax[:, 1:-1] = 0.5 * (d[:, :-1] + d[:, 1:])
    ay[1:-1, :] = 0.5 * (d[:-1, :] + d[1:, :])
    return ax, ay


def apply_diffusion(
    coeffs: tuple[np.ndarray, np.ndarray], v: np.ndarray, grid: Grid2D
) -> np.ndarray:
    """(A v)_ij = -div_h(a grad_h v): symmetric positive semidefinite.

    Constants are in the kernel; boundary faces do not contribute.
    """
    ax, ay = coeffs
    gx = np.zeros_like(ax)
    gy = np.zeros_like(ay)
    gx[:, 1:-1] = ax[:, 1:-1] * (v[:, 1:] - v[:, :-1])
    gy[1:-1, :] = ay[1:-1, :] * (v[1:, :] - v[:-1, :])
    out = -(gx[:, 1:] - gx[:, :-1]) / grid.hx**2
    out -= (gy[1:, :] - gy[:-1, :]) / grid.hy**2
    return out


def _jacobi_diag(
    coeffs: tuple[np.ndarray, np.ndarray], tau: float, grid: Grid2D
) -> np.ndarray:
    ax, ay = coeffs
    diag = 1.0 + tau * (
        (ax[:, 1:] + ax[:, :-1]) / grid.hx**2 + (ay[1:, :] + ay[:-1, :]) / grid.hy**2
    )
    return diag


def picard_step(
    rho_prev: ScalarField,
    tau: float,
    cfg: StepperConfig,
    flux: FluxFunction,
) -> tuple[ScalarField, int, int]:
    """One implicit Euler step via frozen-coefficient Picard iteration.

    Each iteration solves (I + tau A_k) x = rho_prev with A_k built from the
    previous iterate, then re-applies the flux-form update
    rho = rho_prev - tau A_k x so that discrete mass is conserved to roundoff
    regardless of the CG residual. Returns (rho_next, picard_iters,
    cg_iters_total); raises Stalled past the iteration cap.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    grid = rho_prev.grid
    v = rho_prev.data
    # Constants are in the kernel of the diffusion operator, so solving for
    # the deviation from the mean is the same system with a stopping test
    # relative to the decaying part (keeps late-time convergence resolvable).
    v_mean = np.sum(v) / grid.n_cells
    v_dev = v - v_mean
    iterate = v
    cg_total = 0
    lin_max = cfg.effective_lin_max_iter(grid)
    for k in range(1, cfg.picard_max + 1):
        coeffs = face_coefficients(ScalarField(grid, iterate), flux)
        op = LinearOperator(
            apply=lambda w, c=coeffs: w + tau * apply_diffusion(c, w, grid),
            dimension=grid.n_cells,
        )
        diag = _jacobi_diag(coeffs, tau, grid) if cfg.use_jacobi else None
        try:
            w, iters = cg_solve(
                op, v_dev, tol=cfg.lin_tol, max_iter=lin_max,
                x0=iterate - v_mean, precond_diag=diag,
            )
        except NonConvergence as exc:
            raise Stalled(f"linear solve stalled at Picard iteration {k}") from exc
        cg_total += iters
        # A annihilates constants, so A(v_mean + w) = A w; applying it to the
        # deviation keeps the roundoff floor relative to the deviation size.
        new = v - tau * apply_diffusion(coeffs, w, grid)
        delta = np.linalg.norm(new - iterate)
        ref = np.linalg.norm(iterate)
        iterate = new
        if delta <= cfg.picard_tol * ref:
            return ScalarField(grid, new), k, cg_total
    raise Stalled(f"Picard iteration did not converge in {cfg.picard_max} steps")


def advance(
    state: tuple[float, float, ScalarField],
    cfg: StepperConfig,
    flux: FluxFunction,
    tau_cap: Optional[float] = None,
) -> tuple[tuple[float, float, ScalarField], StepRecord]:
    """One accepted timestep with adaptive tau.

    Rejected attempts (Picard stall or relative change above accept_tol) halve
    tau and retry from the unmodified previous state. Accepted calm steps
    (small change and few Picard iterations) grow tau by grow_factor. tau_cap
    limits the attempted increment (used to land on snapshot times) without
    feeding back into the stored tau.
    """
    t, tau, rho = state
    rejected = 0
    old_norm = np.linalg.norm(rho.data)
    while True:
        dt = tau if tau_cap is None else min(tau, tau_cap)
        try:
            rho_new, piters, cg_total = picard_step(rho, dt, cfg, flux)
            rel_change = (
                np.linalg.norm(rho_new.data - rho.data) / old_norm
                if old_norm > 0
                else 0.0
            )
            if rel_change > cfg.accept_tol:
                raise Stalled("relative step change above accept_tol")
        except Stalled:
            rejected += 1
            tau = min(tau, dt) * cfg.shrink_factor
            if tau < cfg.tau_min:
                raise TimestepUnderflow(
                    f"tau underflow at t={t:.6g} after {rejected} rejections"
                )
            continue
        break
    capped = tau_cap is not None and dt < tau
    if not capped and piters <= cfg.grow_picard_threshold:
        tau_next = min(tau * cfg.grow_factor, cfg.tau_max)
    else:
        tau_next = tau
    record = StepRecord(
        t=t + dt,
        tau_used=dt,
        picard_iters=piters,
        cg_iters_total=cg_total,
        rejected_attempts=rejected,
    )
    return (t + dt, tau_next, rho_new), record


@dataclass
class RunResult:
    final: ScalarField
    series: list  # of diagnostics.SeriesRecord
    snapshots: dict[float, ScalarField]
    step_records: list[StepRecord] = dc_field(default_factory=list)
    audit: dict[str, Any] = dc_field(default_factory=dict)
    kept_fields: list[tuple[int, float, ScalarField]] = dc_field(default_factory=list)


def run(
    ic: ScalarField,
    cfg: StepperConfig,
    flux: FluxFunction,
    t_end: float,
    snapshot_times: Sequence[float] = (),
    keep_fields: int = 0,
    audit_tols: Optional[dict[str, float]] = None,
) -> RunResult:
    """March from the initial condition to t_end.

    Steps are capped so accepted times land exactly on requested snapshot
    times and on t_end. Emits one SeriesRecord per accepted step and runs the
    per-step invariant audit (mass drift, energy dissipation, max/min
    principle, clipped monotonicity). keep_fields > 0 retains a thinned
    subsequence of accepted fields for post-pass diagnostics.
    """
    from . import diagnostics  # local import: diagnostics depends on grid/flux only

    ic.validate()
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    rho_inf = float(np.sum(ic.data) / ic.grid.n_cells)

    targets = sorted({float(s) for s in snapshot_times if 0.0 < s <= t_end})
    snapshots: dict[float, ScalarField] = {}
    for s in snapshot_times:
        if s == 0.0:
            snapshots[0.0] = ic.copy()

    series: list = []
    step_records: list[StepRecord] = []
    kept: list[tuple[int, float, ScalarField]] = []
    stride = 1

    aud = diagnostics.RunAudit(ic, flux, tols=audit_tols)

    state = (0.0, cfg.tau_init, ic)
    if t_end == 0.0:
        return RunResult(ic, [], snapshots, [], aud.summary(), [])

    eps = 1e-13
    step_index = 0
    while state[0] < t_end - eps:
        t = state[0]
        next_target = t_end
        for s in targets:
            if s > t + eps:
                next_target = min(next_target, s)
                break
        cap = next_target - t
        state, rec = advance(state, cfg, flux, tau_cap=cap)
        step_index += 1
        t_new, _, rho = state
        step_records.append(rec)
        series.append(
            diagnostics.record(rho, t_new, rec.tau_used, flux, rho_inf)
        )
        aud.observe(rho)
        if keep_fields > 0 and (step_index - 1) % stride == 0:
            kept.append((step_index, t_new, rho.copy()))
            if len(kept) > 2 * keep_fields:
                kept = kept[::2]
                stride *= 2
        for s in targets:
            if s not in snapshots and t_new >= s - eps:
                snapshots[s] = rho.copy()

    return RunResult(state[2], series, snapshots, step_records, aud.summary(), kept)
