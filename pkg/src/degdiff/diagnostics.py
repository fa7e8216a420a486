"""Per-step measurements: energies, norms, decay fits, segregation count."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .flux import FluxFunction
from .grid import ScalarField, lp_norm, mean, pos_part_excess


class GridMismatch(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass
class SeriesRecord:
    """One row of the time-series output."""

    t: float
    dt: float
    mass: float
    energy: float
    rel_energy: float
    pos_l1: float
    max_val: float
    min_val: float
    n_components: int
    hm1_sq: Optional[float] = None  # filled by the post-pass, absent during the run

    CSV_FIELDS = (
        "t", "dt", "mass", "energy", "rel_energy", "pos_l1",
        "max_val", "min_val", "n_components",
    )


@dataclass
class DecayFit:
    window: tuple[float, float]
    slope: float
    intercept: float
    r_squared: float
    kind: str  # "log-log" | "semi-log"


def record(
    fld: ScalarField,
    t: float,
    dt: float,
    flux: FluxFunction,
    rho_inf: float,
    threshold: Optional[float] = None,
) -> SeriesRecord:
    """Measure one field. Quadratures are midpoint sums (value * hx * hy)."""
    area = fld.grid.cell_area
    if threshold is None:
        threshold = rho_inf / 2.0
    return SeriesRecord(
        t=t,
        dt=dt,
        mass=mean(fld),
        energy=float(np.sum(flux.energy(fld.data)) * area),
        rel_energy=float(np.sum(flux.rel_energy(fld.data, rho_inf)) * area),
        pos_l1=lp_norm(pos_part_excess(fld, flux.rho_cr), 1),
        max_val=float(np.max(fld.data)),
        min_val=float(np.min(fld.data)),
        n_components=superlevel_components(fld, threshold),
    )


def fit_decay(
    series: Sequence[tuple[float, float]],
    window: tuple[float, float],
    kind: str = "log-log",
) -> DecayFit:
    """Least-squares line through (log t, log y) or (t, log y).

    Samples outside the window or with y <= 0 (and t <= 0 in log-log mode)
    are excluded; at least 5 must remain.
    """
    if kind not in ("log-log", "semi-log"):
        raise ValueError(f"unknown fit kind: {kind!r}")
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValueError("window must satisfy t_lo < t_hi")
    pts = [(t, y) for (t, y) in series if t_lo <= t <= t_hi and y > 0]
    if kind == "log-log":
        pts = [(t, y) for (t, y) in pts if t > 0]
    if len(pts) < 5:
        raise InsufficientData(
            f"only {len(pts)} usable samples in window [{t_lo}, {t_hi}]"
        )
    t = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    xs = np.log(t) if kind == "log-log" else t
    ys = np.log(y)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return DecayFit(window=(t_lo, t_hi), slope=float(slope),
                    intercept=float(intercept), r_squared=r2, kind=kind)


def monotonicity_audit(
    prev: ScalarField, nxt: ScalarField, rho_cr: float, tol: float = 1e-6
) -> tuple[bool, float]:
    """Worst decrease of min(rho, rho_cr) between consecutive states."""
    if prev.grid != nxt.grid:
        raise GridMismatch("fields live on different grids")
    clipped_prev = np.minimum(prev.data, rho_cr)
    clipped_next = np.minimum(nxt.data, rho_cr)
    worst = float(np.max(np.maximum(clipped_prev - clipped_next, 0.0)))
    return worst <= tol, worst


_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


def superlevel_components(fld: ScalarField, threshold: float) -> int:
    """Number of 4-connected components of {cells : value > threshold}."""
    mask = fld.data > threshold
    _, count = ndimage.label(mask, structure=_FOUR_CONN)
    return int(count)


_DEFAULT_AUDIT_TOLS = {
    "mass_rel": 1e-10,
    "energy_increase": 1e-10,
    "max_principle": 1e-8,
    "min_principle": 1e-8,
    "monotonicity": 1e-6,
}


class RunAudit:
    """Accumulates per-step invariant violations along a solver run.

    Tracks: relative mass drift from the initial state, per-step free-energy
    increase, excess over the initial max, dip below the initial min, and the
    worst decrease of min(rho, rho_cr).
    """

    def __init__(self, ic: ScalarField, flux: FluxFunction,
                 tols: Optional[dict] = None):
        self.flux = flux
        self.tols = dict(_DEFAULT_AUDIT_TOLS)
        if tols:
            self.tols.update(tols)
        self.mass0 = mean(ic)
        self.max0 = float(np.max(ic.data))
        self.min0 = float(np.min(ic.data))
        self._prev = ic
        self._prev_energy = float(np.sum(flux.energy(ic.data)) * ic.grid.cell_area)
        self.worst = {
            "mass_rel": 0.0,
            "energy_increase": 0.0,
            "max_principle": 0.0,
            "min_principle": 0.0,
            "monotonicity": 0.0,
        }
        self.steps = 0

    def observe(self, fld: ScalarField) -> None:
        self.steps += 1
        m = mean(fld)
        drift = abs(m - self.mass0) / self.mass0 if self.mass0 > 0 else abs(m)
        self.worst["mass_rel"] = max(self.worst["mass_rel"], drift)
        e = float(np.sum(self.flux.energy(fld.data)) * fld.grid.cell_area)
        self.worst["energy_increase"] = max(
            self.worst["energy_increase"], e - self._prev_energy
        )
        self.worst["max_principle"] = max(
            self.worst["max_principle"], float(np.max(fld.data)) - self.max0
        )
        self.worst["min_principle"] = max(
            self.worst["min_principle"], self.min0 - float(np.min(fld.data))
        )
        _, viol = monotonicity_audit(self._prev, fld, self.flux.rho_cr)
        self.worst["monotonicity"] = max(self.worst["monotonicity"], viol)
        self._prev = fld
        self._prev_energy = e

    def summary(self) -> dict:
        checks = {}
        tol_keys = {
            "mass_rel": "mass_rel",
            "energy_increase": "energy_increase",
            "max_principle": "max_principle",
            "min_principle": "min_principle",
            "monotonicity": "monotonicity",
        }
        # max principle tolerance is relative to the initial max
        limits = {
            "mass_rel": self.tols["mass_rel"],
            "energy_increase": self.tols["energy_increase"],
            "max_principle": self.tols["max_principle"] * self.max0,
            "min_principle": self.tols["min_principle"],
            "monotonicity": self.tols["monotonicity"],
        }
        for key in tol_keys:
            checks[key] = {
                "worst": self.worst[key],
                "limit": limits[key],
                "ok": self.worst[key] <= limits[key],
            }
        checks["all_ok"] = all(c["ok"] for c in checks.values() if isinstance(c, dict))
        checks["steps"] = self.steps
        return checks
