"""Degenerate power-law flux nonlinearity and its free-energy functionals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np


def _check_nonnegative(s, name: str) -> np.ndarray:
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative (corrupted field?)")
    return arr


@dataclass(frozen=True)
class FluxFunction:
    """Flux f(s) = scale * (s - rho_cr)_+^kappa.

    The flux vanishes identically on [0, rho_cr] and is strictly increasing
    beyond the critical density. kappa > 1 guarantees f is C^1 with
    f'(rho_cr) = 0.
    """

    rho_cr: float = 1.0
    kappa: float = 2.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.rho_cr > 0:
            raise ValueError("rho_cr must be > 0")
        if not self.kappa > 1:
            raise ValueError("kappa must be > 1 (C^1 matching at rho_cr)")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    def eval(self, s):
        """Flux value scale * max(s - rho_cr, 0)^kappa."""
        arr = _check_nonnegative(s, "density")
        out = self.scale * np.maximum(arr - self.rho_cr, 0.0) ** self.kappa
        return out if out.ndim else float(out)

    def deriv(self, s):
        """Flux slope scale * kappa * max(s - rho_cr, 0)^(kappa - 1)."""
        arr = _check_nonnegative(s, "density")
        out = self.scale * self.kappa * np.maximum(arr - self.rho_cr, 0.0) ** (
            self.kappa - 1.0
        )
        return out if out.ndim else float(out)

    def energy(self, s):
        """Primitive of the flux: scale/(kappa+1) * max(s - rho_cr, 0)^(kappa+1)."""
        arr = _check_nonnegative(s, "density")
        out = (
            self.scale
            / (self.kappa + 1.0)
            * np.maximum(arr - self.rho_cr, 0.0) ** (self.kappa + 1.0)
        )
        return out if out.ndim else float(out)

    def rel_energy(self, s, rho_inf):
        """Bregman distance of s to rho_inf induced by the convex primitive.

        energy(s) - energy(rho_inf) - eval(rho_inf) * (s - rho_inf); always >= 0.
        When both arguments are supercritical the naive formula cancels
        catastrophically for s near rho_inf, so that branch is evaluated via
        expm1/log1p and stays accurate down to machine-level differences.
        """
        arr = _check_nonnegative(s, "density")
        ref = _check_nonnegative(rho_inf, "rho_inf")
        arr, ref = np.broadcast_arrays(np.atleast_1d(arr), np.atleast_1d(ref))
        a = np.maximum(arr - self.rho_cr, 0.0)
        b = np.maximum(ref - self.rho_cr, 0.0)
        kp1 = self.kappa + 1.0
        out = np.zeros(a.shape)
        sub_ref = b == 0.0
        # subcritical reference: f(rho_inf) = 0, so the distance is energy(s)
        out[sub_ref] = self.scale / kp1 * a[sub_ref] ** kp1
        both = ~sub_ref
        if np.any(both):
            aa = a[both]
            bb = b[both]
            d = aa / bb - 1.0
            # (aa^kp1 - bb^kp1)/kp1 - bb^kappa*(aa - bb), stably:
            with np.errstate(divide="ignore"):
                core = np.expm1(kp1 * np.log1p(d)) / kp1 - d
            contrib = self.scale * bb**kp1 * core
            # s below critical adds the linear part over the flat region
            low = arr[both] - self.rho_cr < 0.0
            contrib[low] = self.scale * (
                -(bb[low] ** kp1) / kp1
                - bb[low] ** self.kappa * (arr[both][low] - ref[both][low])
            )
            out[both] = contrib
        out = np.maximum(out, 0.0)
        if np.ndim(s) == 0 and np.ndim(rho_inf) == 0:
            return float(out.reshape(-1)[0])
        return out.reshape(np.broadcast_shapes(np.shape(s), np.shape(rho_inf)))

    def to_dict(self) -> dict[str, Any]:
        return {"rho_cr": self.rho_cr, "kappa": self.kappa, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FluxFunction":
        unknown = set(d) - {"rho_cr", "kappa", "scale"}
        if unknown:
            raise ValueError(f"unknown flux config keys: {sorted(unknown)}")
        return cls(**d)
