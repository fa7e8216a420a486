"""Experiment configuration, Gaussian initial data, and built-in presets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .flux import FluxFunction
from .grid import Grid2D, ScalarField
from .stepper import StepperConfig


class ConfigError(ValueError):
    pass


class NonPositiveProfile(ValueError):
    pass


@dataclass
class ICSpec:
    """Sum-of-Gaussians profile, rescaled so the discrete mean is rho_inf.

    Each entry contributes exp(-decay * |x - center|^2); the sum is sampled
    at cell centers and multiplied by a single constant fixing the mean.
    """

    gaussians: list[dict]  # [{"decay": float, "center": [x, y]}, ...]
    rho_inf: float

    def __post_init__(self) -> None:
        if self.rho_inf <= 0:
            raise ConfigError("rho_inf must be > 0")
        if not self.gaussians:
            raise ConfigError("at least one gaussian required")
        for g in self.gaussians:
            unknown = set(g) - {"decay", "center"}
            if unknown:
                raise ConfigError(f"unknown gaussian keys: {sorted(unknown)}")
            if len(g["center"]) != 2:
                raise ConfigError("gaussian center must be [x, y]")

    def to_dict(self) -> dict[str, Any]:
        return {
            "gaussians": [
                {"decay": g["decay"], "center": list(g["center"])}
                for g in self.gaussians
            ],
            "rho_inf": self.rho_inf,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ICSpec":
        unknown = set(d) - {"gaussians", "rho_inf"}
        if unknown:
            raise ConfigError(f"unknown ic config keys: {sorted(unknown)}")
        return cls(gaussians=d["gaussians"], rho_inf=d["rho_inf"])


def build_ic(spec: ICSpec, grid: Grid2D) -> ScalarField:
    """Sample the profile at cell centers; rescale to the exact discrete mean."""
    X, Y = grid.cell_centers()
    prof = np.zeros_like(X)
    for g in spec.gaussians:
        cx, cy = g["center"]
        prof += np.exp(-float(g["decay"]) * ((X - cx) ** 2 + (Y - cy) ** 2))
    if np.any(prof <= 0):
        raise NonPositiveProfile("initial profile must be positive everywhere")
    prof *= spec.rho_inf / (np.sum(prof) / grid.n_cells)
    return ScalarField(grid, prof)


def radial_profile_fn(spec: ICSpec, grid: Grid2D):
    """The exact radial function r -> rho0(r) matching build_ic's scaling.

    Only valid for a single origin-centered gaussian; the normalization uses
    the same discrete mean as build_ic so both agree to roundoff at cell
    centers.
    """
    if len(spec.gaussians) != 1 or tuple(spec.gaussians[0]["center"]) != (0.0, 0.0):
        raise ConfigError("radial profile requires a single origin-centered gaussian")
    decay = float(spec.gaussians[0]["decay"])
    X, Y = grid.cell_centers()
    disc_mean = float(np.sum(np.exp(-decay * (X**2 + Y**2))) / grid.n_cells)
    amp = spec.rho_inf / disc_mean

    def rho0(r):
        return amp * np.exp(-decay * np.asarray(r, dtype=float) ** 2)

    return rho0


@dataclass
class ExperimentConfig:
    name: str
    flux: FluxFunction
    grid: Grid2D
    ic: ICSpec
    stepper: StepperConfig
    t_end: float
    snapshot_times: list[float] = field(default_factory=list)
    outputs: str = "out"
    segregation_threshold: Optional[float] = None  # None -> rho_inf / 2

    @property
    def threshold(self) -> float:
        if self.segregation_threshold is not None:
            return self.segregation_threshold
        return self.ic.rho_inf / 2.0

    def to_dict(self) -> dict[str, Any]:
        d = {
            "name": self.name,
            "flux": self.flux.to_dict(),
            "grid": self.grid.to_dict(),
            "ic": self.ic.to_dict(),
            "stepper": self.stepper.to_dict(),
            "t_end": self.t_end,
            "snapshot_times": list(self.snapshot_times),
            "outputs": self.outputs,
        }
        if self.segregation_threshold is not None:
            d["segregation_threshold"] = self.segregation_threshold
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        known = {
            "name", "flux", "grid", "ic", "stepper", "t_end",
            "snapshot_times", "outputs", "segregation_threshold",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("name", "flux", "grid", "ic", "stepper", "t_end"):
            if key not in d:
                raise ConfigError(f"missing config key: {key}")
        try:
            return cls(
                name=d["name"],
                flux=FluxFunction.from_dict(d["flux"]),
                grid=Grid2D.from_dict(d["grid"]),
                ic=ICSpec.from_dict(d["ic"]),
                stepper=StepperConfig.from_dict(d["stepper"]),
                t_end=float(d["t_end"]),
                snapshot_times=[float(s) for s in d.get("snapshot_times", [])],
                outputs=d.get("outputs", "out"),
                segregation_threshold=d.get("segregation_threshold"),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(d)


def _default_grid(cells: int) -> Grid2D:
    return Grid2D(-1.0, 1.0, -1.0, 1.0, cells, cells)


def make_preset(name: str, cells: Optional[int] = None,
                t_end: Optional[float] = None) -> ExperimentConfig:
    """Built-in experiment presets.

    fig1: supercritical single Gaussian, mean 3/2 (converges to the constant).
    fig2: two close Gaussians, mean 3/4 (merge into one distribution).
    fig3: two distant Gaussians, mean 3/10 (stay segregated).
    radial: subcritical origin-centered Gaussian for the free-boundary oracle.
    """
    flux = FluxFunction(rho_cr=1.0, kappa=2.0, scale=1.0)
    stepper = StepperConfig()
    if name == "fig1":
        cfg = ExperimentConfig(
            name="fig1", flux=flux, grid=_default_grid(cells or 400),
            ic=ICSpec(gaussians=[{"decay": 3.0, "center": [0.0, 0.0]}],
                      rho_inf=1.5),
            stepper=stepper, t_end=5.0 if t_end is None else t_end,
        )
    elif name == "fig2":
        cfg = ExperimentConfig(
            name="fig2", flux=flux, grid=_default_grid(cells or 500),
            ic=ICSpec(
                gaussians=[
                    {"decay": 16.0, "center": [-0.35, 0.35]},
                    {"decay": 16.0, "center": [0.35, -0.35]},
                ],
                rho_inf=0.75,
            ),
            stepper=stepper, t_end=10.0 if t_end is None else t_end,
        )
    elif name == "fig3":
        cfg = ExperimentConfig(
            name="fig3", flux=flux, grid=_default_grid(cells or 500),
            ic=ICSpec(
                gaussians=[
                    {"decay": 8.0, "center": [0.75, -0.75]},
                    {"decay": 8.0, "center": [-0.75, 0.75]},
                ],
                rho_inf=0.3,
            ),
            stepper=stepper, t_end=10.0 if t_end is None else t_end,
        )
    elif name == "radial":
        cfg = ExperimentConfig(
            name="radial", flux=flux, grid=_default_grid(cells or 400),
            ic=ICSpec(gaussians=[{"decay": 8.0, "center": [0.0, 0.0]}],
                      rho_inf=0.4),
            stepper=stepper, t_end=50.0 if t_end is None else t_end,
        )
    else:
        raise ConfigError(f"unknown preset: {name!r}")
    return cfg


PRESET_NAMES = ("fig1", "fig2", "fig3", "radial")
