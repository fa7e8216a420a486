"""Figure rendering for run/analyze/compare outputs (matplotlib, Agg)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .grid import ScalarField  # noqa: E402


def render_field(fld: ScalarField, path, title: str = "") -> None:
    g = fld.grid
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(
        fld.data,
        origin="lower",
        extent=(g.x_min, g.x_max, g.y_min, g.y_max),
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax, label="density")
    if title:
        ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def render_series(rows: Sequence[dict], path) -> None:
    """Decay curves (log y) for the monitored functionals vs time."""
    t = [r["t"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    for key in ("energy", "rel_energy", "pos_l1"):
        y = [r[key] for r in rows]
        if any(v > 0 for v in y):
            axes[0].plot(t, y, label=key)
    axes[0].set_yscale("log")
    axes[0].set_xlabel("t")
    axes[0].legend()
    axes[0].set_title("energies and excess mass")
    axes[1].plot(t, [r["max_val"] for r in rows], label="max")
    axes[1].plot(t, [r["min_val"] for r in rows], label="min")
    axes[1].plot(t, [r["mass"] for r in rows], label="mean", ls="--")
    axes[1].set_xlabel("t")
    axes[1].legend()
    axes[1].set_title("extrema and mean")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def render_oracle(rows: Sequence[dict], path) -> None:
    t = [r["t"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    axes[0].plot(t, [r["R_oracle"] for r in rows], label="R oracle")
    axes[0].plot(t, [r["R_contour_2d"] for r in rows], "--", label="R 2d contour")
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("front radius")
    axes[0].legend()
    axes[1].plot(t, [r["l1_diff"] for r in rows])
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("relative L1 difference")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
