"""Command-line surface: run experiments, fit decay rates, compare the oracle.

Exit codes: 0 success, 1 runtime failure or invariant violation, 2 config
error, 3 unsupported initial condition (compare-oracle).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics, elliptic, freeboundary, stepper
from .diagnostics import InsufficientData, SeriesRecord
from .grid import ScalarField, lp_norm, mean
from .linsolve import NonConvergence
from .presets import (
    PRESET_NAMES,
    ConfigError,
    ExperimentConfig,
    build_ic,
    make_preset,
    radial_profile_fn,
)
from .snapshots import write_snapshot

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_UNSUPPORTED_IC = 3


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return "%.17g" % float(x)


def write_series_csv(path, rows: list[SeriesRecord], with_hm1: bool = False) -> None:
    fields = list(SeriesRecord.CSV_FIELDS)
    if with_hm1:
        fields.append("hm1_sq")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for r in rows:
            vals = [getattr(r, f) for f in SeriesRecord.CSV_FIELDS]
            if with_hm1:
                vals.append(r.hm1_sq)
            writer.writerow([_fmt(v) for v in vals])


def read_series_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            row = {}
            for key, val in rec.items():
                if val == "" or val is None:
                    row[key] = None
                elif key == "n_components":
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cfg = ExperimentConfig.from_json(path.read_text())
    elif getattr(args, "preset", None):
        cfg = make_preset(args.preset)
    else:
        raise ConfigError("one of --preset or --config is required")
    if getattr(args, "cells", None):
        g = cfg.grid
        cfg.grid = type(g)(g.x_min, g.x_max, g.y_min, g.y_max,
                           args.cells, args.cells)
    if getattr(args, "t_end", None) is not None:
        cfg.t_end = args.t_end
    if getattr(args, "out", None):
        cfg.outputs = args.out
    return cfg


def _default_fit_windows(t_final: float) -> tuple[float, float]:
    return (0.5 * t_final, t_final)


def _fit_or_none(series, window, kind):
    try:
        fit = diagnostics.fit_decay(series, window, kind)
    except (InsufficientData, ValueError):
        return None
    return {
        "window": list(fit.window),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "kind": fit.kind,
    }


def _rates_from_rows(rows: list[dict], window) -> dict:
    rates = {}
    rates["lambda_semilog_rel_energy"] = _fit_or_none(
        [(r["t"], r["rel_energy"]) for r in rows], window, "semi-log"
    )
    if rates["lambda_semilog_rel_energy"]:
        rates["lambda_semilog_rel_energy"]["lambda"] = -rates[
            "lambda_semilog_rel_energy"
        ]["slope"]
    for key in ("energy", "pos_l1", "hm1_sq"):
        if rows and rows[0].get(key, None) is None and all(
            r.get(key) is None for r in rows
        ):
            rates[f"loglog_{key}"] = None
            continue
        rates[f"loglog_{key}"] = _fit_or_none(
            [(r["t"], r[key]) for r in rows if r.get(key) is not None],
            window, "log-log",
        )
    return rates


def do_run(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)

    ic = build_ic(cfg.ic, cfg.grid)
    keep = 200 if args.hm1 else 0
    try:
        result = stepper.run(
            ic, cfg.stepper, cfg.flux, cfg.t_end,
            snapshot_times=cfg.snapshot_times, keep_fields=keep,
        )
    except (stepper.TimestepUnderflow, NonConvergence) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_RUNTIME

    if args.hm1 and result.kept_fields:
        by_index = {idx: (t, fld) for idx, t, fld in result.kept_fields}
        for i, rec in enumerate(result.series, start=1):
            if i in by_index:
                rec.hm1_sq = elliptic.hminus1_sq(by_index[i][1], result.final)

    write_series_csv(out / "series.csv", result.series, with_hm1=args.hm1)
    for t_snap, fld in sorted(result.snapshots.items()):
        write_snapshot(out / f"snap_{t_snap:g}.ddif", fld, t_snap)
    write_snapshot(out / f"snap_{cfg.t_end:g}.ddif", result.final, cfg.t_end)

    rows = [
        {f: getattr(r, f) for f in SeriesRecord.CSV_FIELDS} | {"hm1_sq": r.hm1_sq}
        for r in result.series
    ]
    t_final = result.series[-1].t if result.series else 0.0
    window = _default_fit_windows(t_final) if t_final > 0 else (0.0, 1.0)
    rates = _rates_from_rows(rows, window) if result.series else {}

    rho_inf = mean(ic)
    summary = {
        "config": cfg.to_dict(),
        "t_final": t_final,
        "steps": len(result.series),
        "rho_inf": rho_inf,
        "final": {
            "mass": mean(result.final),
            "max_val": float(np.max(result.final.data)),
            "min_val": float(np.min(result.final.data)),
            "linf_dist_to_rho_inf": float(
                np.max(np.abs(result.final.data - rho_inf))
            ),
            "n_components": diagnostics.superlevel_components(
                result.final, cfg.threshold
            ),
        },
        "rates": rates,
        "invariants": result.audit,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))

    if args.figures:
        from . import report

        report.render_field(result.final, out / "final_state.png",
                            title=f"{cfg.name}: t = {t_final:g}")
        if rows:
            report.render_series(rows, out / "series.png")

    if not result.audit.get("all_ok", False):
        print(json.dumps({"error": "InvariantViolation",
                          "invariants": result.audit}))
        return EXIT_RUNTIME
    print(f"run complete: {len(result.series)} steps to t = {t_final:g}; "
          f"outputs in {out}")
    return EXIT_OK


def do_analyze(args) -> int:
    path = Path(args.series)
    if not path.exists():
        print(json.dumps({"error": "FileNotFound", "message": str(path)}))
        return EXIT_RUNTIME
    rows = read_series_csv(path)
    if not rows:
        print(json.dumps({"error": "InsufficientData", "message": "empty series"}))
        return EXIT_RUNTIME
    t_final = rows[-1]["t"]
    if args.window:
        window = tuple(args.window)
    else:
        window = _default_fit_windows(t_final)
    rates = _rates_from_rows(rows, window)
    if all(v is None for v in rates.values()):
        print(json.dumps({"error": "InsufficientData",
                          "message": "no fittable series in window"}))
        return EXIT_RUNTIME
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "rates.json").write_text(json.dumps(rates, indent=2))
    for name, fit in rates.items():
        if fit is None:
            print(f"{name}: (not available)")
        elif "lambda" in fit:
            print(f"{name}: lambda = {fit['lambda']:.6g} "
                  f"(r^2 = {fit['r_squared']:.4f})")
        else:
            print(f"{name}: slope = {fit['slope']:.6g} "
                  f"(r^2 = {fit['r_squared']:.4f})")
    if args.figures:
        from . import report

        report.render_series(rows, out / "series.png")
    return EXIT_OK


def check_radial_ic(cfg: ExperimentConfig):
    """Validate the compare-oracle preconditions; returns the radial datum.

    Raises ConfigError when the IC is not an origin-centered, radially
    decreasing profile with supercritical center and subcritical average.
    """
    try:
        rho0 = radial_profile_fn(cfg.ic, cfg.grid)
    except ConfigError as exc:
        raise ConfigError(f"IC is not radial: {exc}") from exc
    ic = build_ic(cfg.ic, cfg.grid)
    X, Y = cfg.grid.cell_centers()
    rr = np.hypot(X, Y)
    if float(np.max(np.abs(ic.data - rho0(rr)))) > 1e-8:
        raise ConfigError("IC does not match its radial profile")
    r_fine = np.linspace(0.0, np.hypot(1.0, 1.0), 2001)
    vals = rho0(r_fine)
    if np.any(np.diff(vals) > 1e-14):
        raise ConfigError("radial profile is not decreasing")
    if rho0(0.0) <= cfg.flux.rho_cr:
        raise ConfigError("IC center is not supercritical")
    if mean(ic) >= cfg.flux.rho_cr:
        raise ConfigError("IC average is not subcritical")
    return rho0


def do_compare_oracle(args) -> int:
    cfg = _load_config(args)
    try:
        rho0 = check_radial_ic(cfg)
    except ConfigError as exc:
        print(json.dumps({"error": "UnsupportedIC", "message": str(exc)}))
        return EXIT_UNSUPPORTED_IC

    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)

    t_end = cfg.t_end
    n_times = max(2, args.samples)
    times = [t_end * (k + 1) / n_times for k in range(n_times)]
    if 1.0 < t_end and not any(abs(t - 1.0) < 1e-12 for t in times):
        times = sorted(times + [1.0])

    ic = build_ic(cfg.ic, cfg.grid)
    try:
        result = stepper.run(ic, cfg.stepper, cfg.flux, t_end,
                             snapshot_times=times)
        state0 = freeboundary.initial_state(rho0, cfg.flux.rho_cr, args.nodes)
        _, history, rad_snaps = freeboundary.run_radial(
            state0, cfg.flux, t_end, args.radial_tau, record_times=tuple(times)
        )
    except (stepper.TimestepUnderflow, NonConvergence,
            freeboundary.NoRoot, freeboundary.FrontRetreat) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_RUNTIME

    rows = []
    for t_snap in times:
        fld = result.snapshots.get(t_snap)
        rstate = rad_snaps.get(t_snap)
        if fld is None or rstate is None:
            continue
        composite = freeboundary.composite_to_2d(rstate, cfg.grid)
        diff = ScalarField(cfg.grid, np.abs(composite.data - fld.data))
        l1 = lp_norm(diff, 1) / lp_norm(fld, 1)
        rows.append({
            "t": t_snap,
            "R_oracle": rstate.R,
            "R_contour_2d": freeboundary.contour_radius(fld, cfg.flux.rho_cr),
            "l1_diff": l1,
        })

    with open(out / "oracle.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "R_oracle", "R_contour_2d", "l1_diff"])
        for r in rows:
            writer.writerow([_fmt(r[k]) for k in
                             ("t", "R_oracle", "R_contour_2d", "l1_diff")])

    r_inf = freeboundary.r_infinity(rho0, cfg.flux.rho_cr)
    steady = freeboundary.steady_state_radial(rho0, cfg.flux.rho_cr, cfg.grid)
    diff_steady = ScalarField(cfg.grid,
                              np.abs(steady.data - result.final.data))
    summary = {
        "r_infinity": r_inf,
        "r_infinity_residual": abs(
            freeboundary.disk_average(rho0, r_inf) - cfg.flux.rho_cr
        ),
        "final_R_contour_2d": freeboundary.contour_radius(
            result.final, cfg.flux.rho_cr
        ),
        "final_R_oracle": history[-1][1],
        "final_l1_rel_diff_vs_steady": lp_norm(diff_steady, 1)
        / lp_norm(steady, 1),
        "hx": cfg.grid.hx,
        "rows": rows,
    }
    (out / "oracle_summary.json").write_text(json.dumps(summary, indent=2))

    if args.figures and rows:
        from . import report

        report.render_oracle(rows, out / "oracle.png")
    print(f"compare-oracle complete: {len(rows)} sample times; "
          f"R_inf = {r_inf:.6g}; outputs in {out}")
    return EXIT_OK


def do_presets(args) -> int:
    if args.action != "list":
        print(f"unknown presets action: {args.action}", file=sys.stderr)
        return EXIT_CONFIG
    for name in PRESET_NAMES:
        cfg = make_preset(name)
        print(f"{name}: rho_inf={cfg.ic.rho_inf:g} "
              f"grid={cfg.grid.nx}x{cfg.grid.ny} t_end={cfg.t_end:g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degdiff",
        description="Degenerate diffusion solver: run experiments, fit decay "
                    "rates, and cross-check the radial free-boundary oracle.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment to t_end")
    p_run.add_argument("--preset", choices=PRESET_NAMES)
    p_run.add_argument("--config", help="path to a JSON config file")
    p_run.add_argument("--cells", type=int, help="cells per side override")
    p_run.add_argument("--t-end", dest="t_end", type=float)
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--hm1", action="store_true",
                       help="post-pass H^-1 distance to the final state")
    p_run.add_argument("--figures", action="store_true",
                       help="render PNG figures next to the CSV output")
    p_run.set_defaults(func=do_run)

    p_an = sub.add_parser("analyze", help="fit decay rates from a series CSV")
    p_an.add_argument("series", help="path to series.csv")
    p_an.add_argument("--window", nargs=2, type=float, metavar=("T_LO", "T_HI"))
    p_an.add_argument("--out", help="directory for rates.json")
    p_an.add_argument("--figures", action="store_true")
    p_an.set_defaults(func=do_analyze)

    p_cmp = sub.add_parser("compare-oracle",
                           help="2D solver vs radial free-boundary oracle")
    p_cmp.add_argument("--preset", choices=PRESET_NAMES, default="radial")
    p_cmp.add_argument("--config")
    p_cmp.add_argument("--cells", type=int)
    p_cmp.add_argument("--t-end", dest="t_end", type=float)
    p_cmp.add_argument("--out")
    p_cmp.add_argument("--nodes", type=int, default=400,
                       help="radial oracle node count")
    p_cmp.add_argument("--radial-tau", type=float, default=2.5e-4)
    p_cmp.add_argument("--samples", type=int, default=20,
                       help="number of comparison times")
    p_cmp.add_argument("--figures", action="store_true")
    p_cmp.set_defaults(func=do_compare_oracle)

    p_pre = sub.add_parser("presets", help="list built-in presets")
    p_pre.add_argument("action", nargs="?", default="list")
    p_pre.set_defaults(func=do_presets)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
