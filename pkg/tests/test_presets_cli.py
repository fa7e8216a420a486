import json

import numpy as np
import pytest

from degdiff.cli import main, read_series_csv
from degdiff.grid import Grid2D, ScalarField, mean
from degdiff.presets import (
    PRESET_NAMES,
    ConfigError,
    ExperimentConfig,
    ICSpec,
    build_ic,
    make_preset,
    radial_profile_fn,
)
from degdiff.snapshots import (
    SnapshotFormatError,
    read_snapshot,
    write_snapshot,
)


class TestICs:
    def test_build_ic_exact_mean(self):
        for name in PRESET_NAMES:
            cfg = make_preset(name, cells=40)
            ic = build_ic(cfg.ic, cfg.grid)
            assert mean(ic) == pytest.approx(cfg.ic.rho_inf, rel=1e-14)

    def test_radial_profile_matches_2d_samples(self):
        cfg = make_preset("radial", cells=50)
        rho0 = radial_profile_fn(cfg.ic, cfg.grid)
        ic = build_ic(cfg.ic, cfg.grid)
        X, Y = cfg.grid.cell_centers()
        np.testing.assert_allclose(rho0(np.hypot(X, Y)), ic.data, rtol=1e-12)

    def test_radial_profile_rejects_multi_gaussian(self):
        cfg = make_preset("fig2", cells=40)
        with pytest.raises(ConfigError):
            radial_profile_fn(cfg.ic, cfg.grid)

    def test_ic_spec_validation(self):
        with pytest.raises(ConfigError):
            ICSpec(gaussians=[], rho_inf=1.0)
        with pytest.raises(ConfigError):
            ICSpec(gaussians=[{"decay": 1.0, "center": [0.0]}], rho_inf=1.0)
        with pytest.raises(ConfigError):
            ICSpec(gaussians=[{"decay": 1.0, "center": [0, 0],
                               "width": 2}], rho_inf=1.0)
        with pytest.raises(ConfigError):
            ICSpec(gaussians=[{"decay": 1.0, "center": [0, 0]}], rho_inf=0.0)


class TestExperimentConfig:
    def test_json_roundtrip(self):
        cfg = make_preset("fig3", cells=60)
        again = ExperimentConfig.from_json(cfg.to_json())
        assert again.to_dict() == cfg.to_dict()

    def test_unknown_root_key_rejected(self):
        d = make_preset("fig1").to_dict()
        d["extra"] = 1
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict(d)

    def test_unknown_nested_keys_rejected(self):
        for section in ("flux", "grid", "ic", "stepper"):
            d = make_preset("fig1").to_dict()
            d[section]["bogus"] = 1
            with pytest.raises(ConfigError):
                ExperimentConfig.from_dict(d)

    def test_missing_key_rejected(self):
        d = make_preset("fig1").to_dict()
        del d["flux"]
        with pytest.raises(ConfigError, match="missing"):
            ExperimentConfig.from_dict(d)

    def test_invalid_json_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json("[1, 2]")

    def test_default_threshold_is_half_mean(self):
        cfg = make_preset("fig2")
        assert cfg.threshold == pytest.approx(cfg.ic.rho_inf / 2)
        cfg.segregation_threshold = 0.9
        assert cfg.threshold == 0.9

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            make_preset("fig9")


class TestSnapshots:
    def test_roundtrip_bitwise(self, tmp_path):
        g = Grid2D(nx=7, ny=5)
        data = np.random.default_rng(0).uniform(0, 2, (5, 7))
        fld = ScalarField(g, data)
        path = tmp_path / "s.ddif"
        write_snapshot(path, fld, 1.25)
        back, t = read_snapshot(path, g)
        assert t == 1.25
        assert np.array_equal(back.data, data)
        assert back.data.tobytes() == data.tobytes()

    def test_shape_synthesized_grid(self, tmp_path):
        g = Grid2D(nx=4, ny=3)
        path = tmp_path / "s.ddif"
        write_snapshot(path, ScalarField(g, np.zeros((3, 4))), 0.0)
        back, _ = read_snapshot(path)
        assert (back.grid.nx, back.grid.ny) == (4, 3)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ddif"
        path.write_bytes(b"XXXX" + bytes(100))
        with pytest.raises(SnapshotFormatError, match="magic"):
            read_snapshot(path)

    def test_truncated(self, tmp_path):
        g = Grid2D(nx=4, ny=4)
        path = tmp_path / "t.ddif"
        write_snapshot(path, ScalarField(g, np.ones((4, 4))), 0.0)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(SnapshotFormatError, match="length"):
            read_snapshot(path)

    def test_grid_mismatch(self, tmp_path):
        g = Grid2D(nx=4, ny=4)
        path = tmp_path / "g.ddif"
        write_snapshot(path, ScalarField(g, np.ones((4, 4))), 0.0)
        with pytest.raises(SnapshotFormatError, match="shape"):
            read_snapshot(path, Grid2D(nx=5, ny=5))


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    rc = main(["run", "--preset", "fig1", "--cells", "20",
               "--t-end", "0.02", "--out", str(out)])
    assert rc == 0
    return out


class TestCLI:
    def test_presets_list(self, capsys):
        assert main(["presets", "list"]) == 0
        out = capsys.readouterr().out
        for name in PRESET_NAMES:
            assert name in out

    def test_run_outputs(self, tiny_run):
        assert (tiny_run / "series.csv").exists()
        assert (tiny_run / "summary.json").exists()
        assert (tiny_run / "snap_0.02.ddif").exists()
        summary = json.loads((tiny_run / "summary.json").read_text())
        assert summary["invariants"]["all_ok"]
        assert summary["config"]["name"] == "fig1"
        rows = read_series_csv(tiny_run / "series.csv")
        assert rows and rows[-1]["t"] == pytest.approx(0.02)

    def test_series_has_17_digit_precision(self, tiny_run):
        text = (tiny_run / "series.csv").read_text().splitlines()
        # the mass column must carry full double precision
        mass = text[1].split(",")[2]
        assert len(mass.replace(".", "").replace("-", "").lstrip("0")) >= 16

    def test_analyze_on_run_output(self, tiny_run, tmp_path):
        rc = main(["analyze", str(tiny_run / "series.csv"),
                   "--out", str(tmp_path)])
        assert rc == 0
        rates = json.loads((tmp_path / "rates.json").read_text())
        assert "lambda_semilog_rel_energy" in rates

    def test_analyze_missing_file(self, tmp_path):
        assert main(["analyze", str(tmp_path / "absent.csv")]) == 1

    def test_run_requires_config_or_preset(self):
        assert main(["run"]) == 2

    def test_bad_config_file_exit_2(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"name": "x", "unexpected": 1}')
        assert main(["run", "--config", str(cfg)]) == 2

    def test_config_file_run(self, tmp_path):
        cfg = make_preset("fig1", cells=16, t_end=0.01)
        cfg.outputs = str(tmp_path / "out")
        path = tmp_path / "cfg.json"
        path.write_text(cfg.to_json())
        assert main(["run", "--config", str(path)]) == 0
        assert (tmp_path / "out" / "series.csv").exists()

    def test_compare_oracle_rejects_nonradial(self, tmp_path):
        assert main(["compare-oracle", "--preset", "fig2", "--cells", "20",
                     "--out", str(tmp_path)]) == 3

    def test_run_figures(self, tmp_path):
        out = tmp_path / "figs"
        rc = main(["run", "--preset", "fig1", "--cells", "16",
                   "--t-end", "0.01", "--out", str(out), "--figures"])
        assert rc == 0
        assert (out / "final_state.png").stat().st_size > 0
        assert (out / "series.png").stat().st_size > 0

    def test_run_deterministic(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["run", "--preset", "fig1", "--cells", "16",
                         "--t-end", "0.01", "--out", str(out)]) == 0
            outs.append((out / "series.csv").read_bytes())
        assert outs[0] == outs[1]
