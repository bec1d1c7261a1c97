"""End-to-end tests of the command line front end, run in process."""

import json

import numpy as np
import pytest

import gkenso
from gkenso.cli import main


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


class TestExitCodes:
    def test_version_flag(self):
        assert main(["--version"]) == 0

    def test_no_arguments(self):
        assert main([]) == 2

    def test_unknown_command(self):
        assert main(["bogus"]) == 2

    def test_missing_required_parameter(self, tmp_path):
        assert main(["reduce", "--outdir", str(tmp_path)]) == 2

    def test_non_numeric_value(self, tmp_path):
        assert main(["reduce", "--tau", "abc", "--outdir", str(tmp_path)]) == 2

    def test_empty_tau_range(self, tmp_path):
        assert main(["spectrum", "--tau-range", "1.9:1.3:0.05", "--outdir", str(tmp_path)]) == 2

    def test_malformed_range(self, tmp_path):
        assert main(["spectrum", "--tau-range", "1.3:2.5", "--outdir", str(tmp_path)]) == 2

    def test_too_many_pairs_for_modes(self, tmp_path):
        argv = ["spectrum", "--tau-range", "1.6:1.65:0.05", "--pairs", "5"]
        assert main(argv + ["--outdir", str(tmp_path)]) == 2

    def test_numerical_failure_maps_to_three(self, tmp_path):
        # below the fold there is no cycle for the settler to find
        assert main(["orbit", "--tau", "1.50", "--outdir", str(tmp_path)]) == 3

    def test_unwritable_outdir_maps_to_four(self, tmp_path):
        blocker = tmp_path / "blockfile"
        blocker.write_text("x")
        argv = ["reduce", "--tau", "1.7", "--outdir", str(blocker / "sub")]
        assert main(argv) == 4


class TestConfigFile:
    def test_config_supplies_required_parameter(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# reduction point\ntau = 1.7\nn = 4\n")
        assert main(["reduce", "--config", str(cfg), "--outdir", str(tmp_path)]) == 0
        meta = json.loads((tmp_path / "reduce_meta.json").read_text())
        assert meta["parameters"]["tau"] == 1.7
        assert meta["parameters"]["n"] == 4

    def test_command_line_overrides_config(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("tau = 1.7\n")
        argv = ["reduce", "--config", str(cfg), "--tau", "1.9", "--outdir", str(tmp_path)]
        assert main(argv) == 0
        meta = json.loads((tmp_path / "reduce_meta.json").read_text())
        assert meta["parameters"]["tau"] == 1.9

    def test_hyphenated_config_key_accepted(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("tau-range = 1.6:1.65:0.05\n")
        assert main(["spectrum", "--config", str(cfg), "--outdir", str(tmp_path)]) == 0

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("tau = 1.7\nbogus = 3\n")
        assert main(["reduce", "--config", str(cfg), "--outdir", str(tmp_path)]) == 2

    def test_malformed_config_line_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("tau 1.7\n")
        assert main(["reduce", "--config", str(cfg), "--outdir", str(tmp_path)]) == 2

    def test_missing_config_file_rejected(self, tmp_path):
        argv = ["reduce", "--tau", "1.7", "--config", str(tmp_path / "nope.cfg")]
        assert main(argv + ["--outdir", str(tmp_path)]) == 2


class TestOutdirResolution:
    def test_environment_variable_sets_destination(self, tmp_path, monkeypatch):
        monkeypatch.setenv("GKENSO_OUTDIR", str(tmp_path))
        assert main(["reduce", "--tau", "1.7"]) == 0
        assert (tmp_path / "reduce.json").exists()

    def test_flag_beats_environment(self, tmp_path, monkeypatch):
        env_dir = tmp_path / "env"
        flag_dir = tmp_path / "flag"
        monkeypatch.setenv("GKENSO_OUTDIR", str(env_dir))
        assert main(["reduce", "--tau", "1.7", "--outdir", str(flag_dir)]) == 0
        assert (flag_dir / "reduce.json").exists()
        assert not env_dir.exists()


class TestSpectrum:
    def test_sweep_artifact_layout(self, tmp_path):
        argv = ["spectrum", "--tau-range", "1.6:1.7:0.05", "--outdir", str(tmp_path)]
        assert main(argv) == 0
        header, rows = read_csv(tmp_path / "spectrum.csv")
        assert header == ["tau", "j", "re_lambda", "im_lambda"]
        # three grid points, six tracked eigenvalues each
        assert len(rows) == 18
        assert sorted({int(r[1]) for r in rows}) == [1, 2, 3, 4, 5, 6]

    def test_critical_delay_report(self, tmp_path):
        argv = [
            "spectrum", "--tau-range", "1.7:1.75:0.05", "--find-tauc",
            "--outdir", str(tmp_path),
        ]
        assert main(argv) == 0
        report = json.loads((tmp_path / "spectrum_tauc.json").read_text())
        assert sorted(report.keys()) == ["l1", "tau_c", "type"]
        assert report["tau_c"] == pytest.approx(1.7408641, abs=1e-5)
        assert report["l1"] == pytest.approx(2.22469, abs=1e-3)
        assert report["type"] == "subcritical"

    def test_metadata_is_reproducible_shape(self, tmp_path):
        argv = ["spectrum", "--tau-range", "1.6:1.65:0.05", "--outdir", str(tmp_path)]
        assert main(argv) == 0
        meta = json.loads((tmp_path / "spectrum_meta.json").read_text())
        # fixed key set, no timestamps or host details
        assert sorted(meta.keys()) == ["command", "parameters", "rng", "version"]
        assert meta["command"] == "spectrum"
        assert meta["version"] == gkenso.__version__
        assert meta["rng"] is None
        assert meta["parameters"]["tau_range"] == [1.6, 1.65, 0.05]


class TestReduce:
    def test_closure_artifact(self, tmp_path):
        assert main(["reduce", "--tau", "1.7", "--outdir", str(tmp_path)]) == 0
        payload = json.loads((tmp_path / "reduce.json").read_text())
        assert sorted(payload.keys()) == ["N", "closure", "gain", "lambda", "lift", "tau"]
        assert payload["N"] == 6
        assert payload["tau"] == 1.7


class TestOrbit:
    def test_stable_cycle_dump(self, tmp_path):
        argv = ["orbit", "--tau", "1.9", "--samples", "16", "--outdir", str(tmp_path)]
        assert main(argv) == 0
        orbit = json.loads((tmp_path / "orbit.json").read_text())
        assert orbit["family"] == "stable_cycle"
        assert orbit["stability"] == "stable"
        assert 9.5 <= orbit["period"] <= 10.6
        assert len(orbit["samples"]) == 16
        assert all(len(pair) == 2 for pair in orbit["samples"])
        assert orbit["period_yr"] == pytest.approx(orbit["period"] * 349.0 / (1.7 * 365.0))

    def test_single_sample_rejected(self, tmp_path):
        argv = ["orbit", "--tau", "1.9", "--samples", "1", "--outdir", str(tmp_path)]
        assert main(argv) == 2


class TestDiagram:
    def test_single_family_sweep(self, tmp_path):
        argv = [
            "diagram", "--tau-range", "1.64:1.68:0.02", "--family", "upo_inner_plus",
            "--outdir", str(tmp_path),
        ]
        assert main(argv) == 0
        header, rows = read_csv(tmp_path / "diagram.csv")
        assert header == ["family", "tau", "amplitude", "period"]
        assert [r[0] for r in rows] == ["upo_inner_plus"] * 3
        amps = [float(r[2]) for r in rows]
        assert amps == sorted(amps, reverse=True)  # branch shrinks toward the Hopf


class TestDde:
    ARGS = [
        "dde", "--tau", "1.9", "--t-end", "300", "--dt", "0.002", "--stride", "10",
        "--history", "0.1", "--transient", "200",
    ]

    def test_trajectory_with_galerkin_twin_and_orbit(self, tmp_path):
        assert main(self.ARGS + ["--gk", "4", "--orbit", "--outdir", str(tmp_path)]) == 0
        header, rows = read_csv(tmp_path / "dde.csv")
        assert header == ["t", "x"]
        assert len(rows) == 15001
        gk_header, gk_rows = read_csv(tmp_path / "dde_gk.csv")
        assert gk_header == ["t", "y0", "y1", "y2", "y3", "xN"]
        assert len(gk_rows) == 15001
        orbit = json.loads((tmp_path / "dde_orbit.json").read_text())
        assert sorted(orbit.keys()) == ["amplitude", "period", "period_yr"]
        assert 9.5 <= orbit["period"] <= 10.6

    def test_failed_extraction_writes_nothing(self, tmp_path):
        # stride 100 leaves too few samples per cycle for closure; the
        # command must fail before any artifact reaches the directory
        out = tmp_path / "out"
        argv = [
            "dde", "--tau", "1.9", "--t-end", "300", "--dt", "0.002", "--stride", "100",
            "--history", "0.1", "--transient", "200", "--orbit", "--outdir", str(out),
        ]
        assert main(argv) == 3
        assert not out.exists() or list(out.iterdir()) == []

    def test_step_not_dividing_delay_rejected(self, tmp_path):
        argv = ["dde", "--tau", "1.7", "--dt", "0.3", "--outdir", str(tmp_path)]
        assert main(argv) == 2


class TestTsp:
    ARGS = ["tsp", "--steps", "20000", "--seed", "7", "--stride", "10"]

    def test_path_artifact_and_dialect(self, tmp_path):
        assert main(self.ARGS + ["--outdir", str(tmp_path)]) == 0
        data = (tmp_path / "tsp.csv").read_bytes()
        assert b"\r" not in data
        assert data.endswith(b"\n")
        header, rows = read_csv(tmp_path / "tsp.csv")
        assert header == ["t", "theta", "tau"]
        assert len(rows) == 2001

    def test_repeat_invocation_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(self.ARGS + ["--outdir", str(a)]) == 0
        assert main(self.ARGS + ["--outdir", str(b)]) == 0
        assert (a / "tsp.csv").read_bytes() == (b / "tsp.csv").read_bytes()
        assert (a / "tsp_meta.json").read_bytes() == (b / "tsp_meta.json").read_bytes()

    def test_metadata_records_generator_and_seeds(self, tmp_path):
        assert main(self.ARGS + ["--outdir", str(tmp_path)]) == 0
        meta = json.loads((tmp_path / "tsp_meta.json").read_text())
        assert meta["rng"] == "numpy-pcg64"
        assert meta["parameters"]["seeds"] == [7]
        assert meta["parameters"]["seed"] == 7

    def test_ensemble_writes_per_seed_files(self, tmp_path):
        argv = ["tsp", "--steps", "5000", "--stride", "10", "--ensemble", "2"]
        assert main(argv + ["--outdir", str(tmp_path)]) == 0
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["tsp_meta.json", "tsp_s0.csv", "tsp_s1.csv"]


class TestPsd:
    @pytest.fixture()
    def tsp_csv(self, tmp_path):
        src = tmp_path / "src"
        argv = ["tsp", "--steps", "60000", "--seed", "7", "--stride", "1"]
        assert main(argv + ["--outdir", str(src)]) == 0
        return src / "tsp.csv"

    def test_spectrum_with_band_isolation(self, tmp_path, tsp_csv):
        out = tmp_path / "out"
        argv = [
            "psd", "--segment-years", "20", "--band", "4:8",
            "--outdir", str(out), str(tsp_csv),
        ]
        assert main(argv) == 0
        header, rows = read_csv(out / "psd.csv")
        assert header == ["period_yr", "power"]
        assert len(rows) > 100
        band_header, band_rows = read_csv(out / "psd_band.csv")
        assert band_header == ["t", "theta"]
        assert len(band_rows) == 60001
        peak = json.loads((out / "psd_band.json").read_text())
        assert sorted(peak.keys()) == ["flank_median", "peak_power", "period_yr", "ratio"]
        assert 4.0 <= peak["period_yr"] <= 8.0
        assert 10.0 <= peak["ratio"] <= 25.0  # interannual peak well above flanks

    def test_no_inputs_rejected(self, tmp_path):
        assert main(["psd", "--outdir", str(tmp_path)]) == 2

    def test_mismatched_sampling_rejected(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["tsp", "--steps", "60000", "--stride", "1", "--outdir", str(a)]) == 0
        assert main(["tsp", "--steps", "30000", "--stride", "2", "--outdir", str(b)]) == 0
        argv = [
            "psd", "--segment-years", "20", "--outdir", str(tmp_path / "out"),
            str(a / "tsp.csv"), str(b / "tsp.csv"),
        ]
        assert main(argv) == 2

    def test_input_without_theta_column_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n3,4\n5,6\n")
        assert main(["psd", "--outdir", str(tmp_path / "out"), str(bad)]) == 2

    def test_input_with_too_few_rows_rejected(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,theta\n0.0,1.0\n0.1,1.1\n")
        assert main(["psd", "--outdir", str(tmp_path / "out"), str(bad)]) == 2
