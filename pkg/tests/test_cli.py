"""Tests for config parsing, sweep orchestration and the delimited output."""

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mirrormps.cli import (COLUMNS, ConfigError, RunConfig, SweepSpec, emit,
                           main, parse_config_text, read_records, run_point,
                           run_sweep)

FAST_RUN = """
# fast diagnostic run (coarse pulse, short window)
gamma = 1.0
tau = 0.1
phi = 0.0
pulse_area = 3.141592653589793
pulse_width = 0.3
dt = 0.01
bin_photon_cutoff = 3
t_end = 1.5
allow_short_window = true
outputs = correlations,probabilities,normalized
baseline_mode = auto
"""

FAST_SWEEP = FAST_RUN + """
sweep_axis1 = tau
sweep_axis1_values = 0.1
"""


class TestParseConfig:
    def test_minimal_valid(self):
        cfg = parse_config_text("gamma = 1.0\ntau = 0.06\nphi = 0\n"
                                "pulse_area = 6.283185307179586\n"
                                "pulse_width = 0.0849\n")
        assert isinstance(cfg, RunConfig)
        assert cfg.physical.feedback_enabled  # tau > 0 switches it on
        assert cfg.physical.tau == 0.06

    def test_negative_tau_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("tau = -0.5\n")

    def test_unknown_key_rejected_with_line(self):
        with pytest.raises(ConfigError, match="line 2.*frobnicate"):
            parse_config_text("gamma = 1.0\nfrobnicate = 3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("gamma = 1.0\ngamma = 2.0\n")

    def test_normalized_without_baseline_rejected(self):
        with pytest.raises(ConfigError, match="baseline"):
            parse_config_text("outputs = probabilities,normalized\n"
                              "baseline_mode = none\n")

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# comment\n\ngamma = 2.0  # trailing\n")
        assert cfg.physical.gamma == 2.0

    def test_sweep_axes(self):
        spec = parse_config_text(FAST_RUN + "sweep_axis1 = tau\n"
                                 "sweep_axis1_min = 0.05\nsweep_axis1_max = 0.2\n"
                                 "sweep_axis1_count = 3\nsweep_axis1_scale = linear\n"
                                 "sweep_axis2 = phi\n"
                                 "sweep_axis2_values = 0.0,3.14\n")
        assert isinstance(spec, SweepSpec)
        assert spec.axes[0].values == pytest.approx((0.05, 0.125, 0.2))
        assert spec.axes[1].param == "phi"

    def test_geometric_default_density(self):
        spec = parse_config_text(FAST_RUN + "sweep_axis1 = tau\n"
                                 "sweep_axis1_min = 0.01\nsweep_axis1_max = 0.1\n")
        assert len(spec.axes[0].values) == 25  # 24 points per decade

    def test_duplicate_axes_rejected(self):
        with pytest.raises(ConfigError, match="distinct"):
            parse_config_text(FAST_RUN + "sweep_axis1 = tau\nsweep_axis1_values = 0.1\n"
                              "sweep_axis2 = tau\nsweep_axis2_values = 0.2\n")

    def test_invalid_bool(self):
        with pytest.raises(ConfigError, match="boolean"):
            parse_config_text("feedback = maybe\n")


class TestEmitAndReadBack:
    def test_header_only_csv(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit([], "csv", str(path))
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].split(",") == list(COLUMNS)

    def test_round_trip_precision(self, tmp_path):
        record = {k: None for k in COLUMNS}
        record.update(gamma=1.0, tau=0.06532197843219, phi=np.pi, p1=0.123456789012345,
                      p2=9.87654321e-7, feedback=True, bin_photon_cutoff=3,
                      flags="", status="ok", wall_time_s=1.25)
        path = tmp_path / "rt.csv"
        emit([record], "csv", str(path))
        back = read_records(str(path))[0]
        for key in ("tau", "p1", "p2"):
            # 12 significant digits: relative quantization below 5e-12
            assert back[key] == pytest.approx(record[key], rel=5e-12)
        assert back["feedback"] is True
        assert back["gamma"] == 1

    def test_jsonl_mirror(self, tmp_path):
        record = {k: None for k in COLUMNS}
        record.update(gamma=1.0, p2=0.25, feedback=False, status="ok")
        path = tmp_path / "r.jsonl"
        emit([record], "jsonl", str(path))
        row = json.loads(path.read_text().splitlines()[0])
        assert row["p2"] == 0.25
        assert row["feedback"] is False

    def test_golden_header_order(self, tmp_path):
        # downstream consumers key on this exact order
        assert COLUMNS[:6] == ("gamma", "tau", "phi", "pulse_area",
                               "pulse_width", "feedback")
        assert COLUMNS[-2:] == ("status", "wall_time_s")


class TestRunAndSweep:
    def test_run_point_record_complete(self):
        cfg = parse_config_text(FAST_RUN)
        rec = run_point(cfg)
        rec.pop("_trajectory", None)
        assert rec["status"] == "ok"
        assert rec["c1"] is not None and rec["p1"] is not None
        assert rec["closure_error"] < 5e-2
        assert rec["dt"] == pytest.approx(0.01)

    def test_single_point_sweep_equals_run(self, tmp_path):
        spec = parse_config_text(FAST_SWEEP)
        sweep_recs = run_sweep(spec, workers=1)

        cfg = parse_config_text(FAST_RUN)
        from mirrormps.cli import _baseline_config, _stats_from_record
        braw = run_point(_baseline_config(cfg))
        run_rec = run_point(cfg, _stats_from_record(braw))
        run_rec.pop("_trajectory", None)

        assert len(sweep_recs) == 1
        for key in COLUMNS:
            if key == "wall_time_s":  # timing is the one non-deterministic column
                continue
            a, b = sweep_recs[0][key], run_rec[key]
            if isinstance(a, float):
                assert a == b, key
            else:
                assert a == b, key

    def test_deterministic_csv_across_repeats(self, tmp_path):
        spec = parse_config_text(FAST_SWEEP)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit(run_sweep(spec, workers=1), "csv", str(p1))
        emit(run_sweep(spec, workers=1), "csv", str(p2))
        strip = lambda p: ["," .join(v for i, v in enumerate(line.split(","))
                                     if COLUMNS[i] != "wall_time_s")
                           for i, line in enumerate(p.read_text().splitlines()) if i > 0]
        assert strip(p1) == strip(p2)

    def test_workers_do_not_change_records(self):
        spec = parse_config_text(FAST_RUN + "sweep_axis1 = phi\n"
                                 "sweep_axis1_values = 0.0,3.141592653589793\n")
        serial = run_sweep(spec, workers=1)
        parallel = run_sweep(spec, workers=2)
        for a, b in zip(serial, parallel):
            for key in COLUMNS:
                if key != "wall_time_s":
                    assert a[key] == b[key], key

    def test_tau_axis_reenables_feedback(self):
        # feedback defaults from tau; a tau sweep must re-derive it per point
        spec = parse_config_text(
            "gamma = 1.0\npulse_area = 3.141592653589793\npulse_width = 0.3\n"
            "dt = 0.01\nbin_photon_cutoff = 3\nt_end = 1.5\n"
            "allow_short_window = true\n"
            "sweep_axis1 = tau\nsweep_axis1_values = 0.1\n")
        rec = run_sweep(spec, workers=1)[0]
        assert rec["feedback"] is True
        explicit = parse_config_text(
            "gamma = 1.0\npulse_area = 3.141592653589793\npulse_width = 0.3\n"
            "dt = 0.01\nbin_photon_cutoff = 3\nt_end = 1.5\n"
            "allow_short_window = true\nfeedback = false\n"
            "sweep_axis1 = tau\nsweep_axis1_values = 0.1\n")
        rec2 = run_sweep(explicit, workers=1)[0]
        assert rec2["feedback"] is False
        assert rec2["p2"] != rec["p2"]

    def test_normalized_ratios_recoverable(self):
        spec = parse_config_text(FAST_SWEEP)
        rec = run_sweep(spec, workers=1)[0]
        from mirrormps.cli import _baseline_config, _stats_from_record
        braw = run_point(_baseline_config(spec.base))
        base = _stats_from_record(braw)
        assert rec["pbar2"] == pytest.approx(rec["p2"] / base.p2, rel=1e-12)
        assert rec["pbar1"] == pytest.approx(rec["p1"] / base.p1, rel=1e-12)


class TestCommandLine:
    def _write(self, tmp_path, text, name="cfg.txt"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_run_subcommand(self, tmp_path):
        cfg = self._write(tmp_path, FAST_RUN)
        out = str(tmp_path / "out.csv")
        assert main(["run", "--config", cfg, "--out", out]) == 0
        recs = read_records(out)
        assert len(recs) == 1 and recs[0]["status"] == "ok"

    def test_population_series_output(self, tmp_path):
        cfg = self._write(tmp_path, FAST_RUN.replace(
            "outputs = correlations,probabilities,normalized",
            "outputs = population_series,probabilities").replace(
            "baseline_mode = auto", "baseline_mode = none"))
        out = str(tmp_path / "out.csv")
        assert main(["run", "--config", cfg, "--out", out]) == 0
        series = tmp_path / "out_population.csv"
        assert series.exists()
        rows = list(csv.reader(series.open()))
        assert rows[0] == ["t", "population", "norm", "discarded_weight"]
        assert len(rows) > 100

    def test_config_error_exit_code(self, tmp_path):
        cfg = self._write(tmp_path, "nonsense_key = 1\n")
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2

    def test_sweep_subcommand_and_overrides(self, tmp_path):
        cfg = self._write(tmp_path, FAST_SWEEP)
        out = str(tmp_path / "sweep.csv")
        assert main(["sweep", "--config", cfg, "--out", out, "--workers", "1",
                     "--svd-threshold", "1e-6"]) == 0
        rec = read_records(out)[0]
        assert rec["svd_threshold"] == pytest.approx(1e-6)

    def test_baseline_then_provided(self, tmp_path):
        cfg_text = FAST_RUN.replace("baseline_mode = auto", "baseline_mode = none") \
                           .replace("outputs = correlations,probabilities,normalized",
                                    "outputs = correlations,probabilities")
        cfg = self._write(tmp_path, cfg_text)
        base_out = str(tmp_path / "base.csv")
        assert main(["baseline", "--config", cfg, "--out", base_out]) == 0

        cfg2 = self._write(tmp_path, FAST_RUN.replace(
            "baseline_mode = auto",
            f"baseline_mode = provided\nbaseline_csv = {base_out}"), "cfg2.txt")
        out = str(tmp_path / "run.csv")
        assert main(["run", "--config", cfg2, "--out", out]) == 0
        rec = read_records(out)[0]
        base_rec = read_records(base_out)[0]
        assert rec["pbar2"] == pytest.approx(rec["p2"] / base_rec["p2"], rel=1e-9)

    def test_oracle_subcommands(self, tmp_path):
        cfg = self._write(tmp_path, FAST_RUN)
        dde_out = str(tmp_path / "dde.csv")
        assert main(["oracle", "--kind", "dde", "--config", cfg,
                     "--out", dde_out, "--dt", "0.002"]) == 0
        rows = list(csv.reader(open(dde_out)))
        assert rows[0] == ["t", "population", "re_c", "im_c"]
        count_out = str(tmp_path / "count.csv")
        assert main(["oracle", "--kind", "counting", "--config", cfg,
                     "--out", count_out]) == 0
        rows = list(csv.reader(open(count_out)))
        assert rows[0] == ["n", "p"]
        assert len(rows) == 6  # n = 0..4

    def test_dump_operators(self, tmp_path):
        cfg = self._write(tmp_path, FAST_RUN)
        out = str(tmp_path / "out.csv")
        prefix = str(tmp_path / "ops_")
        assert main(["run", "--config", cfg, "--out", out,
                     "--dump-operators", prefix]) == 0
        for name in ("u0", "u1", "u2"):
            text = (tmp_path / f"ops_{name}.txt").read_text()
            assert text.startswith(f"# {name} dim=")

    def test_console_script_installed(self, tmp_path):
        cfg = self._write(tmp_path, FAST_RUN)
        out = str(tmp_path / "cli.csv")
        proc = subprocess.run([sys.executable, "-m", "mirrormps.cli", "run",
                               "--config", cfg, "--out", out],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
