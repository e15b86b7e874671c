import math
from pathlib import Path

import numpy as np
import pytest

from resetloop import cases, cli, plot
from resetloop.cases import (
    CaseConfig,
    ConfigError,
    build_case,
    parse_config,
    parse_config_text,
    preset_path,
    run_case,
    serialize_config,
)

MINIMAL = """
name = "mini"

[plant]
kind = "modal"
dc_gain = 1.0
delay_s = 0.0
modes = [[710.0, 0.015, 1, 1.0]]

[tracking]
kp = 0.2
omega_i_hz = 10.0
notches = [[1100.0, 1.05, 1.0]]
omega_lpf_hz = 5000.0
"""


class TestConfigParsing:
    def test_minimal_config(self):
        cfg = parse_config_text(MINIMAL)
        assert cfg.name == "mini"
        assert cfg.cglp is None
        assert cfg.plant.modes[0][0] == 710.0

    def test_empty_config_rejected(self, tmp_path):
        path = tmp_path / "empty.toml"
        path.write_text("")
        with pytest.raises(ConfigError, match="empty"):
            parse_config(path)

    def test_missing_tracking_rejected(self):
        with pytest.raises(ConfigError, match="tracking"):
            parse_config_text('[plant]\nkind = "modal"\nmodes = [[1.0, 0.1]]\n')

    def test_bad_field_path_in_message(self):
        bad = MINIMAL.replace("[[710.0, 0.015, 1, 1.0]]", "[[710.0, -0.5, 1, 1.0]]")
        with pytest.raises(ConfigError, match=r"plant\.modes\[0\]\[1\]"):
            parse_config_text(bad)

    def test_shaping_requires_cglp(self):
        bad = MINIMAL + "\n[shaping]\nomega_low_hz = 200.0\nomega_high_hz = 800.0\nlam = -0.4\nq = 1.3\n"
        with pytest.raises(ConfigError, match="cglp"):
            parse_config_text(bad)

    def test_cglp_needs_corners_or_goal(self):
        bad = MINIMAL + "\n[cglp]\ngamma_r = 0.0\n"
        with pytest.raises(ConfigError, match="omega_l_hz"):
            parse_config_text(bad)

    def test_roundtrip_semantics(self, preset_configs):
        for cfg in preset_configs.values():
            text = serialize_config(cfg)
            again = parse_config_text(text, name=cfg.name)
            assert again == cfg

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            parse_config("/nonexistent/case.toml")


class TestPresets:
    def test_all_presets_build(self, preset_cases):
        for i, case in preset_cases.items():
            assert case.model.k_c > 0
            has_reset = i >= 2
            assert (case.design is not None) == has_reset
            assert (case.model.c_s is not None) == (i in (6, 7))

    def test_preset_lookup(self):
        assert preset_path("case3").exists()
        with pytest.raises(ConfigError):
            preset_path("case99")

    def test_frozen_corners_match_retuning(self, preset_configs):
        # the stored corner values are what tune_cglp produces for the
        # stored goal (guards against preset drift)
        from resetloop.tuning import tune_cglp

        cfg = preset_configs[4].cglp
        d = tune_cglp(cfg.phi_l_deg, cfg.omega_target_hz, cfg.gamma_r)
        assert d.pfore.omega_l_hz == pytest.approx(cfg.omega_l_hz, rel=1e-5)
        assert d.pfore.omega_f_hz == pytest.approx(cfg.omega_f_hz, rel=1e-5)


class TestRunCase:
    def test_margins_command(self, tmp_path, capsys):
        code = run_case("case1", "margins", out_dir=tmp_path)
        assert code == 0
        summary = (tmp_path / "case1" / "margins" / "summary.csv").read_text()
        rows = dict(line.split(",") for line in summary.strip().splitlines()[1:])
        assert float(rows["phase_margin_deg"]) >= 60.0
        assert float(rows["gain_margin_db"]) >= 6.0
        assert (tmp_path / "case1" / "margins" / "open_loop_frf.csv").exists()

    def test_simulate_command_writes_trace(self, tmp_path):
        code = run_case("case7", "simulate", out_dir=tmp_path, freq_hz=80.0)
        assert code == 0
        dest = tmp_path / "case7" / "simulate"
        assert (dest / "trace.csv").exists()
        assert (dest / "reset_log.txt").exists()
        rows = dict(line.split(",") for line in
                    (dest / "summary.csv").read_text().strip().splitlines()[1:])
        assert rows["verdict"] == "NOMINAL"

    def test_simulate_case5_multiple(self, tmp_path):
        code = run_case("case5", "simulate", out_dir=tmp_path, freq_hz=80.0)
        assert code == 0
        rows = dict(line.split(",") for line in
                    (tmp_path / "case5" / "simulate" / "summary.csv")
                    .read_text().strip().splitlines()[1:])
        assert rows["verdict"] == "MULTIPLE"

    def test_hosidf_command(self, tmp_path):
        grid = cases.GridSpec(10.0, 1000.0, 20)
        code = run_case("case4", "hosidf", out_dir=tmp_path, grid=grid,
                        harmonics=(1, 3))
        assert code == 0
        dest = tmp_path / "case4" / "hosidf"
        for name in ("cglp_hosidf.csv", "open_loop_dual.csv", "open_loop_outer.csv",
                     "sensitivity.csv", "complementary.csv"):
            assert (dest / name).exists()

    def test_tune_command(self, tmp_path):
        code = run_case("case2", "tune", out_dir=tmp_path)
        assert code == 0
        frag = (tmp_path / "case2" / "tune" / "design.toml").read_text()
        assert "[cglp]" in frag and "omega_l_hz" in frag

    def test_unknown_command(self, tmp_path):
        assert run_case("case1", "frobnicate", out_dir=tmp_path) == 2

    def test_bad_config_is_exit_2(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("")
        assert run_case(bad, "margins", out_dir=tmp_path) == 2


class TestCli:
    def test_margins_via_main(self, tmp_path, capsys):
        code = cli.main(["margins", "--config", "case1", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "omega_b_hz" in out

    def test_grid_flag_parsing(self):
        parser = cli.build_parser()
        args = parser.parse_args(["hosidf", "--config", "case1", "--grid", "1:4000:30"])
        assert args.grid == cases.GridSpec(1.0, 4000.0, 30)

    def test_harmonics_flag(self):
        parser = cli.build_parser()
        args = parser.parse_args(["hosidf", "--config", "case1", "--harmonics", "1,3,5"])
        assert args.harmonics == (1, 3, 5)
        with pytest.raises(SystemExit):
            parser.parse_args(["hosidf", "--config", "case1", "--harmonics", "2,4"])

    def test_seed_and_freq_flags(self):
        parser = cli.build_parser()
        args = parser.parse_args(["simulate", "--config", "case5", "--freq", "80",
                                  "--seed", "9"])
        assert args.freq == 80.0 and args.seed == 9


class TestEmitPlotData:
    def test_bode_row_count(self, tmp_path):
        run_case("case1", "margins", out_dir=tmp_path)
        artifact = tmp_path / "case1" / "margins" / "open_loop_frf.csv"
        written = plot.emit_plot_data(artifact, "bode", tmp_path / "plots")
        dat = next(p for p in written if p.suffix == ".dat")
        n_art = len(artifact.read_text().strip().splitlines()) - 1
        n_dat = len([l for l in dat.read_text().splitlines() if not l.startswith("#")])
        assert n_dat == n_art
        assert any(p.suffix == ".svg" for p in written)

    def test_trace_markers_equal_log_length(self, tmp_path):
        run_case("case5", "simulate", out_dir=tmp_path, freq_hz=80.0)
        dest = tmp_path / "case5" / "simulate"
        written = plot.emit_plot_data(dest / "trace.csv", "trace", tmp_path / "plots")
        dat = next(p for p in written if p.suffix == ".dat")
        flags = [line.split()[-1] for line in dat.read_text().splitlines()
                 if line and not line.startswith("#")]
        n_markers = sum(v == "1" for v in flags)
        n_logged = len((dest / "reset_log.txt").read_text().split())
        assert n_markers == n_logged > 0

    def test_sensitivity_overlay_series_count(self, tmp_path):
        for name in ("case1", "case4", "case6"):
            run_case(name, "margins", out_dir=tmp_path)
        artifacts = [tmp_path / n / "margins" / "open_loop_frf.csv"
                     for n in ("case1", "case4", "case6")]
        written = plot.emit_plot_data(artifacts, "sensitivity", tmp_path / "plots")
        dat = next(p for p in written if p.suffix == ".dat")
        series = [l for l in dat.read_text().splitlines() if l.startswith("# series")]
        assert len(series) == 3

    def test_kind_mismatch_rejected(self, tmp_path):
        bogus = tmp_path / "x.csv"
        bogus.write_text("a,b\n1,2\n")
        with pytest.raises(plot.ArtifactError, match="not a bode artifact"):
            plot.emit_plot_data(bogus, "bode", tmp_path)

    def test_missing_artifact(self, tmp_path):
        with pytest.raises(plot.ArtifactError, match="not found"):
            plot.emit_plot_data(tmp_path / "nope.csv", "trace", tmp_path)
