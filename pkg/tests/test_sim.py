import math
from dataclasses import replace

import numpy as np
import pytest

from resetloop import lti
from resetloop.hosidf import LoopModel, sensitivity_harmonics
from resetloop.reset import unity_stage
from resetloop.sim import (
    NoiseSpec,
    Scenario,
    SignalSpec,
    SimTrace,
    count_resets_per_period,
    gaussian_noise,
    measure_frf_sweep,
    reference_signal,
    rms_error,
    run_closed_loop,
    snap_frequency,
    steady_state_harmonics,
    write_reset_log,
    write_trace_csv,
)

TS = 30e-6


def trivial_model(plant_gain=1.0, c_d_gain=0.0):
    return LoopModel(
        lti.constant(plant_gain), lti.constant(c_d_gain), lti.constant(1.0),
        unity_stage(), lti.constant(1.0), 1.0,
    )


class TestReferenceSignal:
    def test_sine_starts_at_zero(self):
        assert reference_signal("sine", 10.0, 2.0, 0.0) == 0.0

    def test_triangle_quarter_period_peak(self):
        f0 = 50.0
        assert reference_signal("triangle", f0, 3.0, 0.25 / f0) == pytest.approx(3.0)
        assert reference_signal("triangle", f0, 3.0, 0.0) == pytest.approx(0.0, abs=1e-12)
        # rising at t=0
        assert reference_signal("triangle", f0, 3.0, 1e-4) > 0

    def test_step(self):
        assert reference_signal("step", 0.0, 2.0, -1e-9) == 0.0
        assert reference_signal("step", 0.0, 2.0, 0.0) == 2.0

    def test_triangle_fourier_ratios(self):
        # triangle series: harmonic amplitudes fall as 1/n^2
        spp = 1000
        t = np.arange(8 * spp) * TS
        f0 = 1.0 / (spp * TS)
        x = reference_signal("triangle", f0, 1.0, t)
        m = np.arange(x.size)
        amps = [abs(2.0 / x.size * np.sum(x * np.exp(-2j * math.pi * n * m / spp)))
                for n in (1, 3, 5)]
        assert amps[1] / amps[0] == pytest.approx(1.0 / 9.0, rel=1e-3)
        assert amps[2] / amps[0] == pytest.approx(1.0 / 25.0, rel=1e-3)

    def test_chirp_needs_endpoint(self):
        with pytest.raises(ValueError):
            reference_signal("chirp", 1.0, 1.0, 0.5)


class TestNoise:
    def test_deterministic_and_scaled(self):
        a = gaussian_noise(123, 4096, 2.0)
        b = gaussian_noise(123, 4096, 2.0)
        assert np.array_equal(a, b)
        assert np.std(a) == pytest.approx(2.0, rel=0.05)

    def test_seed_changes_stream(self):
        assert not np.array_equal(gaussian_noise(1, 64, 1.0), gaussian_noise(2, 64, 1.0))


class TestRunClosedLoop:
    def test_zero_input_stays_zero(self):
        sc = Scenario(trivial_model(), t_s=TS, duration_s=0.01,
                      reference=SignalSpec("step", 0.0, 0.0))
        trace = run_closed_loop(sc)
        for name in ("r", "e", "e_s", "u_r", "u", "x", "y"):
            assert np.all(getattr(trace, name) == 0.0)

    def test_determinism_bit_identical(self, preset_models):
        f0 = snap_frequency(80.0, TS)
        sc = Scenario(preset_models[7], reference=SignalSpec("sine", f0, 1.0),
                      noise=NoiseSpec(1e-4), seed=77)
        a = run_closed_loop(sc)
        b = run_closed_loop(sc)
        assert np.array_equal(a.y, b.y)
        assert np.array_equal(a.reset_indices, b.reset_indices)
        assert a.scenario_hash == b.scenario_hash

    def test_output_is_plant_plus_noise(self, preset_models):
        f0 = snap_frequency(50.0, TS)
        sc = Scenario(preset_models[1], reference=SignalSpec("sine", f0, 1.0),
                      noise=NoiseSpec(1e-3), seed=3)
        trace = run_closed_loop(sc)
        noise = gaussian_noise(3, trace.n_samples, 1e-3)
        assert np.allclose(trace.y, trace.x + noise)

    def test_duration_validation(self):
        with pytest.raises(ValueError, match="settle"):
            Scenario(trivial_model(), duration_s=0.01,
                     reference=SignalSpec("sine", 100.0, 1.0), settle_periods=10)

    def test_aperiodic_needs_duration(self):
        with pytest.raises(ValueError, match="duration"):
            Scenario(trivial_model(), reference=SignalSpec("step", 0.0, 1.0))


class TestHarmonics:
    def test_pure_sine_single_bin(self):
        model = trivial_model()
        spp = 200
        f0 = 1.0 / (spp * TS)
        sc = Scenario(model, reference=SignalSpec("sine", f0, 2.5), settle_periods=2,
                      analysis_periods=4)
        trace = run_closed_loop(sc)
        h = steady_state_harmonics(trace, "r", f0, 5)
        assert abs(h[0]) == pytest.approx(2.5, rel=1e-10)
        assert all(abs(v) < 1e-10 * 2.5 for v in h[1:])

    def test_non_integer_period_rejected(self):
        model = trivial_model()
        spp = 200
        f0 = 1.0 / (spp * TS)
        sc = Scenario(model, reference=SignalSpec("sine", f0, 1.0), settle_periods=2)
        trace = run_closed_loop(sc)
        with pytest.raises(ValueError, match="snap"):
            steady_state_harmonics(trace, "r", f0 * 1.01, 3)

    def test_triangle_reference_ratios_through_trace(self):
        model = trivial_model()
        spp = 500
        f0 = 1.0 / (spp * TS)
        sc = Scenario(model, reference=SignalSpec("triangle", f0, 1.0), settle_periods=2)
        trace = run_closed_loop(sc)
        h = steady_state_harmonics(trace, "r", f0, 5)
        assert abs(h[2]) / abs(h[0]) == pytest.approx(1 / 9, rel=1e-3)
        assert abs(h[4]) / abs(h[0]) == pytest.approx(1 / 25, rel=1e-3)


class TestResetCensus:
    def test_clegg_like_element_nominal(self, preset_models):
        f0 = snap_frequency(120.0, TS)
        sc = Scenario(preset_models[4], reference=SignalSpec("sine", f0, 1.0))
        census = count_resets_per_period(run_closed_loop(sc), f0)
        assert census.verdict == "NOMINAL"
        assert np.all(census.per_period == 2)

    def test_gamma_one_quiescent(self):
        # identity jump: surface condition never satisfied, zero resets
        from resetloop.reset import ResetElement, make_gfore
        el = make_gfore(100.0, 100.0, 0.0)
        ident = ResetElement(el.a_r, el.b_r, el.c_r, el.d_r, np.array([[1.0]]))
        model = LoopModel(lti.lowpass(500.0), lti.constant(0.0), lti.constant(1.0),
                          ident, lti.constant(1.0), 1.0)
        f0 = snap_frequency(100.0, TS)
        sc = Scenario(model, reference=SignalSpec("sine", f0, 1.0))
        census = count_resets_per_period(run_closed_loop(sc), f0)
        assert census.verdict == "QUIESCENT"
        assert np.all(census.per_period == 0)

    def test_multiple_verdict(self, preset_models):
        f0 = snap_frequency(80.0, TS)
        sc = Scenario(preset_models[5], reference=SignalSpec("sine", f0, 1.0))
        census = count_resets_per_period(run_closed_loop(sc), f0)
        assert census.verdict == "MULTIPLE"


class TestRmsError:
    def test_perfect_tracking_is_zero(self):
        trace = SimTrace(
            t_s=TS, r=np.ones(100), e=np.zeros(100), e_r=np.zeros(100),
            e_s=np.zeros(100), u_r=np.zeros(100), u=np.zeros(100),
            x=np.ones(100), y=np.ones(100), reset_indices=np.array([], dtype=int),
        )
        assert rms_error(trace) == 0.0

    def test_sine_error_rms(self):
        n = 10000
        t = np.arange(n) * TS
        e = 2.0 * np.sin(2 * math.pi * 100.0 * t)
        trace = SimTrace(
            t_s=TS, r=e.copy(), e=e, e_r=e, e_s=e, u_r=np.zeros(n), u=np.zeros(n),
            x=np.zeros(n), y=np.zeros(n), reset_indices=np.array([], dtype=int),
        )
        assert rms_error(trace) == pytest.approx(2.0 / math.sqrt(2.0), rel=1e-3)

    def test_delay_compensation(self):
        n = 3000
        spp = 300
        f0 = 1.0 / (spp * TS)
        t = np.arange(n) * TS
        r = np.sin(2 * math.pi * f0 * t)
        y = np.roll(r, 5)  # output lags the reference by 5 samples
        trace = SimTrace(
            t_s=TS, r=r, e=r - y, e_r=r - y, e_s=r - y, u_r=np.zeros(n),
            u=np.zeros(n), x=y, y=y, reset_indices=np.array([], dtype=int),
            f0_hz=f0, settle_periods=2,
        )
        assert rms_error(trace, delay_compensation=5) < 1e-12
        assert rms_error(trace) > 0.01


class TestSweep:
    def test_trivial_loop_half_gain(self):
        # G = 1, unity tracking, no damping: T = G/(1+G) = 0.5
        model = trivial_model()
        result = measure_frf_sweep(
            Scenario(model, settle_periods=2, analysis_periods=2),
            [20.0, 60.0], "T_yr")
        for p in result.points:
            assert abs(p.response) == pytest.approx(0.5, abs=2e-3)

    def test_linear_case_matches_analytic(self, preset_models):
        # swept S_er vs 1/(1+L) with the one-sample computation delay
        # folded into the loop model (it is part of the simulated physics)
        model = preset_models[1]
        aug = LoopModel(model.plant.with_delay(model.plant.delay + TS),
                        model.c_d, model.c_t, model.reset, model.c_l, model.k_c)
        freqs = np.array([20.0, 50.0, 120.0, 250.0, 400.0])
        result = measure_frf_sweep(Scenario(model), freqs, "S_er")
        f, h = result.frf_arrays()
        pred = sensitivity_harmonics(aug, f, (1,)).order_gains(1)
        err_db = np.abs(20 * np.log10(np.abs(h) / np.abs(pred)))
        err_deg = np.abs(np.angle(h / pred, deg=True))
        assert err_db.max() <= 0.5
        assert err_deg.max() <= 3.0

    def test_sweep_prediction_agreement_where_nominal(self, preset_models):
        # reset case: swept fundamental vs describing-function prediction
        # within 1 dB / 5 deg at NOMINAL points
        model = preset_models[4]
        aug = LoopModel(model.plant.with_delay(model.plant.delay + TS),
                        model.c_d, model.c_t, model.reset, model.c_l, model.k_c)
        freqs = np.array([150.0, 220.0, 300.0, 420.0])
        result = measure_frf_sweep(Scenario(model), freqs, "S_er")
        f, h = result.frf_arrays()
        pred = sensitivity_harmonics(aug, f, (1,)).order_gains(1)
        for i, verdict in enumerate(result.verdicts):
            if verdict != "NOMINAL":
                continue
            assert abs(20 * math.log10(abs(h[i]) / abs(pred[i]))) <= 1.0
            assert abs(np.angle(h[i] / pred[i], deg=True)) <= 5.0

    def test_failed_points_recorded(self):
        # an unstable trivial loop diverges; the sweep keeps going
        model = trivial_model(plant_gain=3.0, c_d_gain=0.0)
        unstable = LoopModel(lti.constant(3.0), lti.constant(0.0), lti.constant(1.0),
                             unity_stage(), lti.constant(1.0), 1.0)
        result = measure_frf_sweep(Scenario(unstable, settle_periods=2,
                                            analysis_periods=2),
                                   [50.0, 100.0], "S_er")
        assert len(result.failures) == 2
        assert len(result.points) == 0


class TestExports:
    def test_trace_csv_format(self, tmp_path):
        sc = Scenario(trivial_model(), t_s=TS, duration_s=0.003,
                      reference=SignalSpec("step", 0.0, 1.0))
        trace = run_closed_loop(sc)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# t_s=")
        assert lines[1] == "t,r,e,e_s,u_r,u,x,y,reset_flag"
        assert len(lines) == 2 + trace.n_samples

    def test_reset_log(self, tmp_path, preset_models):
        f0 = snap_frequency(80.0, TS)
        sc = Scenario(preset_models[5], reference=SignalSpec("sine", f0, 1.0))
        trace = run_closed_loop(sc)
        path = tmp_path / "resets.txt"
        write_reset_log(trace, path)
        idx = [int(v) for v in path.read_text().split()]
        assert idx == list(trace.reset_indices)
