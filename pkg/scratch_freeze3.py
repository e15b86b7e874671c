"""Composite preset: shallow uniform C_t for 1-4/6, deep C_t for 5/7."""
import math
import numpy as np
from scratch_zpoles import closed_loop_eigs
from resetloop import (LoopModel, TrackingParams, make_nrc, make_tracking_controller,
                       unity_stage, build_modal_plant, default_plant, lti, log_grid,
                       Scenario, SignalSpec, run_closed_loop, count_resets_per_period,
                       snap_frequency, measure_frf_sweep, closed_loop_bandwidth)
from resetloop.reset import base_linear
from resetloop.tuning import tune_cglp, make_shaping_filter, ShapingParams
from resetloop.hosidf import (open_loop_harmonics, crossover_from_harmonics,
                              complementary_harmonics)

TS = 30e-6
plant = build_modal_plant(default_plant())
_, c_d = make_nrc(1.0, 8.0, 1.0, 710.0)
UNITY = lti.constant(1.0)
GRID = log_grid(1.0, 8000.0, 200)

SHALLOW = dict(omega_i=10.0, n1=(1100.0, 1.05, 1.0))
DEEP = dict(omega_i=15.0, n1=(1000.0, 1.0571, 0.70))


def tracking(kp, omega_i, n1):
    return make_tracking_controller(
        TrackingParams(kp, omega_i, (n1, (2582.0, 40.0, 5.0)), 5000.0))


def linear_outer(kp, style):
    model = LoopModel(plant.tf, c_d, tracking(kp, **style), unity_stage(), UNITY, 1.0)
    _, outer = open_loop_harmonics(model, GRID, (1,))
    return crossover_from_harmonics(outer), model


def kp_bisect(style, pred):
    lo, hi = 0.03, 1.5
    for _ in range(50):
        mid = math.sqrt(lo * hi)
        m, _ = linear_outer(mid, style)
        lo, hi = (mid, hi) if pred(m) else (lo, mid)
    return math.sqrt(lo * hi)


def reset_case(phi, kp, style, shaping=None):
    mlin, _ = linear_outer(kp, style)
    d = tune_cglp(phi, mlin.omega_b_hz)
    cs = None
    if shaping is not None:
        cs, _ = make_shaping_filter(shaping, base_linear(d.reset_element()))
    return LoopModel(plant.tf, c_d, tracking(kp, **style),
                     d.reset_element(), d.lead_lag, d.k_c, cs), d


def report(tag, model):
    _, outer = open_loop_harmonics(model, GRID, (1,))
    m = crossover_from_harmonics(outer)
    t1 = complementary_harmonics(model, GRID, (1,)).order_gains(1)
    wc = closed_loop_bandwidth((GRID, t1))
    ez = closed_loop_eigs(model)[0]
    print(f"{tag}: wb={m.omega_b_hz:7.2f} PM={m.phase_margin_deg:6.2f} "
          f"GM={m.gain_margin_db:6.2f} wc={wc:7.2f} |z|={ez:.5f}")
    return m.omega_b_hz, wc, m


f80 = snap_frequency(80.0, TS)
band = np.array([80.0, 90.0, 100.0, 110.0, 125.0, 140.0, 160.0])

if __name__ == "__main__":
    kp1 = kp_bisect(SHALLOW, lambda m: m.phase_margin_deg > 60.3)
    m1res, model1 = linear_outer(kp1, SHALLOW)
    W1 = m1res.omega_b_hz
    print(f"case1 kp={kp1:.6f} wb={W1:.4f}")
    sw1 = measure_frf_sweep(Scenario(model1), band, "S_er")
    base_db = 20 * np.log10(np.abs(sw1.frf_arrays()[1]))

    # case4 target scan for the excess window
    for dt in (10.0, 11.0, 12.0):
        kp4 = kp_bisect(SHALLOW, lambda m: m.omega_b_hz < W1 + dt)
        m4, d4 = reset_case(15.0, kp4, SHALLOW)
        m6, _ = reset_case(15.0, kp4, SHALLOW, ShapingParams(200., 800., -0.4, 1.3))
        sw4 = measure_frf_sweep(Scenario(m4), band, "S_er")
        sw6 = measure_frf_sweep(Scenario(m6), band, "S_er")
        e4 = 20*np.log10(np.abs(sw4.frf_arrays()[1])) - base_db
        e6 = 20*np.log10(np.abs(sw6.frf_arrays()[1])) - base_db
        v4 = count_resets_per_period(run_closed_loop(
            Scenario(m4, reference=SignalSpec("sine", f80, 1.0))), f80)
        v6 = count_resets_per_period(run_closed_loop(
            Scenario(m6, reference=SignalSpec("sine", f80, 1.0))), f80)
        print(f"case4 W1+{dt}: kp={kp4:.6f} plain_max={e4.max():+.3f} shaped_max={e6.max():+.3f} "
              f"v4={v4.verdict}:{v4.per_period.max()} v6={v6.verdict}:{v6.per_period.max()}")

    # case5 slack scan with deep C_t
    for slack in (1.5, 2.0, 2.5):
        kp5 = kp_bisect(DEEP, lambda m: m.phase_margin_deg > 60.3 - 20.0 + slack)
        m5, d5 = reset_case(20.0, kp5, DEEP)
        m7, _ = reset_case(20.0, kp5, DEEP, ShapingParams(200., 800., -0.9, 1.15))
        wb5, wc5, mm5 = report(f"case5 slack={slack} kp={kp5:.6f}", m5)
        v5 = count_resets_per_period(run_closed_loop(
            Scenario(m5, reference=SignalSpec("sine", f80, 1.0))), f80)
        v7 = count_resets_per_period(run_closed_loop(
            Scenario(m7, reference=SignalSpec("sine", f80, 1.0))), f80)
        print(f"   v5={v5.verdict}:{v5.per_period.max()} v7={v7.verdict}:{v7.per_period.max()}")
