"""Slack scan at 240us: find a compliant window for the band-excess criterion."""
import math
import numpy as np
from scratch_zpoles import closed_loop_eigs
from resetloop import (LoopModel, TrackingParams, make_nrc, make_tracking_controller,
                       unity_stage, build_modal_plant, lti, log_grid, ModalPlant, Mode,
                       Scenario, SignalSpec, run_closed_loop, count_resets_per_period,
                       snap_frequency, measure_frf_sweep, closed_loop_bandwidth)
from resetloop.reset import base_linear
from resetloop.tuning import tune_cglp, make_shaping_filter, ShapingParams
from resetloop.hosidf import (open_loop_harmonics, crossover_from_harmonics,
                              complementary_harmonics)

TS = 30e-6
plant = build_modal_plant(ModalPlant(1.0, (Mode(710., .015, weight=1.),
                                           Mode(1150., .015, weight=.5),
                                           Mode(2582., .015, weight=.03)), 240e-6))
_, c_d = make_nrc(1.0, 8.0, 1.0, 710.0)
UNITY = lti.constant(1.0)
GRID = log_grid(1.0, 8000.0, 200)


def tracking(kp, omega_i, n1):
    return make_tracking_controller(TrackingParams(kp, omega_i, (n1, (2582., 40., 5.)), 5000.))


def linear_outer(kp, omega_i, n1):
    model = LoopModel(plant.tf, c_d, tracking(kp, omega_i, n1), unity_stage(), UNITY, 1.0)
    _, outer = open_loop_harmonics(model, GRID, (1,))
    return crossover_from_harmonics(outer), model


def kp_for_pm(target_pm, omega_i, n1):
    lo, hi = 0.03, 1.5
    for _ in range(50):
        mid = math.sqrt(lo * hi)
        m, _ = linear_outer(mid, omega_i, n1)
        lo, hi = (mid, hi) if m.phase_margin_deg > target_pm else (lo, mid)
    return math.sqrt(lo * hi)


def build(phi, omega_i, n1, slack, shaping=None):
    kp = kp_for_pm(60.3 - phi + slack, omega_i, n1)
    mlin, _ = linear_outer(kp, omega_i, n1)
    cglp = tune_cglp(phi, mlin.omega_b_hz)
    cs = None
    if shaping is not None:
        cs, _ = make_shaping_filter(shaping, base_linear(cglp.reset_element()))
    return LoopModel(plant.tf, c_d, tracking(kp, omega_i, n1),
                     cglp.reset_element(), cglp.lead_lag, cglp.k_c, cs), kp


N1_1 = (1100., 1.05, 1.0)
N1_45 = (1000., 1.0571, .70)
SH6 = ShapingParams(200., 800., -0.4, 1.3)
SH7 = ShapingParams(200., 800., -0.9, 1.15)
band = np.array([80., 90., 100., 110., 125., 140., 160.])

kp1 = kp_for_pm(60.3, 10., N1_1)
m1res, model1 = linear_outer(kp1, 10., N1_1)
sw1 = measure_frf_sweep(Scenario(model1), band, "S_er")
base_db = 20 * np.log10(np.abs(sw1.frf_arrays()[1]))
print(f"case1: kp={kp1:.4f} wb={m1res.omega_b_hz:.1f} PM={m1res.phase_margin_deg:.2f} GM={m1res.gain_margin_db:.2f}")

f80 = snap_frequency(80.0, TS)
for slack in (2.0, 3.0, 4.0, 5.0):
    for phi, n1, sh in ((15.0, N1_45, SH6), (20.0, N1_45, SH7)):
        m, kp = build(phi, 15.0, n1, slack)
        msh, _ = build(phi, 15.0, n1, slack, sh)
        ez = closed_loop_eigs(m)[0]
        _, outer = open_loop_harmonics(m, GRID, (1,))
        mm = crossover_from_harmonics(outer)
        tr = run_closed_loop(Scenario(m, reference=SignalSpec("sine", f80, 1.0)))
        v = count_resets_per_period(tr, f80)
        trs = run_closed_loop(Scenario(msh, reference=SignalSpec("sine", f80, 1.0)))
        vs = count_resets_per_period(trs, f80)
        sw = measure_frf_sweep(Scenario(m), band, "S_er")
        sws = measure_frf_sweep(Scenario(msh), band, "S_er")
        ex = 20 * np.log10(np.abs(sw.frf_arrays()[1])) - base_db
        exs = 20 * np.log10(np.abs(sws.frf_arrays()[1])) - base_db
        print(f"slack={slack} phi={phi}: kp={kp:.4f} wb={mm.omega_b_hz:6.1f} PM={mm.phase_margin_deg:5.2f} "
              f"GM={mm.gain_margin_db:5.2f} |z|={ez:.4f} plain={v.verdict}:{v.per_period.max()} "
              f"shaped={vs.verdict}:{vs.per_period.max()}")
        print(f"   excess plain : {np.round(ex, 2)}")
        print(f"   excess shaped: {np.round(exs, 2)}")
