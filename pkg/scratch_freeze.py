"""Finalize case presets: compute kp ladder, verify all criteria, print frozen numbers."""
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
plant = build_modal_plant(default_plant())  # now 240us delay + weights in default
_, c_d = make_nrc(1.0, 8.0, 1.0, 710.0)
UNITY = lti.constant(1.0)
GRID = log_grid(1.0, 8000.0, 200)

TRACK = {
    1: (10.0, (1100.0, 1.05, 1.0)),
    2: (10.0, (1100.0, 0.968, 0.8)),
    3: (15.0, (1050.0, 1.0125, 0.75)),
    4: (15.0, (1000.0, 1.0571, 0.70)),
    5: (15.0, (1000.0, 1.0571, 0.70)),
}
PHI = {2: 5.0, 3: 10.0, 4: 15.0, 5: 20.0}
SLACK = {2: 1.0, 3: 3.0, 4: 5.7, 5: 5.0}
SHAPE = {6: (4, ShapingParams(200.0, 800.0, -0.4, 1.3)),
         7: (5, ShapingParams(200.0, 800.0, -0.9, 1.15))}


def tracking(i, kp):
    omega_i, n1 = TRACK[i]
    return make_tracking_controller(TrackingParams(kp, omega_i, (n1, (2582., 40., 5.)), 5000.))


def linear_outer(i, kp):
    model = LoopModel(plant.tf, c_d, tracking(i, kp), unity_stage(), UNITY, 1.0)
    _, outer = open_loop_harmonics(model, GRID, (1,))
    return crossover_from_harmonics(outer), model


def kp_for_pm(i, target_pm):
    lo, hi = 0.03, 1.5
    for _ in range(50):
        mid = math.sqrt(lo * hi)
        m, _ = linear_outer(i, mid)
        lo, hi = (mid, hi) if m.phase_margin_deg > target_pm else (lo, mid)
    return math.sqrt(lo * hi)


kp = {1: kp_for_pm(1, 60.3)}
mlin = {}
models = {}
cglp = {}
m1, models[1] = linear_outer(1, kp[1])
mlin[1] = m1
for i in (2, 3, 4, 5):
    kp[i] = kp_for_pm(i, 60.3 - PHI[i] + SLACK[i])
    mres, _ = linear_outer(i, kp[i])
    mlin[i] = mres
    cglp[i] = tune_cglp(PHI[i], mres.omega_b_hz)
    models[i] = LoopModel(plant.tf, c_d, tracking(i, kp[i]),
                          cglp[i].reset_element(), cglp[i].lead_lag, cglp[i].k_c)
for i, (src, sp) in SHAPE.items():
    cs, rep = make_shaping_filter(sp, base_linear(cglp[src].reset_element()))
    models[i] = LoopModel(plant.tf, c_d, models[src].c_t, models[src].reset,
                          models[src].c_l, models[src].k_c, cs)

print("== frozen numbers")
for i in (1, 2, 3, 4, 5):
    extra = ""
    if i in cglp:
        d = cglp[i]
        extra = (f" | cglp: target={d.omega_target_hz:.4f} wl={d.pfore.omega_l_hz:.4f} "
                 f"wf={d.pfore.omega_f_hz:.4f} wr={d.pfore.omega_r_hz:.6f} kc={d.k_c:.6f}")
    print(f"case{i}: kp={kp[i]:.6f}{extra}")

print("\n== verification")
wbs, wcs = {}, {}
for i in sorted(models):
    _, outer = open_loop_harmonics(models[i], GRID, (1,))
    m = crossover_from_harmonics(outer)
    t1 = complementary_harmonics(models[i], GRID, (1,)).order_gains(1)
    wc = closed_loop_bandwidth((GRID, t1))
    ez = closed_loop_eigs(models[i])[0]
    wbs[i], wcs[i] = m.omega_b_hz, wc
    print(f"case{i}: wb={m.omega_b_hz:7.2f} PM={m.phase_margin_deg:6.2f} "
          f"GM={m.gain_margin_db:6.2f} wc={wc:7.2f} max|z|={ez:.5f}")
print("wb ladder increasing:", all(wbs[i] < wbs[i+1] for i in (1,2,3,4)))
print("wc ladder increasing:", all(wcs[i] < wcs[i+1] for i in (1,2,3,4)))

f80 = snap_frequency(80.0, TS)
for i in (4, 5, 6, 7):
    tr = run_closed_loop(Scenario(models[i], reference=SignalSpec("sine", f80, 1.0)))
    v = count_resets_per_period(tr, f80)
    print(f"case{i} @80Hz: {v.verdict} max={v.per_period.max()}")

band = np.array([80., 90., 100., 110., 125., 140., 160.])
sw = {}
for i in (1, 4, 6):
    s = measure_frf_sweep(Scenario(models[i]), band, "S_er")
    sw[i] = 20 * np.log10(np.abs(s.frf_arrays()[1]))
print("case4 excess:", np.round(sw[4] - sw[1], 3), "max", (sw[4]-sw[1]).max())
print("case6 excess:", np.round(sw[6] - sw[1], 3), "max", (sw[6]-sw[1]).max())
