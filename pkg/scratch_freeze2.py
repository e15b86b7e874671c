"""Final preset derivation: uniform C_t, wb-targeted ladder, full verification."""
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
PHI = {2: 5.0, 3: 10.0, 4: 15.0, 5: 20.0}
SHAPE = {6: (4, ShapingParams(200.0, 800.0, -0.4, 1.3)),
         7: (5, ShapingParams(200.0, 800.0, -0.9, 1.15))}


def tracking(kp):
    return make_tracking_controller(
        TrackingParams(kp, 10.0, ((1100.0, 1.05, 1.0), (2582.0, 40.0, 5.0)), 5000.0))


def linear_outer(kp):
    model = LoopModel(plant.tf, c_d, tracking(kp), unity_stage(), UNITY, 1.0)
    _, outer = open_loop_harmonics(model, GRID, (1,))
    return crossover_from_harmonics(outer), model


def kp_for_pm(target_pm):
    lo, hi = 0.03, 1.5
    for _ in range(50):
        mid = math.sqrt(lo * hi)
        m, _ = linear_outer(mid)
        lo, hi = (mid, hi) if m.phase_margin_deg > target_pm else (lo, mid)
    return math.sqrt(lo * hi)


def kp_for_wb(target):
    lo, hi = 0.03, 1.5
    for _ in range(50):
        mid = math.sqrt(lo * hi)
        m, _ = linear_outer(mid)
        lo, hi = (mid, hi) if m.omega_b_hz < target else (lo, mid)
    return math.sqrt(lo * hi)


kp = {1: kp_for_pm(60.3)}
m1, _ = linear_outer(kp[1])
W1 = m1.omega_b_hz
WTARGET = {2: W1 + 4.0, 3: W1 + 8.0, 4: W1 + 12.0, 5: 332.0}

models = {1: linear_outer(kp[1])[1]}
cglp = {}
for i in (2, 3, 4, 5):
    kp[i] = kp_for_wb(WTARGET[i])
    mlin, _ = linear_outer(kp[i])
    cglp[i] = tune_cglp(PHI[i], mlin.omega_b_hz)
    models[i] = LoopModel(plant.tf, c_d, tracking(kp[i]),
                          cglp[i].reset_element(), cglp[i].lead_lag, cglp[i].k_c)
for i, (src, sp) in SHAPE.items():
    cs, _ = make_shaping_filter(sp, base_linear(cglp[src].reset_element()))
    models[i] = LoopModel(plant.tf, c_d, models[src].c_t, models[src].reset,
                          models[src].c_l, models[src].k_c, cs)

print("== frozen numbers")
for i in (1, 2, 3, 4, 5):
    extra = ""
    if i in cglp:
        d = cglp[i]
        extra = (f" | target={d.omega_target_hz:.4f} wl={d.pfore.omega_l_hz:.4f} "
                 f"wf={d.pfore.omega_f_hz:.4f}")
    print(f"case{i}: kp={kp[i]:.6f}{extra}")

print("\n== verification")
wbs, wcs = {}, {}
ok = True
for i in sorted(models):
    _, outer = open_loop_harmonics(models[i], GRID, (1,))
    m = crossover_from_harmonics(outer)
    t1 = complementary_harmonics(models[i], GRID, (1,)).order_gains(1)
    wc = closed_loop_bandwidth((GRID, t1))
    ez = closed_loop_eigs(models[i])[0]
    wbs[i], wcs[i] = m.omega_b_hz, wc
    good = m.phase_margin_deg >= 60.0 and m.gain_margin_db >= 6.0 and ez < 1.0
    ok &= good
    print(f"case{i}: wb={m.omega_b_hz:7.2f} PM={m.phase_margin_deg:6.2f} "
          f"GM={m.gain_margin_db:6.2f} wc={wc:7.2f} max|z|={ez:.5f} {'ok' if good else 'BAD'}")
print("wb ladder:", all(wbs[i] < wbs[i + 1] for i in (1, 2, 3, 4)),
      " wc ladder:", all(wcs[i] < wcs[i + 1] for i in (1, 2, 3, 4)))

f80 = snap_frequency(80.0, TS)
for i in (4, 5, 6, 7):
    tr = run_closed_loop(Scenario(models[i], reference=SignalSpec("sine", f80, 1.0)))
    v = count_resets_per_period(tr, f80)
    print(f"case{i} @80Hz: {v.verdict} max={v.per_period.max()}")

band = np.array([80.0, 90.0, 100.0, 110.0, 125.0, 140.0, 160.0])
sw = {}
for i in (1, 4, 6):
    s = measure_frf_sweep(Scenario(models[i]), band, "S_er")
    sw[i] = 20 * np.log10(np.abs(s.frf_arrays()[1]))
ex4 = sw[4] - sw[1]
ex6 = sw[6] - sw[1]
print("case4 excess:", np.round(ex4, 3), "max", round(ex4.max(), 3))
print("case6 excess:", np.round(ex6, 3), "max", round(ex6.max(), 3))
