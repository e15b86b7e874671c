"""FINAL preset freeze: derive, verify all acceptance-relevant behavior, emit numbers."""
import math
import numpy as np
from scratch_zpoles import closed_loop_eigs
from scratch_freeze3 import (kp_bisect, linear_outer, reset_case, report, tracking,
                             plant, c_d, GRID, f80, band, TS)
from resetloop import (LoopModel, Scenario, SignalSpec, run_closed_loop,
                       count_resets_per_period, measure_frf_sweep, closed_loop_bandwidth,
                       snap_frequency)
from resetloop.reset import base_linear
from resetloop.tuning import tune_cglp, make_shaping_filter, ShapingParams
from resetloop.hosidf import (open_loop_harmonics, crossover_from_harmonics,
                              complementary_harmonics)

MILD = dict(omega_i=10.0, n1=(1050.0, 1.05, 0.85))
DEEP = dict(omega_i=15.0, n1=(1000.0, 1.0571, 0.70))
PHI = {2: 5.0, 3: 10.0, 4: 15.0, 5: 20.0}
DT = {2: 5.0, 3: 9.0, 4: 13.0}

kp = {}
kp[1] = kp_bisect(MILD, lambda m: m.phase_margin_deg > 60.3)
m1res, model1 = linear_outer(kp[1], MILD)
W1 = m1res.omega_b_hz
models = {1: model1}
designs = {}
for i in (2, 3, 4):
    kp[i] = kp_bisect(MILD, lambda m: m.omega_b_hz < W1 + DT[i])
    models[i], designs[i] = reset_case(PHI[i], kp[i], MILD)
kp[5] = kp_bisect(DEEP, lambda m: m.phase_margin_deg > 60.3 - 20.0 + 2.5)
models[5], designs[5] = reset_case(20.0, kp[5], DEEP)
models[6], _ = reset_case(15.0, kp[4], MILD, ShapingParams(200.0, 800.0, -0.4, 1.3))
models[7], _ = reset_case(20.0, kp[5], DEEP, ShapingParams(200.0, 800.0, -0.9, 1.15))

print("== FROZEN PRESET NUMBERS")
print(f"case1: kp={kp[1]:.6f}  (mild C_t)")
for i in (2, 3, 4, 5):
    d = designs[i]
    style = "deep" if i == 5 else "mild"
    print(f"case{i}: kp={kp[i]:.6f} phi={PHI[i]} target={d.omega_target_hz:.4f} ({style})")
    print(f"        wl={d.pfore.omega_l_hz:.6f} wf={d.pfore.omega_f_hz:.6f} "
          f"wr={d.pfore.omega_r_hz:.6f} kc={d.k_c:.8f}")

print("\n== MARGINS / BANDWIDTHS / STABILITY")
wbs, wcs = {}, {}
for i in sorted(models):
    _, outer = open_loop_harmonics(models[i], GRID, (1,))
    m = crossover_from_harmonics(outer)
    t1 = complementary_harmonics(models[i], GRID, (1,)).order_gains(1)
    wc = closed_loop_bandwidth((GRID, t1))
    ez = closed_loop_eigs(models[i])[0]
    wbs[i], wcs[i] = m.omega_b_hz, wc
    ok = m.phase_margin_deg >= 60.0 and m.gain_margin_db >= 6.0 and ez < 1.0
    print(f"case{i}: wb={m.omega_b_hz:8.3f} PM={m.phase_margin_deg:6.2f} "
          f"GM={m.gain_margin_db:6.3f} wc={wc:8.3f} |z|={ez:.5f} {'ok' if ok else 'BAD'}")
print("wb ladder:", [round(wbs[i + 1] - wbs[i], 3) for i in (1, 2, 3, 4)])
print("wc ladder:", [round(wcs[i + 1] - wcs[i], 3) for i in (1, 2, 3, 4)])

print("\n== 80 Hz VERDICTS")
for i in (4, 5, 6, 7):
    tr = run_closed_loop(Scenario(models[i], reference=SignalSpec("sine", f80, 1.0)))
    v = count_resets_per_period(tr, f80)
    print(f"case{i}: {v.verdict} counts={v.per_period}")

print("\n== BAND SWEEPS")
sw = {}
for i in (1, 4, 6):
    s = measure_frf_sweep(Scenario(models[i]), band, "S_er")
    sw[i] = 20 * np.log10(np.abs(s.frf_arrays()[1]))
print("case4-case1:", np.round(sw[4] - sw[1], 3), "max", round((sw[4] - sw[1]).max(), 3))
print("case6-case1:", np.round(sw[6] - sw[1], 3), "max", round((sw[6] - sw[1]).max(), 3))

print("\n== RMS ORDERING SPOT CHECK (triangle)")
from resetloop import rms_error
for f in (20.0, 100.0, 300.0):
    fs = snap_frequency(f, TS)
    r1 = rms_error(run_closed_loop(Scenario(models[1], reference=SignalSpec("triangle", fs, 1.0))))
    r5 = rms_error(run_closed_loop(Scenario(models[5], reference=SignalSpec("triangle", fs, 1.0))))
    print(f"f={f}: rms case1={r1:.6f} case5={r5:.6f} ordered={r5 < r1}")
