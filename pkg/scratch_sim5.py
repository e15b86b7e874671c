"""Matrix: weights/delay/spacing -> stability, margins, cure, band excess."""
import math
import sys
import numpy as np
from resetloop import (
    LoopModel, TrackingParams, make_nrc, make_tracking_controller, unity_stage,
    build_modal_plant, lti, log_grid, closed_loop_bandwidth, ModalPlant, Mode,
    Scenario, SignalSpec, run_closed_loop, count_resets_per_period, snap_frequency,
    measure_frf_sweep,
)
from resetloop.reset import base_linear
from resetloop.tuning import tune_cglp, make_shaping_filter, ShapingParams
from resetloop.hosidf import (
    open_loop_harmonics, crossover_from_harmonics, complementary_harmonics,
    sensitivity_harmonics,
)

TS = 30e-6


def build_cases(delay, w2, w3, ratios, lpf=5000.0, verbose=True):
    plant = build_modal_plant(ModalPlant(1.0, (
        Mode(710.0, 0.015, weight=1.0), Mode(1150.0, 0.015, weight=w2),
        Mode(2582.0, 0.015, weight=w3)), delay))
    _, c_d = make_nrc(1.0, 8.0, 1.0, 710.0)
    UNITY = lti.constant(1.0)
    GRID = log_grid(1.0, 8000.0, 200)

    def tracking(kp, omega_i, n1):
        return make_tracking_controller(
            TrackingParams(kp, omega_i, (n1, (2582.0, 40.0, 5.0)), lpf))

    def linear_outer(kp, omega_i, n1):
        model = LoopModel(plant.tf, c_d, tracking(kp, omega_i, n1), unity_stage(), UNITY, 1.0)
        _, outer = open_loop_harmonics(model, GRID, (1,))
        return crossover_from_harmonics(outer), model

    def kp_for_pm(target_pm, omega_i, n1):
        lo, hi = 0.03, 1.5
        for _ in range(50):
            mid = math.sqrt(lo * hi)
            m, _ = linear_outer(mid, omega_i, n1)
            if m.phase_margin_deg > target_pm:
                lo = mid
            else:
                hi = mid
        return math.sqrt(lo * hi)

    def kp_for_wb(target, omega_i, n1):
        lo, hi = 0.03, 1.5
        for _ in range(50):
            mid = math.sqrt(lo * hi)
            m, _ = linear_outer(mid, omega_i, n1)
            if m.omega_b_hz < target:
                lo = mid
            else:
                hi = mid
        return math.sqrt(lo * hi)

    N1 = {1: (1100.0, 1.05, 1.0), 2: (1100.0, 0.968, 0.8),
          3: (1050.0, 1.0125, 0.75), 4: (1000.0, 1.0571, 0.70), 5: (1000.0, 1.0571, 0.70)}
    OMI = {1: 10.0, 2: 10.0, 3: 15.0, 4: 15.0, 5: 15.0}
    PHI = {2: 5.0, 3: 10.0, 4: 15.0, 5: 20.0}

    kp1 = kp_for_pm(60.3, OMI[1], N1[1])
    m1, model1 = linear_outer(kp1, OMI[1], N1[1])
    w1 = m1.omega_b_hz
    models, cglps, kps = {1: model1}, {}, {1: kp1}
    for i, r in zip((2, 3, 4, 5), ratios):
        kp = kp_for_wb(w1 * r, OMI[i], N1[i])
        mlin, _ = linear_outer(kp, OMI[i], N1[i])
        cglp = tune_cglp(PHI[i], mlin.omega_b_hz)
        models[i] = LoopModel(plant.tf, c_d, tracking(kp, OMI[i], N1[i]),
                              cglp.reset_element(), cglp.lead_lag, cglp.k_c)
        cglps[i], kps[i] = cglp, kp
    cs6, _ = make_shaping_filter(ShapingParams(200.0, 800.0, -0.4, 1.3),
                                 base_linear(cglps[4].reset_element()))
    cs7, _ = make_shaping_filter(ShapingParams(200.0, 800.0, -0.9, 1.15),
                                 base_linear(cglps[5].reset_element()))
    models[6] = LoopModel(plant.tf, c_d, models[4].c_t, models[4].reset,
                          models[4].c_l, models[4].k_c, cs6)
    models[7] = LoopModel(plant.tf, c_d, models[5].c_t, models[5].reset,
                          models[5].c_l, models[5].k_c, cs7)
    return models, cglps, kps, GRID


def evaluate(models, GRID, band=None):
    out = {}
    for i in sorted(models):
        _, outer = open_loop_harmonics(models[i], GRID, (1,))
        m = crossover_from_harmonics(outer)
        t1 = complementary_harmonics(models[i], GRID, (1,)).order_gains(1)
        wc = closed_loop_bandwidth((GRID, t1))
        out[i] = dict(wb=m.omega_b_hz, pm=m.phase_margin_deg, gm=m.gain_margin_db, wc=wc)
    f80 = snap_frequency(80.0, TS)
    for i in (4, 5, 6, 7):
        try:
            tr = run_closed_loop(Scenario(models[i], reference=SignalSpec("sine", f80, 1.0)))
            c = count_resets_per_period(tr, f80)
            out[i]["v80"] = f"{c.verdict}:{c.per_period.max()}"
        except Exception as err:
            out[i]["v80"] = f"DIVERGED"
    if band is not None:
        sw = {}
        for i in (1, 4, 5, 6, 7):
            s = measure_frf_sweep(Scenario(models[i]), band, "S_er")
            f, h = s.frf_arrays()
            sw[i] = 20 * np.log10(np.abs(h)) if len(h) == len(band) else None
        for i in (4, 5, 6, 7):
            out[i]["excess"] = None if (sw[i] is None or sw[1] is None) else np.round(sw[i] - sw[1], 2)
    return out


if __name__ == "__main__":
    delay = float(sys.argv[1]) if len(sys.argv) > 1 else 150e-6
    w2 = float(sys.argv[2]) if len(sys.argv) > 2 else 0.5
    w3 = float(sys.argv[3]) if len(sys.argv) > 3 else 0.1
    ratios = (1.047, 1.088, 1.165, 1.24)
    models, cglps, kps, GRID = build_cases(delay, w2, w3, ratios)
    band = np.array([80, 90, 100, 110, 125, 140, 160], dtype=float)
    res = evaluate(models, GRID, band)
    print(f"delay={delay*1e6:.0f}us w2={w2} w3={w3}")
    for i in sorted(res):
        r = res[i]
        line = (f"case{i}: wb={r['wb']:7.2f} PM={r['pm']:6.2f} GM={r['gm']:6.2f} "
                f"wc={r['wc']:7.2f} {r.get('v80','')}")
        print(line)
        if r.get("excess") is not None:
            print(f"        excess vs case1: {r['excess']}")
