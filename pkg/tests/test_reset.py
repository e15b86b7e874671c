import math

import numpy as np
import pytest

from resetloop import lti
from resetloop.lti import bilinear_discretize, eval_frf
from resetloop.reset import (
    PforeParams,
    ResetElement,
    SimulationDivergedError,
    base_linear,
    clegg,
    make_gfore,
    make_pfore,
    make_state,
    simulate_element,
    step_reset,
    unity_stage,
)

TS = 30e-6


class TestConstructors:
    def test_clegg_is_resetting_integrator(self):
        el = clegg()
        assert el.a_r[0, 0] == 0.0
        assert el.b_r[0] == pytest.approx(1.0)
        assert el.gamma[0] == 0.0

    def test_gfore_rejects_gamma_out_of_range(self):
        with pytest.raises(ValueError):
            make_gfore(10.0, 10.0, 1.0)
        with pytest.raises(ValueError):
            make_gfore(10.0, 10.0, -1.0)

    def test_pfore_feedthrough_table_value(self):
        # 5-degree column: d_r = 261.6517/144.0121
        p = PforeParams(161.6139, 261.6517, 405.6638, 0.0)
        assert p.d_r == pytest.approx(1.8169, abs=5e-5)

    def test_pfore_rejects_singular_feedthrough(self):
        with pytest.raises(ValueError):
            PforeParams(100.0, 300.0, 300.0, 0.0)

    def test_reset_matrix_must_be_diagonal_bounded(self):
        with pytest.raises(ValueError):
            ResetElement(np.array([[-1.0]]), np.array([1.0]), np.array([1.0]),
                         0.0, np.array([[1.5]]))


class TestBaseLinear:
    def test_clegg_base_linear_is_integrator(self):
        bl = base_linear(clegg())
        for f in (0.3, 7.0, 150.0):
            expect = 1.0 / (2j * math.pi * f)
            assert abs(eval_frf(bl, f) - expect) < 1e-12 * abs(expect)

    def test_gfore_unity_dc_lag(self):
        bl = base_linear(make_gfore(100.0, 100.0, 0.3))
        assert abs(eval_frf(bl, 1e-6)) == pytest.approx(1.0, rel=1e-6)
        # first-order corner: -3 dB at 100 Hz
        assert abs(eval_frf(bl, 100.0)) == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-9)

    def test_gfore_independent_of_gamma(self):
        a = base_linear(make_gfore(50.0, 75.0, 0.0))
        b = base_linear(make_gfore(50.0, 75.0, 0.99))
        assert a == b

    def test_pfore_gain_extremes(self):
        # 20-degree column: DC gain 1 + 181.2853/(882.7832 - 181.2853)
        p = PforeParams(111.9741, 181.2853, 882.7832, 0.0)
        bl = base_linear(make_pfore(p))
        expect_dc = 1.0 + 181.2853 / (882.7832 - 181.2853)
        assert abs(eval_frf(bl, 1e-8)) == pytest.approx(expect_dc, rel=1e-6)
        assert expect_dc == pytest.approx(1.2585, abs=1e-4)
        assert abs(eval_frf(bl, 1e8)) == pytest.approx(p.d_r, rel=1e-6)

    def test_unity_stage_is_one(self):
        bl = base_linear(unity_stage())
        for f in (1.0, 100.0, 10000.0):
            assert abs(eval_frf(bl, f) - 1.0) < 1e-12


class TestStepReset:
    def test_gamma_one_matches_linear_discretization(self):
        # jump is the identity, flow matches the Tustin filter exactly
        el = make_gfore(120.0, 80.0, 0.0)
        linear = ResetElement(el.a_r, el.b_r, el.c_r, el.d_r, np.array([[1.0]]))
        rng = np.random.default_rng(7)
        e = rng.standard_normal(4000)
        out, events = simulate_element(linear, e, TS)
        df = bilinear_discretize(base_linear(el), TS)
        ref = np.array([df.step(v) for v in e])
        assert events == []
        assert np.max(np.abs(out - ref)) < 1e-12 * max(1.0, np.max(np.abs(ref)))

    def test_clegg_two_resets_per_period(self):
        # brute-force simulation of a sine drive: exactly 2 resets/period
        spp = 400
        periods = 12
        m = np.arange(periods * spp)
        e = np.sin(2 * math.pi * m / spp)
        _, events = simulate_element(clegg(), e, TS)
        ev = np.asarray(events)
        ev = ev[ev >= 2 * spp]
        counts = np.bincount((ev - 2 * spp) // spp, minlength=periods - 2)
        assert np.all(counts == 2)
        # resets land at the zero crossings (within one sample)
        phases = (ev % spp) / spp
        dist = np.minimum.reduce([np.abs(phases), np.abs(phases - 0.5), np.abs(phases - 1.0)])
        assert np.all(dist <= 1.5 / spp)

    def test_held_trigger_never_resets(self):
        el = make_pfore(PforeParams(126.9604, 205.548, 672.3213, 0.0))
        e_r = np.concatenate([np.zeros(10), np.ones(500)])
        e_s = np.ones(510)
        out, events = simulate_element(el, e_r, TS, e_s=e_s)
        assert events == []

    def test_jump_scales_state_bit_for_bit(self):
        gamma = 0.37
        el = make_gfore(0.0, 1.0 / (2 * math.pi), gamma)
        st = make_state(el)
        step_reset(st, el, 1.0, 1.0, TS)
        step_reset(st, el, 1.0, 1.0, TS)
        x_before = st.x.copy()
        step_reset(st, el, 1.0, -1.0, TS)  # sign change triggers the jump
        assert st.events != []
        # state after = gamma * state before, then one flow step
        st2 = make_state(el)
        step_reset(st2, el, 1.0, 1.0, TS)
        step_reset(st2, el, 1.0, 1.0, TS)
        st2.x = gamma * x_before
        st2.prev_input = 1.0
        step_reset(st2, el, 1.0, 1.0, TS)
        assert st.x[0] == st2.x[0]

    def test_output_jump_equals_state_seen_through_c(self):
        # gamma = 0: output jumps by exactly |C_r x| at the reset instant
        el = make_pfore(PforeParams(126.9604, 205.548, 672.3213, 0.0))
        spp = 300
        m = np.arange(20 * spp)
        e = np.sin(2 * math.pi * (m - 0.5) / spp)
        st = make_state(el)
        prev_x = 0.0
        jumps = []
        for v in e:
            x_pre = st.x[0]
            n_ev = len(st.events)
            step_reset(st, el, float(v), float(v), TS)
            if len(st.events) > n_ev:
                jumps.append(abs(el.c_r[0] * x_pre))
            prev_x = st.x[0]
        assert len(jumps) >= 30
        assert min(jumps[4:]) > 0.0

    def test_zero_sample_counts_as_crossing(self):
        el = clegg()
        st = make_state(el)
        step_reset(st, el, 1.0, 1.0, TS)
        step_reset(st, el, 1.0, 0.0, TS)  # exact zero, previous positive
        assert st.events == [1]
        # the next negative sample must not double-fire
        step_reset(st, el, 1.0, -1.0, TS)
        assert st.events == [1]

    def test_nonfinite_input_raises_with_index(self):
        el = clegg()
        st = make_state(el)
        step_reset(st, el, 1.0, 1.0, TS)
        with pytest.raises(SimulationDivergedError) as err:
            step_reset(st, el, math.inf, 1.0, TS)
        assert err.value.sample_index == 1

    def test_gamma_one_equivalence_randomized(self):
        # oracle equivalence over randomized inputs at 1e-10
        rng = np.random.default_rng(42)
        for _ in range(5):
            wa = float(rng.uniform(5.0, 400.0))
            wb = float(rng.uniform(5.0, 400.0))
            el = make_gfore(wa, wb, 0.0)
            ident = ResetElement(el.a_r, el.b_r, el.c_r, el.d_r, np.array([[1.0]]))
            e = rng.standard_normal(2000)
            out, _ = simulate_element(ident, e, TS)
            df = bilinear_discretize(base_linear(el), TS)
            ref = df.run(e)
            assert np.max(np.abs(out - ref)) < 1e-10
