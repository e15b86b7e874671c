import math

import numpy as np
import pytest

from resetloop import lti
from resetloop.hosidf import (
    DEFAULT_ORDERS,
    HarmonicResponse,
    LoopModel,
    cglp_harmonics,
    complementary_harmonics,
    crossover_from_harmonics,
    harmonic_gain,
    harmonic_gains,
    open_loop_harmonics,
    sensitivity_harmonics,
    theta_d,
    write_harmonic_csv,
)
from resetloop.reset import PforeParams, ResetElement, clegg, make_gfore, make_pfore, unity_stage
from resetloop.tuning import design_from_corners

FOUR_OVER_PI = 4.0 / math.pi


class TestThetaD:
    def test_identity_jump_collapses_to_zero(self):
        el = make_gfore(50.0, 50.0, 0.0)
        ident = ResetElement(el.a_r, el.b_r, el.c_r, el.d_r, np.array([[1.0]]))
        for w in (1.0, 100.0, 1e5):
            assert abs(theta_d(ident, w)[0, 0]) < 1e-12

    def test_clegg_hand_evaluation(self):
        # Lambda = w^2, Delta = 2, Delta_r = 1, Gamma_r = 0
        for w in (0.1, 10.0, 1e4):
            assert theta_d(clegg(), w)[0, 0] == pytest.approx(FOUR_OVER_PI, rel=1e-12)

    def test_gfore_high_frequency_limit(self):
        # series limit (4/pi)(1-g)/(1+g) vs numeric evaluation far above the pole
        for g in (-0.5, 0.0, 0.3, 0.8):
            el = make_gfore(10.0, 10.0, g)
            w = 1e6 * abs(el.a_r[0, 0])
            expect = FOUR_OVER_PI * (1.0 - g) / (1.0 + g)
            assert theta_d(el, w)[0, 0] == pytest.approx(expect, rel=1e-4)

    def test_result_is_real_matrix(self):
        td = theta_d(make_gfore(30.0, 40.0, 0.2), 500.0)
        assert td.dtype.kind == "f"

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValueError):
            theta_d(clegg(), 0.0)


class TestHarmonicGain:
    def test_clegg_fundamental_closed_form(self):
        for w in (1.0, 2 * math.pi * 100.0):
            h1 = harmonic_gain(clegg(), w, 1)
            expect = (1.0 + 1j * FOUR_OVER_PI) / (1j * w)
            assert abs(h1 - expect) < 1e-12 * abs(expect)
            assert abs(h1) == pytest.approx(1.619 / w, abs=1e-3 / w)
            assert math.degrees(np.angle(h1)) == pytest.approx(-38.146, abs=1e-3)

    def test_clegg_third_harmonic(self):
        for w in (0.5, 300.0):
            h3 = harmonic_gain(clegg(), w, 3)
            assert h3 == pytest.approx(FOUR_OVER_PI / (3.0 * w), rel=1e-12)
            assert abs(np.angle(h3)) < 1e-12

    def test_even_orders_exactly_zero(self):
        el = make_pfore(PforeParams(126.9604, 205.548, 672.3213, 0.0))
        for n in (2, 4, 6):
            assert harmonic_gain(el, 100.0, n) == 0.0

    def test_magnitude_decays_with_order(self):
        for el in (make_gfore(100.0, 100.0, 0.0),
                   make_pfore(PforeParams(126.9604, 205.548, 672.3213, 0.0))):
            w = 2 * math.pi * 200.0
            mags = [abs(harmonic_gain(el, w, n)) for n in (3, 5, 7, 9)]
            assert all(a > b for a, b in zip(mags, mags[1:]))

    def test_vectorized_matches_scalar(self):
        el = make_pfore(PforeParams(126.9604, 205.548, 672.3213, 0.2))
        freqs = np.logspace(0, 3, 7)
        table = harmonic_gains(el, freqs, (1, 3, 5))
        for i, f in enumerate(freqs):
            for j, n in enumerate((1, 3, 5)):
                assert table[i, j] == pytest.approx(
                    harmonic_gain(el, 2 * math.pi * f, n), rel=1e-12
                )


class TestHarmonicResponse:
    def test_rejects_even_orders(self):
        with pytest.raises(ValueError):
            HarmonicResponse(np.array([1.0, 2.0]), (1, 2),
                             np.zeros((2, 2), dtype=complex))

    def test_csv_roundtrip_shape(self, tmp_path):
        freqs = np.array([1.0, 10.0, 100.0])
        h = HarmonicResponse(freqs, (1, 3), np.ones((3, 2), dtype=complex))
        path = tmp_path / "h.csv"
        write_harmonic_csv(h, path, include_rss=True)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "freq_hz,order,mag_db,phase_deg,rss_mag_db"
        assert len(lines) == 1 + 3 * 2


def make_loop(gamma_r=0.0, with_reset=True):
    """Small analytic loop: integrator-like plant, unity lead and damping off."""
    plant = lti.RationalTf((2 * math.pi * 500.0,), (1.0, 2 * math.pi * 5.0))
    c_d = lti.constant(0.0)
    c_t = lti.constant(1.0)
    if with_reset:
        d = design_from_corners(150.0, 600.0, gamma_r)
        return LoopModel(plant, c_d, c_t, d.reset_element(), d.lead_lag, d.k_c)
    return LoopModel(plant, c_d, c_t, unity_stage(), lti.constant(1.0), 1.0)


class TestLoopMappings:
    def test_pass_through_reset_reduces_to_linear_loop(self):
        # unity stage: L_1 equals C_t*G/(1+G*C_d), higher rows vanish
        model = make_loop(with_reset=False)
        freqs = np.logspace(0, 3, 31)
        _, outer = open_loop_harmonics(model, freqs, (1, 3, 5))
        gd = model.inner_damped_frf(freqs)
        ct = lti.eval_frf(model.c_t, freqs)
        assert np.allclose(outer.order_gains(1), ct * gd, rtol=1e-12)
        assert np.all(outer.order_gains(3) == 0)
        assert np.all(outer.order_gains(5) == 0)

    def test_no_damping_collapse(self):
        model = make_loop()
        freqs = np.logspace(0, 3, 11)
        dual, outer = open_loop_harmonics(model, freqs, (1,))
        # C_d = 0: dual and outer forms coincide
        assert np.allclose(dual.order_gains(1), outer.order_gains(1), rtol=1e-12)

    def test_gamma_one_collapses_everything_linear(self):
        model = make_loop(gamma_r=1.0)
        freqs = np.logspace(0, 3, 31)
        ser = sensitivity_harmonics(model, freqs, (1, 3, 5))
        tyr = complementary_harmonics(model, freqs, (1, 3, 5))
        assert np.all(ser.order_gains(3) == 0)
        assert np.all(tyr.order_gains(5) == 0)
        # order-1 row equals the base-linear loop mapping pointwise
        bl = model.base_linear_stage()
        l_bl = (lti.eval_frf(bl, freqs) * lti.eval_frf(model.c_t, freqs)
                * model.inner_damped_frf(freqs))
        assert np.allclose(ser.order_gains(1), 1.0 / (1.0 + l_bl), rtol=1e-10)

    def test_fundamental_identity(self):
        # T_1 + S_1 = 1 pointwise to 1e-12
        model = make_loop()
        freqs = np.logspace(0, 3.5, 101)
        s1 = sensitivity_harmonics(model, freqs, (1,)).order_gains(1)
        t1 = complementary_harmonics(model, freqs, (1,)).order_gains(1)
        assert np.max(np.abs(s1 + t1 - 1.0)) < 1e-12

    def test_sbl_mode_switch(self):
        model = make_loop()
        freqs = np.logspace(1, 2.5, 21)
        full = sensitivity_harmonics(model, freqs, (1, 3), sbl_mode="full")
        literal = sensitivity_harmonics(model, freqs, (1, 3), sbl_mode="reset-only")
        assert np.allclose(full.order_gains(1), literal.order_gains(1))
        assert not np.allclose(full.order_gains(3), literal.order_gains(3))

    def test_cglp_gamma_one_rows(self):
        model = make_loop(gamma_r=1.0)
        freqs = np.logspace(0, 3, 21)
        cg = cglp_harmonics(model, freqs, (1, 3))
        bl = model.base_linear_stage()
        assert np.allclose(cg.order_gains(1), lti.eval_frf(bl, freqs), rtol=1e-10)
        assert np.all(cg.order_gains(3) == 0)

    def test_crossover_delegates(self):
        fc = 100.0
        loop = lti.RationalTf((2 * math.pi * fc,), (1.0, 0.0))
        model = LoopModel(loop, lti.constant(0.0), lti.constant(1.0),
                          unity_stage(), lti.constant(1.0), 1.0)
        freqs = lti.log_grid(1.0, 1e4, 60)
        _, outer = open_loop_harmonics(model, freqs, (1,))
        m = crossover_from_harmonics(outer)
        assert m.omega_b_hz == pytest.approx(fc, rel=1e-3)
        assert m.phase_margin_deg == pytest.approx(90.0, abs=0.05)

    def test_kp_monotonicity(self):
        # doubling the tracking gain raises the crossover and lowers PM
        results = []
        for kp in (1.0, 2.0):
            plant = lti.RationalTf((2 * math.pi * 500.0,), (1.0, 2 * math.pi * 5.0))
            model = LoopModel(plant, lti.constant(0.0), lti.constant(kp),
                              unity_stage(), lti.constant(1.0), 1.0)
            freqs = lti.log_grid(1.0, 1e4, 100)
            _, outer = open_loop_harmonics(model, freqs, (1,))
            results.append(crossover_from_harmonics(outer))
        assert results[1].omega_b_hz > results[0].omega_b_hz
        assert results[1].phase_margin_deg < results[0].phase_margin_deg


class TestDesignRegression:
    """Published corner pairs deliver the tabulated crossover phase."""

    COLUMNS = [
        (5.0, 278.0, 261.6517, 405.6638),
        (10.0, 288.9, 219.3114, 486.4864),
        (15.0, 309.3, 205.5480, 672.3213),
        (20.0, 329.3, 181.2853, 882.7832),
    ]

    @pytest.mark.parametrize("phi,wb,wl,wf", COLUMNS)
    def test_phase_at_crossover(self, phi, wb, wl, wf):
        d = design_from_corners(wl, wf, 0.0)
        model = LoopModel(lti.constant(1.0), lti.constant(0.0), lti.constant(1.0),
                          d.reset_element(), d.lead_lag, d.k_c)
        cg = cglp_harmonics(model, np.array([wb]), (1,))
        phase = math.degrees(np.angle(cg.order_gains(1)[0]))
        assert phase == pytest.approx(phi, abs=1.5)

    @pytest.mark.parametrize("phi,wb,wl,wf", COLUMNS)
    def test_gain_flatness_band(self, phi, wb, wl, wf):
        # fundamental gain within [-1, +2] dB of 0 dB from 10 Hz to crossover
        d = design_from_corners(wl, wf, 0.0)
        model = LoopModel(lti.constant(1.0), lti.constant(0.0), lti.constant(1.0),
                          d.reset_element(), d.lead_lag, d.k_c)
        freqs = np.logspace(1, math.log10(wb), 120)
        mags_db = 20 * np.log10(np.abs(cglp_harmonics(model, freqs, (1,)).order_gains(1)))
        assert mags_db.min() >= -1.0
        assert mags_db.max() <= 2.0
