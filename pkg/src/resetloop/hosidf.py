"""Harmonic describing-function analysis of reset elements and of the
dual-loop (damping + tracking) architecture built around them.

For a reset element driven by a unit sinusoid at frequency w, the output is
a sum of odd harmonics; harmonic_gain returns the complex gain from the
input to the n-th output harmonic. Those per-harmonic gains propagate
through the loop to per-harmonic open-loop, sensitivity, and complementary
sensitivity responses. All of it assumes exactly two resets per period,
which the simulator can verify per run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import lti
from .lti import TWO_PI, FrfTable, Margins, RationalTf
from .reset import ResetElement, base_linear


class DegenerateResetRatioError(ValueError):
    """I + A_rho*expm(pi*A_r/w) is singular at the requested frequency."""


def theta_d(r: ResetElement, omega: float) -> np.ndarray:
    """Jump-induced gain matrix of the describing-function expansion.

    omega is in rad/s. Composes only real matrices, so the result is real;
    it vanishes identically when A_rho = I.
    """
    if omega <= 0:
        raise ValueError("omega must be > 0")
    n = r.n_states
    if np.all(np.diag(r.a_rho) == 1.0):
        return np.zeros((n, n))  # identity jump: exact algebraic collapse
    if n == 1:
        a = float(r.a_r[0, 0])
        g = float(r.a_rho[0, 0])
        lam = omega * omega + a * a
        expa = math.exp(math.pi * a / omega)
        delta = 1.0 + expa
        delta_r = 1.0 + g * expa
        if abs(delta_r) < 1e-300:
            raise DegenerateResetRatioError(
                f"degenerate reset ratio at omega={omega:g} rad/s"
            )
        gamma_r = g * delta / (delta_r * lam)
        return np.array([[-(2.0 * omega * omega / math.pi) * delta * (gamma_r - 1.0 / lam)]])
    eye = np.eye(n)
    expa = scipy.linalg.expm((math.pi / omega) * r.a_r)
    lam = omega * omega * eye + r.a_r @ r.a_r
    delta = eye + expa
    delta_r = eye + r.a_rho @ expa
    if abs(np.linalg.det(delta_r)) < 1e-300:
        raise DegenerateResetRatioError(
            f"degenerate reset ratio at omega={omega:g} rad/s"
        )
    lam_inv = np.linalg.inv(lam)
    gamma_r = np.linalg.solve(delta_r, r.a_rho @ delta @ lam_inv)
    return -(2.0 * omega * omega / math.pi) * delta @ (gamma_r - lam_inv)


def harmonic_gain(r: ResetElement, omega: float, n: int) -> complex:
    """Complex gain from a unit input sinusoid at omega (rad/s) to the n-th
    output harmonic. Even orders are exactly zero; the feedthrough d_r
    contributes to the fundamental only."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValueError("harmonic order must be an integer >= 1")
    if n % 2 == 0:
        return 0.0 + 0.0j
    th = theta_d(r, omega)
    if r.n_states == 1:
        a = float(r.a_r[0, 0])
        cb = float(r.c_r[0] * r.b_r[0])
        if n == 1:
            return cb * (1.0 + 1j * float(th[0, 0])) / (1j * omega - a) + r.d_r
        return cb * 1j * float(th[0, 0]) / (1j * n * omega - a)
    eye = np.eye(r.n_states)
    if n == 1:
        v = np.linalg.solve(1j * omega * eye - r.a_r, (eye + 1j * th) @ r.b_r)
        return complex(r.c_r @ v) + r.d_r
    v = np.linalg.solve(1j * n * omega * eye - r.a_r, 1j * th @ r.b_r)
    return complex(r.c_r @ v)


def _harmonic_gains_1d(r: ResetElement, omegas: np.ndarray, n: int) -> np.ndarray:
    """Vectorized harmonic_gain over a rad/s grid for first-order elements."""
    if n % 2 == 0:
        return np.zeros(omegas.size, dtype=complex)
    a = float(r.a_r[0, 0])
    g = float(r.a_rho[0, 0])
    cb = float(r.c_r[0] * r.b_r[0])
    lam = omegas**2 + a * a
    if g == 1.0:
        th = np.zeros(omegas.size)  # identity jump: exact collapse
    else:
        expa = np.exp(math.pi * a / omegas)
        delta = 1.0 + expa
        delta_r = 1.0 + g * expa
        if np.any(np.abs(delta_r) < 1e-300):
            bad = omegas[np.abs(delta_r) < 1e-300][0]
            raise DegenerateResetRatioError(f"degenerate reset ratio at omega={bad:g} rad/s")
        th = -(2.0 * omegas**2 / math.pi) * delta * (g * delta / (delta_r * lam) - 1.0 / lam)
    if n == 1:
        return cb * (1.0 + 1j * th) / (1j * omegas - a) + r.d_r
    return cb * (1j * th) / (1j * n * omegas - a)


def harmonic_gains(r: ResetElement, freqs_hz, orders) -> np.ndarray:
    """Table of harmonic gains, shape (len(freqs), len(orders))."""
    f = np.asarray(freqs_hz, dtype=float)
    w = TWO_PI * f
    out = np.empty((f.size, len(orders)), dtype=complex)
    for j, n in enumerate(orders):
        if r.n_states == 1:
            out[:, j] = _harmonic_gains_1d(r, w, int(n))
        else:
            out[:, j] = [harmonic_gain(r, wi, int(n)) for wi in w]
    return out


DEFAULT_ORDERS = (1, 3, 5, 7, 9)


@dataclass(frozen=True)
class HarmonicResponse:
    """Per-frequency, per-odd-order complex gain table.

    gains[i, j] is the response at base frequency freqs_hz[i] for harmonic
    order orders[j]. Even orders are identically zero and are not stored.
    """

    freqs_hz: np.ndarray
    orders: tuple[int, ...]
    gains: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=float)
        if np.any(np.diff(f) <= 0) or np.any(f <= 0):
            raise ValueError("frequency grid must be positive and strictly increasing")
        orders = tuple(int(n) for n in self.orders)
        if any(n < 1 or n % 2 == 0 for n in orders):
            raise ValueError("orders must be odd integers >= 1")
        g = np.asarray(self.gains, dtype=complex)
        if g.shape != (f.size, len(orders)):
            raise ValueError("gain table shape must be (n_freqs, n_orders)")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "gains", g)

    def order_gains(self, n: int) -> np.ndarray:
        try:
            j = self.orders.index(n)
        except ValueError:
            raise KeyError(f"order {n} not in response (orders={self.orders})") from None
        return self.gains[:, j]

    def order_points(self, n: int):
        return lti.frf_points(self.freqs_hz, self.order_gains(n))

    def rss(self) -> np.ndarray:
        """Root-sum-square aggregate magnitude across stored orders."""
        return np.sqrt(np.sum(np.abs(self.gains) ** 2, axis=1))


def write_harmonic_csv(h: HarmonicResponse, path, include_rss: bool = False) -> None:
    """Export as `freq_hz,order,mag_db,phase_deg` rows (one per order per
    frequency); include_rss appends a per-frequency aggregate column."""
    rss = 20.0 * np.log10(np.maximum(h.rss(), 1e-300)) if include_rss else None
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = "freq_hz,order,mag_db,phase_deg"
        if include_rss:
            header += ",rss_mag_db"
        fh.write(header + "\n")
        for i, f in enumerate(h.freqs_hz):
            for j, n in enumerate(h.orders):
                g = h.gains[i, j]
                mag = 20.0 * math.log10(abs(g)) if abs(g) > 0 else -math.inf
                row = f"{f:.10g},{n},{mag:.10g},{math.degrees(np.angle(g)):.10g}"
                if include_rss:
                    row += f",{rss[i]:.10g}"
                fh.write(row + "\n")


@dataclass(frozen=True)
class LoopModel:
    """The dual-loop assembly: plant G with inner damping controller C_d and
    an outer tracking path (reset stage -> gain k_c -> lead-lag C_l -> C_t).

    An optional shaping filter c_s acts only on the reset trigger signal.
    The plant may be a rational model or tabulated FRF data.
    """

    plant: RationalTf | FrfTable
    c_d: RationalTf
    c_t: RationalTf
    reset: ResetElement
    c_l: RationalTf
    k_c: float
    c_s: RationalTf | None = None

    def __post_init__(self):
        if not self.k_c > 0:
            raise ValueError("k_c must be > 0")

    def plant_frf(self, freqs_hz):
        if isinstance(self.plant, FrfTable):
            return self.plant(freqs_hz)
        return lti.eval_frf(self.plant, freqs_hz)

    def inner_damped_frf(self, freqs_hz):
        """G/(1 + G*C_d) evaluated per frequency."""
        g = self.plant_frf(freqs_hz)
        den = 1.0 + g * lti.eval_frf(self.c_d, freqs_hz)
        small = np.abs(np.atleast_1d(den)) < 1e-12
        if np.any(small):
            bad = np.atleast_1d(np.asarray(freqs_hz, dtype=float))[small][0]
            raise ZeroDivisionError(
                f"inner loop 1 + G*C_d singular at {bad:g} Hz"
            )
        return g / den

    def base_linear_stage(self) -> RationalTf:
        """Base-linear model of the full reset stage: R_bl * k_c * C_l."""
        return self.k_c * lti.series(base_linear(self.reset), self.c_l)


def cglp_harmonics(
    model: LoopModel, freqs_hz, orders=DEFAULT_ORDERS
) -> HarmonicResponse:
    """Harmonic gains of the reset stage with its gain correction and
    lead-lag: entry (w, n) = H_n(w) * k_c * C_l(j*n*w)."""
    f = np.asarray(freqs_hz, dtype=float)
    gains = harmonic_gains(model.reset, f, orders)
    for j, n in enumerate(orders):
        gains[:, j] *= model.k_c * lti.eval_frf(model.c_l, n * f)
    return HarmonicResponse(f, tuple(orders), gains)


def open_loop_harmonics(
    model: LoopModel, freqs_hz, orders=DEFAULT_ORDERS
) -> tuple[HarmonicResponse, HarmonicResponse]:
    """Per-harmonic open-loop responses (dual form, outer form).

    Dual form n-th row:  G(jnw) * (Hc_n(w) C_t(jnw) + C_d(jnw));
    outer form n-th row: Hc_n(w) C_t(jnw) * G(jnw)/(1 + G(jnw) C_d(jnw)),
    where Hc_n is the reset-stage harmonic gain including k_c * C_l.
    """
    f = np.asarray(freqs_hz, dtype=float)
    hc = cglp_harmonics(model, f, orders)
    dual = np.empty_like(hc.gains)
    outer = np.empty_like(hc.gains)
    for j, n in enumerate(orders):
        fn = n * f
        g = model.plant_frf(fn)
        cd = lti.eval_frf(model.c_d, fn)
        ct = lti.eval_frf(model.c_t, fn)
        gd = model.inner_damped_frf(fn)
        dual[:, j] = g * (hc.gains[:, j] * ct + cd)
        outer[:, j] = hc.gains[:, j] * ct * gd
    return (
        HarmonicResponse(f, tuple(orders), dual),
        HarmonicResponse(f, tuple(orders), outer),
    )


def _base_linear_loop_frf(model: LoopModel, freqs_hz, mode: str) -> np.ndarray:
    """Base-linear outer loop used by the higher-harmonic sensitivity terms.

    mode "full" closes the whole base-linear tracking path
    (R_bl*k_c*C_l*C_t*G_damped); mode "reset-only" uses R_bl*G_damped alone.
    "full" is the default: it makes gamma_r = 1 collapse exactly to the
    linear design.
    """
    gd = model.inner_damped_frf(freqs_hz)
    rbl = lti.eval_frf(base_linear(model.reset), freqs_hz)
    if mode == "full":
        cl = lti.eval_frf(model.c_l, freqs_hz)
        ct = lti.eval_frf(model.c_t, freqs_hz)
        return rbl * model.k_c * cl * ct * gd
    if mode == "reset-only":
        return rbl * gd
    raise ValueError("mode must be 'full' or 'reset-only'")


def _scaled_phase_factor(s1: np.ndarray, n: int) -> np.ndarray:
    """|S_1| with phase n * unwrapped-phase(S_1), per grid point."""
    phase = np.unwrap(np.angle(s1))
    return np.abs(s1) * np.exp(1j * n * phase)


def sensitivity_harmonics(
    model: LoopModel, freqs_hz, orders=DEFAULT_ORDERS, sbl_mode: str = "full"
) -> HarmonicResponse:
    """Per-harmonic reference-to-error sensitivity.

    Fundamental: S_1 = 1/(1 + L_1). Higher orders combine the n-th open-loop
    row, the base-linear sensitivity at n*w, and the fundamental sensitivity
    with n-times phase, with a sign inversion. The fundamental phase is
    unwrapped along the grid before scaling so the result is grid-density
    independent.
    """
    f = np.asarray(freqs_hz, dtype=float)
    _, outer = open_loop_harmonics(model, f, orders)
    gains = np.empty_like(outer.gains)
    l1 = outer.order_gains(1)
    s1 = 1.0 / (1.0 + l1)
    for j, n in enumerate(orders):
        if n == 1:
            gains[:, j] = s1
            continue
        sbl_n = 1.0 / (1.0 + _base_linear_loop_frf(model, n * f, sbl_mode))
        gains[:, j] = -outer.gains[:, j] * sbl_n * _scaled_phase_factor(s1, n)
    return HarmonicResponse(f, tuple(orders), gains)


def complementary_harmonics(
    model: LoopModel, freqs_hz, orders=DEFAULT_ORDERS, sbl_mode: str = "full"
) -> HarmonicResponse:
    """Per-harmonic reference-to-output response; order 1 satisfies
    T_1 + S_1 = 1 identically."""
    f = np.asarray(freqs_hz, dtype=float)
    _, outer = open_loop_harmonics(model, f, orders)
    gains = np.empty_like(outer.gains)
    l1 = outer.order_gains(1)
    s1 = 1.0 / (1.0 + l1)
    for j, n in enumerate(orders):
        if n == 1:
            gains[:, j] = l1 * s1
            continue
        sbl_n = 1.0 / (1.0 + _base_linear_loop_frf(model, n * f, sbl_mode))
        gains[:, j] = outer.gains[:, j] * sbl_n * _scaled_phase_factor(s1, n)
    return HarmonicResponse(f, tuple(orders), gains)


def crossover_from_harmonics(h: HarmonicResponse) -> Margins:
    """Crossover and margins of the fundamental open-loop row."""
    return lti.margins_and_crossover((h.freqs_hz, h.order_gains(1)))
