"""Rational transfer-function algebra, frequency response, and discretization.

All models are real-coefficient rational functions of the Laplace variable s
with coefficients stored in descending powers. Frequencies at the API surface
are in Hz; polynomial coefficients are in rad/s units as composed. An optional
pure input delay (seconds) is carried as metadata: it multiplies the frequency
response by exp(-j*w*tau) and becomes an integer-sample buffer after
discretization.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

TWO_PI = 2.0 * math.pi


class PoleOnGridError(ValueError):
    """Frequency response requested exactly at a pole."""


class NoCrossoverError(ValueError):
    """Loop magnitude never crosses 0 dB on the supplied grid."""


class BandwidthBeyondGridError(ValueError):
    """Closed-loop magnitude never leaves the +/-3 dB band on the grid."""


def _as_poly(coeffs) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("coefficient sequence must be non-empty and 1-D")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coefficients must be finite")
    return tuple(arr.tolist())


@dataclass(frozen=True)
class RationalTf:
    """Rational transfer function num(s)/den(s) with optional pure delay.

    Coefficients are in descending powers of s. The denominator is
    normalized to be monic on construction; leading zero coefficients are
    stripped.
    """

    num: tuple[float, ...]
    den: tuple[float, ...]
    delay: float = 0.0

    def __post_init__(self):
        num = np.asarray(_as_poly(self.num), dtype=float)
        den = np.asarray(_as_poly(self.den), dtype=float)
        den = np.trim_zeros(den, "f")
        if den.size == 0:
            raise ValueError("denominator must have a nonzero leading coefficient")
        num = np.trim_zeros(num, "f")
        if num.size == 0:
            num = np.zeros(1)
        if self.delay < 0.0:
            raise ValueError("delay must be >= 0")
        # monic denominator removes sign/scale ambiguity in composition
        lead = den[0]
        object.__setattr__(self, "num", tuple((num / lead).tolist()))
        object.__setattr__(self, "den", tuple((den / lead).tolist()))

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def relative_degree(self) -> int:
        return (len(self.den) - 1) - (len(self.num) - 1)

    def is_proper(self) -> bool:
        return len(self.num) <= len(self.den)

    def with_delay(self, delay: float) -> "RationalTf":
        return RationalTf(self.num, self.den, delay)

    def __mul__(self, other):
        if isinstance(other, RationalTf):
            return series(self, other)
        return RationalTf(tuple(c * other for c in self.num), self.den, self.delay)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, RationalTf):
            return parallel(self, other)
        return parallel(self, constant(float(other)))

    def __repr__(self):
        d = f", delay={self.delay:g}" if self.delay else ""
        return f"RationalTf(num={list(self.num)}, den={list(self.den)}{d})"


def constant(k: float) -> RationalTf:
    return RationalTf((float(k),), (1.0,))


def integrator() -> RationalTf:
    return RationalTf((1.0,), (1.0, 0.0))


def lowpass(corner_hz: float) -> RationalTf:
    """First-order low-pass w/(s+w) with unity DC gain."""
    if corner_hz <= 0:
        raise ValueError("corner frequency must be > 0")
    w = TWO_PI * corner_hz
    return RationalTf((w,), (1.0, w))


def lead_lag(zero_hz: float, pole_hz: float) -> RationalTf:
    """(1 + s/wz) / (1 + s/wp); lead when zero_hz < pole_hz."""
    if zero_hz <= 0 or pole_hz <= 0:
        raise ValueError("corner frequencies must be > 0")
    wz, wp = TWO_PI * zero_hz, TWO_PI * pole_hz
    return RationalTf((1.0 / wz, 1.0), (1.0 / wp, 1.0))


def notch(center_hz: float, q_num: float, q_den: float) -> RationalTf:
    """Biquad notch ((s/w)^2 + s/(q_num*w) + 1) / ((s/w)^2 + s/(q_den*w) + 1).

    Gain at the center frequency is exactly q_den/q_num.
    """
    if center_hz <= 0 or q_num <= 0 or q_den <= 0:
        raise ValueError("notch parameters must be > 0")
    w = TWO_PI * center_hz
    return RationalTf(
        (1.0 / w**2, 1.0 / (q_num * w), 1.0),
        (1.0 / w**2, 1.0 / (q_den * w), 1.0),
    )


def eval_frf(tf: RationalTf, freq_hz):
    """Frequency response at s = j*2*pi*freq_hz (scalar or array, Hz).

    The pure delay contributes a phase factor exp(-j*w*delay). Raises
    PoleOnGridError if the denominator evaluates to exactly zero.
    """
    f = np.asarray(freq_hz, dtype=float)
    if np.any(f <= 0.0):
        raise ValueError("frequencies must be > 0")
    s = 1j * TWO_PI * f
    den_val = np.polyval(tf.den, s)
    if np.any(den_val == 0):
        bad = np.atleast_1d(f)[np.atleast_1d(den_val) == 0][0]
        raise PoleOnGridError(f"pole on evaluation grid at {bad:g} Hz")
    resp = np.polyval(tf.num, s) / den_val
    if tf.delay:
        resp = resp * np.exp(-s * tf.delay)
    if np.isscalar(freq_hz):
        return complex(resp)
    return resp


def series(a: RationalTf, b: RationalTf) -> RationalTf:
    return RationalTf(
        np.polymul(a.num, b.num), np.polymul(a.den, b.den), a.delay + b.delay
    )


def parallel(a: RationalTf, b: RationalTf) -> RationalTf:
    if a.delay != b.delay:
        raise ValueError("parallel composition requires equal delays")
    num = np.polyadd(np.polymul(a.num, b.den), np.polymul(b.num, a.den))
    return RationalTf(num, np.polymul(a.den, b.den), a.delay)


def feedback(a: RationalTf, b: RationalTf) -> RationalTf:
    """Closed loop a/(1 + a*b) with b in the negative-feedback return path."""
    if a.delay or b.delay:
        raise ValueError(
            "delay in algebraic loop: compose delayed blocks in the FRF domain"
        )
    num = np.polymul(a.num, b.den)
    den = np.polyadd(np.polymul(a.den, b.den), np.polymul(a.num, b.num))
    return RationalTf(num, den)


_COMPOSE = {"series": series, "parallel": parallel, "feedback": feedback}


def compose(kind: str, a: RationalTf, b: RationalTf) -> RationalTf:
    """Polynomial composition. No pole-zero cancellation is attempted, so
    loop quotients above order ~12 should be composed per-frequency with
    eval_frf instead."""
    try:
        op = _COMPOSE[kind]
    except KeyError:
        raise ValueError(f"unknown composition kind {kind!r}") from None
    return op(a, b)


@dataclass(frozen=True)
class FrfPoint:
    """One frequency-response sample: frequency in Hz, complex gain."""

    freq_hz: float
    response: complex

    def __post_init__(self):
        if not self.freq_hz > 0:
            raise ValueError("frequency must be > 0")
        if not (math.isfinite(self.freq_hz) and cmath.isfinite(self.response)):
            raise ValueError("FrfPoint components must be finite")

    @property
    def mag_db(self) -> float:
        return 20.0 * math.log10(abs(self.response))

    @property
    def phase_deg(self) -> float:
        return math.degrees(cmath.phase(self.response))


def frf_points(freqs_hz, responses) -> list[FrfPoint]:
    return [FrfPoint(float(f), complex(r)) for f, r in zip(freqs_hz, responses)]


def _split_frf(points):
    """Accept a sequence of FrfPoint or an (freqs, responses) pair."""
    if isinstance(points, tuple) and len(points) == 2:
        f = np.asarray(points[0], dtype=float)
        h = np.asarray(points[1], dtype=complex)
    else:
        pts = list(points)
        f = np.array([p.freq_hz for p in pts], dtype=float)
        h = np.array([p.response for p in pts], dtype=complex)
    if f.size < 2:
        raise ValueError("need at least two grid points")
    if np.any(np.diff(f) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    return f, h


class FrfTable:
    """Measured frequency response usable in place of a rational plant model.

    Interpolates log-magnitude and unwrapped phase linearly in log-frequency.
    Evaluation outside the tabulated range raises ValueError.
    """

    def __init__(self, points):
        f, h = _split_frf(points)
        self._logf = np.log10(f)
        self._mag_db = 20.0 * np.log10(np.abs(h))
        self._phase = np.unwrap(np.angle(h))
        self.freqs_hz = f

    def __call__(self, freq_hz):
        f = np.asarray(freq_hz, dtype=float)
        logf = np.log10(f)
        if np.any(logf < self._logf[0] - 1e-12) or np.any(logf > self._logf[-1] + 1e-12):
            raise ValueError(
                f"frequency outside tabulated FRF range "
                f"[{10**self._logf[0]:g}, {10**self._logf[-1]:g}] Hz"
            )
        mag = 10.0 ** (np.interp(logf, self._logf, self._mag_db) / 20.0)
        ph = np.interp(logf, self._logf, self._phase)
        resp = mag * np.exp(1j * ph)
        if np.isscalar(freq_hz):
            return complex(resp)
        return resp


@dataclass(frozen=True)
class NrcParams:
    """Resolved all-pass damping-controller parameters."""

    gamma: float
    corner_multiple: float
    k: float
    omega_a_hz: float


def make_nrc(
    gamma: float, corner_multiple: float, plant_dc_gain: float, resonance_hz: float
) -> tuple[NrcParams, RationalTf]:
    """Non-minimum-phase resonant damping controller k*(s - wa)/(s + wa).

    The gain is k = gamma / plant_dc_gain and the corner is placed at
    corner_multiple times the first resonance. The magnitude is exactly k at
    all frequencies; the DC gain is -k.
    """
    if plant_dc_gain <= 0:
        raise ValueError("plant DC gain must be > 0")
    if resonance_hz <= 0 or corner_multiple <= 0:
        raise ValueError("resonance frequency and corner multiple must be > 0")
    k = gamma / plant_dc_gain
    omega_a_hz = corner_multiple * resonance_hz
    wa = TWO_PI * omega_a_hz
    tf = RationalTf((k, -k * wa), (1.0, wa))
    return NrcParams(gamma, corner_multiple, k, omega_a_hz), tf


@dataclass(frozen=True)
class TrackingParams:
    """PI + notch + low-pass tracking-controller parameters (frequencies in Hz)."""

    kp: float
    omega_i_hz: float
    notches: tuple[tuple[float, float, float], ...]  # (center_hz, q_num, q_den)
    omega_lpf_hz: float

    def __post_init__(self):
        if self.omega_i_hz < 0 or self.omega_lpf_hz <= 0:
            raise ValueError("corner frequencies must be positive")
        for i, (f, q1, q2) in enumerate(self.notches):
            if f <= 0 or q1 <= 0 or q2 <= 0:
                raise ValueError(f"notch {i}: frequencies and Q factors must be > 0")


def make_tracking_controller(p: TrackingParams) -> RationalTf:
    """kp*(1 + wi/s) * N_1(s) * N_2(s) * wlpf/(s + wlpf) as one rational model.

    omega_i_hz = 0 degenerates to a pure proportional stage.
    """
    wi = TWO_PI * p.omega_i_hz
    if wi > 0:
        ct = RationalTf((p.kp, p.kp * wi), (1.0, 0.0))
    else:
        ct = constant(p.kp)
    for f, q1, q2 in p.notches:
        ct = series(ct, notch(f, q1, q2))
    return series(ct, lowpass(p.omega_lpf_hz))


@dataclass(frozen=True)
class Crossing:
    freq_hz: float
    kind: str  # "gain" (0 dB) or "phase" (-180 deg)
    direction: str  # "down" or "up"


@dataclass(frozen=True)
class Margins:
    omega_b_hz: float
    phase_margin_deg: float
    gain_margin_db: float
    crossings: tuple[Crossing, ...] = field(default=())


def _interp_logf(f0, f1, y0, y1, ytarget):
    """Log-frequency abscissa where the linear-in-log(y over logf) path hits ytarget."""
    lf0, lf1 = math.log10(f0), math.log10(f1)
    t = (ytarget - y0) / (y1 - y0)
    return 10.0 ** (lf0 + t * (lf1 - lf0))


def margins_and_crossover(points) -> Margins:
    """Crossover frequency, phase margin, and gain margin from a loop FRF.

    The crossover is the lowest-frequency downward 0 dB crossing
    (log-frequency / linear-dB interpolation). PM = 180 deg + phase there.
    GM is read at the lowest -180 deg crossing of the unwrapped phase above
    the crossover; +inf if the phase never crosses -180. All gain and phase
    crossings found on the grid are reported for diagnostics.
    """
    f, h = _split_frf(points)
    mag = 20.0 * np.log10(np.abs(h))
    phase = np.degrees(np.unwrap(np.angle(h)))

    crossings: list[Crossing] = []
    gain_down: list[float] = []
    for i in range(len(f) - 1):
        if mag[i] > 0.0 >= mag[i + 1]:
            fc = _interp_logf(f[i], f[i + 1], mag[i], mag[i + 1], 0.0)
            crossings.append(Crossing(fc, "gain", "down"))
            gain_down.append(fc)
        elif mag[i] <= 0.0 < mag[i + 1]:
            fc = _interp_logf(f[i], f[i + 1], mag[i], mag[i + 1], 0.0)
            crossings.append(Crossing(fc, "gain", "up"))
    if not gain_down:
        raise NoCrossoverError("no 0 dB downward crossover on grid")
    omega_b = gain_down[0]

    logf = np.log10(f)
    phase_b = float(np.interp(math.log10(omega_b), logf, phase))
    pm = 180.0 + phase_b
    # fold into a readable branch without losing the diagnostic raw value
    pm_wrapped = (pm + 180.0) % 360.0 - 180.0

    gm = math.inf
    # -180 deg crossings (any multiple of 360 below/above is still -180 mod 360)
    for i in range(len(f) - 1):
        if f[i + 1] <= omega_b:
            continue
        p0 = (phase[i] + 180.0) % 360.0 - 180.0
        p1 = p0 + (phase[i + 1] - phase[i])
        for target in (-180.0, 180.0):
            if (p0 - target) * (p1 - target) < 0.0:
                fc = _interp_logf(f[i], f[i + 1], p0, p1, target)
                if fc > omega_b:
                    direction = "down" if p1 < p0 else "up"
                    crossings.append(Crossing(fc, "phase", direction))
    phase_cross = sorted(c.freq_hz for c in crossings if c.kind == "phase")
    if phase_cross:
        fc = phase_cross[0]
        gm = -float(np.interp(math.log10(fc), logf, mag))
    return Margins(omega_b, pm_wrapped, gm, tuple(crossings))


def closed_loop_bandwidth(points) -> float:
    """Lowest frequency where the magnitude leaves the DC +/-3 dB band.

    DC gain is taken from the first grid point; the band-exit frequency is
    interpolated log-frequency/linear-dB. Raises BandwidthBeyondGridError
    if the response stays in the band over the whole grid.
    """
    f, h = _split_frf(points)
    mag = 20.0 * np.log10(np.abs(h))
    lo, hi = mag[0] - 3.0, mag[0] + 3.0
    for i in range(1, len(f)):
        if mag[i] > hi:
            return _interp_logf(f[i - 1], f[i], mag[i - 1], mag[i], hi)
        if mag[i] < lo:
            return _interp_logf(f[i - 1], f[i], mag[i - 1], mag[i], lo)
    raise BandwidthBeyondGridError("bandwidth beyond grid: response stays in band")


@dataclass
class DiscreteFilter:
    """Direct-form-II-transposed difference equation with optional output delay.

    b holds b_0..b_m, a holds a_1..a_m (a_0 is normalized to 1). State is
    mutable; a single instance must not be stepped from two execution
    contexts concurrently.
    """

    b: tuple[float, ...]
    a: tuple[float, ...]
    t_s: float
    delay_samples: int = 0
    _z: list[float] = field(default_factory=list, repr=False)
    _dbuf: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.t_s <= 0:
            raise ValueError("sample time must be > 0")
        n = max(len(self.b) - 1, len(self.a))
        self.b = tuple(self.b) + (0.0,) * (n + 1 - len(self.b))
        self.a = tuple(self.a) + (0.0,) * (n - len(self.a))
        self.reset_state()

    @property
    def order(self) -> int:
        return len(self.a)

    def reset_state(self):
        self._z = [0.0] * self.order
        self._dbuf = [0.0] * self.delay_samples

    def step(self, x: float) -> float:
        if not math.isfinite(x):
            raise ValueError("non-finite filter input")
        b, a, z = self.b, self.a, self._z
        y = b[0] * x + (z[0] if z else 0.0)
        m = len(z)
        for i in range(m):
            nxt = z[i + 1] if i + 1 < m else 0.0
            z[i] = b[i + 1] * x + nxt - a[i] * y
        if self._dbuf:
            self._dbuf.append(y)
            y = self._dbuf.pop(0)
        return y

    def run(self, xs) -> np.ndarray:
        """Filter a whole sequence from the current state (vectorized path
        is only valid from zero state with no delay; falls back otherwise)."""
        if any(self._z) or self._dbuf:
            return np.array([self.step(float(v)) for v in xs])
        a_full = (1.0,) + self.a
        y = scipy.signal.lfilter(self.b, a_full, np.asarray(xs, dtype=float))
        if self.delay_samples:
            y = np.concatenate([np.zeros(self.delay_samples), y[: -self.delay_samples]])
        # leave state untouched: vectorized path is for stateless batch use
        return y


def step_filter(f: DiscreteFilter, x: float) -> float:
    """One direct-form-II-transposed update; deterministic given state."""
    return f.step(x)


def bilinear_discretize(tf: RationalTf, t_s: float) -> DiscreteFilter:
    """Tustin discretization s -> (2/t_s)(z-1)/(z+1).

    The model must be proper and any pure delay must be an exact multiple of
    the sample time (it becomes an output buffer of that many samples).
    """
    if t_s <= 0:
        raise ValueError("sample time must be > 0")
    if not tf.is_proper():
        raise ValueError("bilinear discretization requires a proper model")
    nd = tf.delay / t_s
    if abs(nd - round(nd)) > 1e-9 * max(1.0, nd):
        raise ValueError(
            "delay is not an integer multiple of the sample time; "
            "pre-approximate it with a Pade section"
        )
    if all(c == 0.0 for c in tf.num):
        return DiscreteFilter((0.0,), (), t_s, int(round(nd)))
    bz, az = scipy.signal.bilinear(tf.num, tf.den, fs=1.0 / t_s)
    bz = np.atleast_1d(bz) / az[0]
    az = np.atleast_1d(az) / az[0]
    return DiscreteFilter(tuple(bz.tolist()), tuple(az[1:].tolist()), t_s, int(round(nd)))


def log_grid(fmin_hz: float, fmax_hz: float, points_per_decade: int = 30) -> np.ndarray:
    """Logarithmic frequency grid, endpoints included."""
    if not 0 < fmin_hz < fmax_hz:
        raise ValueError("need 0 < fmin < fmax")
    n = max(2, int(round(math.log10(fmax_hz / fmin_hz) * points_per_decade)) + 1)
    return np.logspace(math.log10(fmin_hz), math.log10(fmax_hz), n)
