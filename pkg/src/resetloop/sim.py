"""Fixed-step closed-loop simulation of the dual-loop reset architecture.

One sample proceeds in a fixed order: error formation from the previous
output sample, trigger shaping, reset-element update, the linear tracking
chain, inner damping feedback at the plant input, plant update, output
noise. The one-sample feedback delay makes the loop well-posed without
algebraic-loop solving and is part of the simulated physics (it models the
controller's computation delay).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import lti
from .hosidf import LoopModel
from .lti import DiscreteFilter, FrfPoint, bilinear_discretize
from .reset import SimulationDivergedError, base_linear, make_state, step_reset

DEFAULT_SAMPLE_TIME = 30e-6


@dataclass(frozen=True)
class SignalSpec:
    """Reference/disturbance generator spec.

    kinds: sine, triangle (odd-symmetric, zero and rising at t=0), step,
    chirp (linear frequency ramp f0 -> f1 over the run).
    """

    kind: str
    f0_hz: float = 0.0
    amplitude: float = 1.0
    f1_hz: float | None = None

    def __post_init__(self):
        if self.kind not in ("sine", "triangle", "step", "chirp"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind in ("sine", "triangle", "chirp") and not self.f0_hz > 0:
            raise ValueError("periodic signals need f0 > 0")

    def is_periodic(self) -> bool:
        return self.kind in ("sine", "triangle")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean white Gaussian output noise of the given RMS."""

    rms: float

    def __post_init__(self):
        if self.rms < 0:
            raise ValueError("noise RMS must be >= 0")


def reference_signal(kind: str, f0_hz: float, amplitude: float, t, f1_hz=None, duration_s=None):
    """Evaluate a reference signal at time(s) t (vectorized)."""
    t = np.asarray(t, dtype=float)
    if kind == "sine":
        out = amplitude * np.sin(2.0 * math.pi * f0_hz * t)
    elif kind == "triangle":
        # arcsin(sin) is exactly piecewise linear: 0 and rising at t=0,
        # peak +A at a quarter period
        out = amplitude * (2.0 / math.pi) * np.arcsin(np.sin(2.0 * math.pi * f0_hz * t))
    elif kind == "step":
        out = amplitude * (t >= 0.0).astype(float)
    elif kind == "chirp":
        if f1_hz is None or duration_s is None:
            raise ValueError("chirp needs an end frequency and a duration")
        rate = (f1_hz - f0_hz) / duration_s
        out = amplitude * np.sin(2.0 * math.pi * (f0_hz * t + 0.5 * rate * t * t))
    else:
        raise ValueError(f"unknown signal kind {kind!r}")
    if np.isscalar(t) or out.ndim == 0:
        return float(out)
    return out


def _eval_spec(spec: SignalSpec, t: np.ndarray, duration_s: float) -> np.ndarray:
    return reference_signal(spec.kind, spec.f0_hz, spec.amplitude, t, spec.f1_hz, duration_s)


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return state, z ^ (z >> 31)


def gaussian_noise(seed: int, n: int, rms: float) -> np.ndarray:
    """Deterministic Gaussian sequence from a documented algorithm.

    A splitmix64 stream seeded with `seed` yields 64-bit words; each word
    maps to a uniform in (0, 1) as (word + 1)/2^64; consecutive uniform
    pairs (u1, u2) give one Box-Muller pair
    sqrt(-2 ln u1) * (cos, sin)(2 pi u2), scaled by rms. The spelled-out
    generator makes traces reproducible from the seed alone in any
    implementation language.
    """
    if rms == 0.0 or n == 0:
        return np.zeros(n)
    out = np.empty(n)
    state = seed & 0xFFFFFFFFFFFFFFFF
    i = 0
    while i < n:
        state, w1 = _splitmix64(state)
        state, w2 = _splitmix64(state)
        u1 = (w1 + 1) / 2.0**64
        u2 = (w2 + 1) / 2.0**64
        r = math.sqrt(-2.0 * math.log(u1))
        out[i] = r * math.cos(2.0 * math.pi * u2)
        if i + 1 < n:
            out[i + 1] = r * math.sin(2.0 * math.pi * u2)
        i += 2
    return rms * out


@dataclass(frozen=True)
class Scenario:
    """One closed-loop run: loop model, timing, signals, and seeding.

    chain_order selects where the linear lead-lag sits relative to the
    tracking controller in the series chain after the reset stage
    ("lead-first" or "tracking-first"); the linear analysis is identical
    either way. duration_s = None sizes the run automatically to
    settle_periods + analysis_periods reference periods.
    """

    model: LoopModel
    t_s: float = DEFAULT_SAMPLE_TIME
    duration_s: float | None = None
    reference: SignalSpec = SignalSpec("sine", 100.0, 1.0)
    disturbance: SignalSpec | None = None
    noise: NoiseSpec | None = None
    settle_periods: int = 10
    analysis_periods: int = 4
    seed: int = 0
    chain_order: str = "lead-first"

    def __post_init__(self):
        if self.t_s <= 0:
            raise ValueError("sample time must be > 0")
        if self.chain_order not in ("lead-first", "tracking-first"):
            raise ValueError("chain_order must be 'lead-first' or 'tracking-first'")
        if self.duration_s is None and not self.reference.is_periodic():
            raise ValueError("aperiodic references need an explicit duration")
        if self.duration_s is not None and self.reference.is_periodic():
            need = (self.settle_periods + 4) / self.reference.f0_hz
            if self.duration_s < need - 1e-12:
                raise ValueError(
                    f"duration {self.duration_s:g}s covers fewer than settle+4 "
                    f"periods ({need:g}s) of the reference"
                )

    def resolved_duration(self) -> float:
        if self.duration_s is not None:
            return self.duration_s
        periods = self.settle_periods + self.analysis_periods
        return periods / self.reference.f0_hz

    def fingerprint(self) -> str:
        blob = repr(
            (
                self.t_s,
                self.duration_s,
                self.reference,
                self.disturbance,
                self.noise,
                self.settle_periods,
                self.analysis_periods,
                self.seed,
                self.chain_order,
                self.model.k_c,
                self.model.c_t,
                self.model.c_d,
                self.model.c_l,
                self.model.c_s,
                None if isinstance(self.model.plant, lti.FrfTable) else self.model.plant,
                self.model.reset.a_r.tolist(),
                self.model.reset.b_r.tolist(),
                self.model.reset.c_r.tolist(),
                self.model.reset.d_r,
                self.model.reset.a_rho.tolist(),
            )
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class SimTrace:
    """Uniformly sampled signals of one run plus the reset-event log.

    x is the physical plant output; y = x + n is the measured output the
    loop acts on. e_r is the reset-stage input (equal to e) and e_s the
    shaped trigger.
    """

    t_s: float
    r: np.ndarray
    e: np.ndarray
    e_r: np.ndarray
    e_s: np.ndarray
    u_r: np.ndarray
    u: np.ndarray
    x: np.ndarray
    y: np.ndarray
    reset_indices: np.ndarray
    f0_hz: float | None = None
    settle_periods: int = 0
    scenario_hash: str = ""

    def __post_init__(self):
        n = len(self.r)
        for name in ("e", "e_r", "e_s", "u_r", "u", "x", "y"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"signal {name} length mismatch")

    @property
    def n_samples(self) -> int:
        return len(self.r)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.t_s


def _discretize_blocks(model: LoopModel, t_s: float, linear_reset: bool):
    if isinstance(model.plant, lti.FrfTable):
        raise ValueError("time-domain simulation needs a rational plant model")
    blocks = {
        "plant": bilinear_discretize(model.plant, t_s),
        "c_d": bilinear_discretize(model.c_d, t_s),
        "c_t": bilinear_discretize(model.c_t, t_s),
        "c_l": bilinear_discretize(model.c_l, t_s),
        "c_s": bilinear_discretize(model.c_s, t_s) if model.c_s is not None else None,
        "r_lin": bilinear_discretize(base_linear(model.reset), t_s) if linear_reset else None,
    }
    return blocks


def run_closed_loop(sc: Scenario, linear_reset: bool = False) -> SimTrace:
    """Simulate the dual loop sample by sample.

    linear_reset replaces the reset element with its discretized
    base-linear filter (the all-linear oracle for the gamma = 1 collapse).
    Raises SimulationDivergedError with the sample index if any signal
    leaves the finite range. Deterministic for a fixed scenario.
    """
    model = sc.model
    t_s = sc.t_s
    duration = sc.resolved_duration()
    n = int(round(duration / t_s))
    t = np.arange(n) * t_s

    r = _eval_spec(sc.reference, t, duration)
    d = _eval_spec(sc.disturbance, t, duration) if sc.disturbance else None
    noise = (
        gaussian_noise(sc.seed, n, sc.noise.rms)
        if sc.noise is not None and sc.noise.rms > 0
        else None
    )

    blocks = _discretize_blocks(model, t_s, linear_reset)
    plant_f: DiscreteFilter = blocks["plant"]
    cd_f: DiscreteFilter = blocks["c_d"]
    ct_f: DiscreteFilter = blocks["c_t"]
    cl_f: DiscreteFilter = blocks["c_l"]
    cs_f = blocks["c_s"]
    r_lin = blocks["r_lin"]
    rstate = make_state(model.reset)
    element = model.reset
    k_c = model.k_c
    lead_first = sc.chain_order == "lead-first"

    e_a = np.empty(n)
    es_a = np.empty(n)
    ur_a = np.empty(n)
    u_a = np.empty(n)
    x_a = np.empty(n)
    y_a = np.empty(n)

    y_prev = 0.0
    for k in range(n):
        e = r[k] - y_prev
        e_s = cs_f.step(e) if cs_f is not None else e
        if r_lin is not None:
            u_r = r_lin.step(e)
        else:
            u_r = step_reset(rstate, element, e, e_s, t_s)
        if lead_first:
            u = ct_f.step(k_c * cl_f.step(u_r))
        else:
            u = k_c * cl_f.step(ct_f.step(u_r))
        plant_in = u - cd_f.step(y_prev)
        if d is not None:
            plant_in += d[k]
        x = plant_f.step(plant_in)
        y = x + (noise[k] if noise is not None else 0.0)
        if not (math.isfinite(u) and math.isfinite(y)):
            raise SimulationDivergedError(
                f"closed loop diverged at sample {k} (t={k * t_s:.6g}s)", k
            )
        e_a[k] = e
        es_a[k] = e_s
        ur_a[k] = u_r
        u_a[k] = u
        x_a[k] = x
        y_a[k] = y
        y_prev = y

    return SimTrace(
        t_s=t_s,
        r=r,
        e=e_a,
        e_r=e_a.copy(),
        e_s=es_a,
        u_r=ur_a,
        u=u_a,
        x=x_a,
        y=y_a,
        reset_indices=np.asarray(rstate.events, dtype=int),
        f0_hz=sc.reference.f0_hz if sc.reference.is_periodic() else None,
        settle_periods=sc.settle_periods,
        scenario_hash=sc.fingerprint(),
    )


def snap_frequency(f_hz: float, t_s: float) -> float:
    """Nearest frequency with an integer number of samples per period."""
    if f_hz <= 0 or t_s <= 0:
        raise ValueError("need f > 0 and t_s > 0")
    n = max(2, int(round(1.0 / (f_hz * t_s))))
    return 1.0 / (n * t_s)


def aligned_sine(samples_per_period: int, periods: int, amplitude: float = 1.0,
                 crossing_offset: float = 0.5) -> np.ndarray:
    """Unit-frequency sine sampled so zero crossings sit at a controlled
    inter-sample position.

    With resets quantized to sample instants, a crossing exactly on a
    sample is applied one interval early while a crossing just after it is
    applied at the interval start; placing the crossing midway between
    samples (offset 0.5, the default) makes the quantized reset timing
    unbiased. Intended as the drive for element-level harmonic
    cross-validation; the phase reference is the first rising crossing at
    sample index crossing_offset.
    """
    if samples_per_period < 2 or periods < 1:
        raise ValueError("need samples_per_period >= 2 and periods >= 1")
    if not 0.0 <= crossing_offset < 1.0:
        raise ValueError("crossing_offset must lie in [0, 1)")
    m = np.arange(periods * samples_per_period)
    phase = (m - crossing_offset) % samples_per_period
    return amplitude * np.sin(2.0 * math.pi * phase / samples_per_period)


def _samples_per_period(trace_t_s: float, f0_hz: float) -> int:
    spp = 1.0 / (f0_hz * trace_t_s)
    if abs(spp - round(spp)) > 1e-6 * spp:
        raise ValueError(
            f"non-integer samples per period ({spp:.6f}); snap the grid with "
            "snap_frequency before simulating"
        )
    return int(round(spp))


_SIGNALS = ("r", "e", "e_r", "e_s", "u_r", "u", "x", "y")


def steady_state_harmonics(
    trace: SimTrace, signal: str, f0_hz: float, n_max: int
) -> np.ndarray:
    """Complex amplitudes of harmonics 1..n_max of a trace signal.

    Discards the settle periods, then applies a single-bin DFT at each
    k*f0 over an integer number of periods. Peak convention: a pure
    A*sin(2 pi f0 t + phi) yields A*exp(j*phi) in bin 1.
    """
    if signal not in _SIGNALS:
        raise ValueError(f"signal must be one of {_SIGNALS}")
    x = getattr(trace, signal)
    spp = _samples_per_period(trace.t_s, f0_hz)
    start = trace.settle_periods * spp
    periods = (len(x) - start) // spp
    if periods < 2:
        raise ValueError("trace too short: need settle + at least 2 analysis periods")
    seg = x[start : start + periods * spp]
    m = np.arange(seg.size)
    out = np.empty(n_max, dtype=complex)
    for k in range(1, n_max + 1):
        out[k - 1] = 1j * 2.0 / seg.size * np.sum(seg * np.exp(-2j * math.pi * k * m / spp))
    return out


VERDICT_NOMINAL = "NOMINAL"
VERDICT_MULTIPLE = "MULTIPLE"
VERDICT_QUIESCENT = "QUIESCENT"
VERDICT_MIXED = "MIXED"


@dataclass(frozen=True)
class ResetCensus:
    per_period: np.ndarray
    verdict: str


def count_resets_per_period(trace: SimTrace, f0_hz: float) -> ResetCensus:
    """Bucket reset events into steady-state reference periods.

    MULTIPLE: some period saw more than two resets (describing-function
    analysis invalid there). NOMINAL: exactly two per period. QUIESCENT:
    fewer than two in every period. MIXED otherwise.
    """
    spp = _samples_per_period(trace.t_s, f0_hz)
    start = trace.settle_periods * spp
    periods = (trace.n_samples - start) // spp
    if periods < 1:
        raise ValueError("trace too short for a steady-state census")
    idx = trace.reset_indices
    idx = idx[(idx >= start) & (idx < start + periods * spp)]
    counts = np.bincount((idx - start) // spp, minlength=periods)
    if np.any(counts > 2):
        verdict = VERDICT_MULTIPLE
    elif np.all(counts == 2):
        verdict = VERDICT_NOMINAL
    elif np.all(counts < 2):
        verdict = VERDICT_QUIESCENT
    else:
        verdict = VERDICT_MIXED
    return ResetCensus(counts, verdict)


def rms_error(trace: SimTrace, delay_compensation: int = 0) -> float:
    """RMS of r(t - tau) - y(t) over the steady-state window, with an
    optional integer-sample delay compensation tau (default none)."""
    if trace.f0_hz:
        spp = _samples_per_period(trace.t_s, trace.f0_hz)
        start = trace.settle_periods * spp
    else:
        start = min(trace.n_samples // 2, trace.n_samples - 1)
    tau = int(delay_compensation)
    r = trace.r
    y = trace.y
    lo = max(start, tau)
    diff = r[lo - tau : trace.n_samples - tau] - y[lo:]
    return float(np.sqrt(np.mean(diff**2)))


@dataclass(frozen=True)
class SweepResult:
    points: tuple[FrfPoint, ...]
    verdicts: tuple[str, ...]
    failures: tuple[tuple[float, str], ...] = ()

    def frf_arrays(self):
        f = np.array([p.freq_hz for p in self.points])
        h = np.array([p.response for p in self.points], dtype=complex)
        return f, h


def measure_frf_sweep(template: Scenario, freqs_hz, selector: str) -> SweepResult:
    """Empirical closed-loop FRF: one sine run per grid frequency.

    selector "S_er" divides the fundamental of the error by that of the
    reference; "T_yr" uses the measured output instead. Frequencies are
    snapped to an integer number of samples per period (leakage-free
    single-bin extraction). A diverging run is recorded as a failed point
    and the sweep continues. Runs are independent; results are ordered by
    the input grid.
    """
    if selector not in ("S_er", "T_yr"):
        raise ValueError("selector must be 'S_er' or 'T_yr'")
    signal = "e" if selector == "S_er" else "y"
    points: list[FrfPoint] = []
    verdicts: list[str] = []
    failures: list[tuple[float, str]] = []
    for f in np.asarray(freqs_hz, dtype=float):
        fs = snap_frequency(f, template.t_s)
        sc = replace(
            template,
            reference=replace(template.reference, kind="sine", f0_hz=fs),
            duration_s=None,
        )
        try:
            trace = run_closed_loop(sc)
            num = steady_state_harmonics(trace, signal, fs, 1)[0]
            den = steady_state_harmonics(trace, "r", fs, 1)[0]
            points.append(FrfPoint(fs, complex(num / den)))
            verdicts.append(count_resets_per_period(trace, fs).verdict)
        except SimulationDivergedError as err:
            failures.append((fs, str(err)))
    return SweepResult(tuple(points), tuple(verdicts), tuple(failures))


def write_trace_csv(trace: SimTrace, path) -> None:
    """Trace export: a `# t_s=` comment line, then one row per sample of
    t,r,e,e_s,u_r,u,x,y,reset_flag."""
    flags = np.zeros(trace.n_samples, dtype=int)
    flags[trace.reset_indices] = 1
    t = trace.t
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# t_s={trace.t_s:.12g}\n")
        fh.write("t,r,e,e_s,u_r,u,x,y,reset_flag\n")
        for k in range(trace.n_samples):
            fh.write(
                f"{t[k]:.9g},{trace.r[k]:.9g},{trace.e[k]:.9g},{trace.e_s[k]:.9g},"
                f"{trace.u_r[k]:.9g},{trace.u[k]:.9g},{trace.x[k]:.9g},"
                f"{trace.y[k]:.9g},{flags[k]}\n"
            )


def write_reset_log(trace: SimTrace, path) -> None:
    """Reset-event export: one sample index per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for idx in trace.reset_indices:
            fh.write(f"{int(idx)}\n")


def write_sweep_csv(result: SweepResult, selector: str, path) -> None:
    """Swept FRF export in the shared FRF CSV schema plus a selector
    comment line."""
    f, h = result.frf_arrays()
    phase = np.degrees(np.unwrap(np.angle(h)))
    mag = 20.0 * np.log10(np.abs(h))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# selector={selector}\n")
        fh.write("freq_hz,mag_db,phase_deg\n")
        for fi, mi, pi in zip(f, mag, phase):
            fh.write(f"{fi:.15g},{mi:.15g},{pi:.15g}\n")
