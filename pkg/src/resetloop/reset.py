"""Reset elements: hybrid first-order filters whose state is scaled when a
trigger signal crosses zero.

A reset element integrates linear flow dynamics (A_r, B_r, C_r, D_r) between
trigger zero crossings; at a crossing the state is multiplied by the diagonal
jump matrix A_rho. With A_rho = I the element degenerates to its base-linear
filter. The trigger defaults to the element input but may be supplied
separately (shaped-trigger operation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .lti import TWO_PI, RationalTf


class SimulationDivergedError(RuntimeError):
    """A state or signal became non-finite; carries the sample index."""

    def __init__(self, message: str, sample_index: int):
        super().__init__(message)
        self.sample_index = sample_index


@dataclass(frozen=True)
class ResetElement:
    """State-space reset element (flow matrices in rad/s units).

    a_rho must be diagonal with every |gamma_i| <= 1. All shipped
    constructors are first order, but the representation is general.
    """

    a_r: np.ndarray
    b_r: np.ndarray
    c_r: np.ndarray
    d_r: float
    a_rho: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_r, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("a_r must be square")
        b = np.asarray(self.b_r, dtype=float).reshape(n)
        c = np.asarray(self.c_r, dtype=float).reshape(n)
        rho = np.atleast_2d(np.asarray(self.a_rho, dtype=float))
        if rho.shape != (n, n):
            raise ValueError("a_rho must match the state dimension")
        if np.any(rho - np.diag(np.diag(rho)) != 0.0):
            raise ValueError("a_rho must be diagonal")
        if np.any(np.abs(np.diag(rho)) > 1.0):
            raise ValueError("reset factors must satisfy |gamma| <= 1")
        for name, val in (("a_r", a), ("b_r", b), ("c_r", c), ("a_rho", rho)):
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "a_r", a)
        object.__setattr__(self, "b_r", b)
        object.__setattr__(self, "c_r", c)
        object.__setattr__(self, "d_r", float(self.d_r))
        object.__setattr__(self, "a_rho", rho)

    @property
    def n_states(self) -> int:
        return self.a_r.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        return np.diag(self.a_rho)


@dataclass(frozen=True)
class PforeParams:
    """Proportional first-order reset element parameters (Hz).

    omega_l/omega_f are the lead-lag corners the element pairs with;
    the feedthrough d_r = omega_l/(omega_f - omega_l) flattens the
    first-harmonic gain.
    """

    omega_r_hz: float
    omega_l_hz: float
    omega_f_hz: float
    gamma_r: float

    def __post_init__(self):
        if not 0 < self.omega_l_hz < self.omega_f_hz:
            raise ValueError("need 0 < omega_l < omega_f (feedthrough singular otherwise)")
        if self.omega_r_hz <= 0:
            raise ValueError("omega_r must be > 0")
        if not -1.0 <= self.gamma_r <= 1.0:
            raise ValueError("gamma_r must lie in [-1, 1]")

    @property
    def d_r(self) -> float:
        return self.omega_l_hz / (self.omega_f_hz - self.omega_l_hz)


def make_gfore(omega_alpha_hz: float, omega_beta_hz: float, gamma_r: float) -> ResetElement:
    """Generalized first-order reset element.

    Flow is the lag 2*pi*omega_beta/(s + 2*pi*omega_alpha); omega_alpha = 0
    with omega_beta = 1/(2*pi) and gamma_r = 0 is the classic resetting
    integrator (Clegg).
    """
    if omega_alpha_hz < 0 or omega_beta_hz <= 0:
        raise ValueError("need omega_alpha >= 0 and omega_beta > 0")
    if not -1.0 < gamma_r < 1.0:
        raise ValueError("gamma_r must lie in (-1, 1)")
    return ResetElement(
        a_r=np.array([[-TWO_PI * omega_alpha_hz]]),
        b_r=np.array([TWO_PI * omega_beta_hz]),
        c_r=np.array([1.0]),
        d_r=0.0,
        a_rho=np.array([[gamma_r]]),
    )


def clegg() -> ResetElement:
    """Resetting integrator: state jumps to zero at trigger zero crossings."""
    return make_gfore(0.0, 1.0 / TWO_PI, 0.0)


def unity_stage() -> ResetElement:
    """Linear unity feedthrough in reset-element form.

    Base-linear model is exactly 1, all higher harmonics vanish, and the
    state never leaves zero so no resets ever fire; used for baseline
    designs that carry no reset action.
    """
    return ResetElement(
        a_r=np.array([[-1.0]]),
        b_r=np.array([0.0]),
        c_r=np.array([0.0]),
        d_r=1.0,
        a_rho=np.array([[1.0]]),
    )


def make_pfore(p: PforeParams) -> ResetElement:
    """Proportional FORE: first-order reset lag plus feedthrough d_r."""
    wr = TWO_PI * p.omega_r_hz
    return ResetElement(
        a_r=np.array([[-wr]]),
        b_r=np.array([1.0]),
        c_r=np.array([wr]),
        d_r=p.d_r,
        a_rho=np.array([[p.gamma_r]]),
    )


def base_linear(r: ResetElement) -> RationalTf:
    """Transfer function of the element with resets disabled:
    C_r (sI - A_r)^-1 B_r + D_r."""
    if r.n_states == 1:
        a = float(r.a_r[0, 0])
        cb = float(r.c_r[0] * r.b_r[0])
        return RationalTf((r.d_r, cb - r.d_r * a), (1.0, -a))
    num, den = scipy.signal.ss2tf(
        r.a_r, r.b_r.reshape(-1, 1), r.c_r.reshape(1, -1), [[r.d_r]]
    )
    return RationalTf(tuple(np.atleast_2d(num)[0]), tuple(den))


@dataclass
class ResetState:
    """Mutable per-run state of one reset element instance.

    Owned exclusively by a single simulation run. prev_trigger/prev_input
    hold the previous trigger and input samples (the flow update is
    trapezoidal, so it needs the input at both interval ends); events logs
    the sample indices at which the state was reset.
    """

    x: np.ndarray
    prev_trigger: float = 0.0
    prev_input: float = 0.0
    events: list[int] = field(default_factory=list)
    k: int = 0
    _flow: tuple | None = field(default=None, repr=False)


def make_state(r: ResetElement) -> ResetState:
    return ResetState(x=np.zeros(r.n_states))


def _flow_matrices(r: ResetElement, t_s: float):
    """Trapezoidal one-step update matrices: x+ = M x + K*(e_prev + e_now)."""
    n = r.n_states
    h = 0.5 * t_s
    if n == 1:
        a = float(r.a_r[0, 0])
        b = float(r.b_r[0])
        d = 1.0 - h * a
        return (1.0 + h * a) / d, h * b / d
    eye = np.eye(n)
    lhs = np.linalg.inv(eye - h * r.a_r)
    return lhs @ (eye + h * r.a_r), lhs @ (h * r.b_r)


def step_reset(
    state: ResetState, r: ResetElement, e_r: float, e_s: float, t_s: float
) -> float:
    """Advance the element one sample: reset check, then trapezoidal flow.

    The reset fires when the trigger sample changes sign relative to the
    previous nonzero trigger sample (a sample exactly at zero counts as a
    crossing) and the jump would actually change the state. Resets are
    quantized to sample instants; there is no sub-sample crossing
    refinement. Returns the output C_r x + D_r e_r after the flow update.
    """
    if not (math.isfinite(e_r) and math.isfinite(e_s)):
        raise SimulationDivergedError(
            f"non-finite reset-element input at sample {state.k}", state.k
        )
    if state._flow is None or state._flow[0] != t_s:
        state._flow = (t_s, *_flow_matrices(r, t_s))
    _, m, kv = state._flow

    prev = state.prev_trigger
    crossed = prev != 0.0 and (e_s == 0.0 or (e_s > 0.0) != (prev > 0.0))
    if crossed:
        jumped = r.a_rho @ state.x if r.n_states > 1 else r.a_rho[0, 0] * state.x
        if not np.array_equal(jumped, state.x):
            state.x = np.asarray(jumped, dtype=float).reshape(r.n_states)
            state.events.append(state.k)

    if r.n_states == 1:
        state.x = m * state.x + kv * (state.prev_input + e_r)
        u = float(r.c_r[0] * state.x[0] + r.d_r * e_r)
    else:
        state.x = m @ state.x + kv * (state.prev_input + e_r)
        u = float(r.c_r @ state.x + r.d_r * e_r)

    if not np.all(np.isfinite(state.x)):
        raise SimulationDivergedError(
            f"reset-element state diverged at sample {state.k}", state.k
        )
    state.prev_trigger = e_s
    state.prev_input = e_r
    state.k += 1
    return u


def simulate_element(
    r: ResetElement, e_r, t_s: float, e_s=None
) -> tuple[np.ndarray, list[int]]:
    """Drive an isolated element with input e_r (and optional separate
    trigger e_s); returns the output sequence and the reset-event log."""
    e_r = np.asarray(e_r, dtype=float)
    e_s = e_r if e_s is None else np.asarray(e_s, dtype=float)
    if e_s.shape != e_r.shape:
        raise ValueError("input and trigger must have equal lengths")
    st = make_state(r)
    out = np.empty_like(e_r)
    for i in range(e_r.size):
        out[i] = step_reset(st, r, float(e_r[i]), float(e_s[i]), t_s)
    return out, st.events
