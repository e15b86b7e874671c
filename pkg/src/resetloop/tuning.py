"""Synthesis of constant-gain lead-in-phase (CgLp) reset stages and of the
shaping filter that regulates the reset trigger.

A CgLp stage is a proportional first-order reset element in series with a
gain correction k_c and a lead-lag; the reset action supplies phase lead at
the target crossover while the combination keeps the gain approximately
flat. tune_cglp resolves the two free corners (omega_l, omega_f) from a
desired phase lead and target frequency. The shaping filter divides the
stage's base-linear model by a notch pair and a fractional lead-lag, the
latter approximated by a low-order rational fit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import lti
from .lti import TWO_PI, FrfPoint, RationalTf
from .reset import PforeParams, ResetElement, make_pfore
from . import hosidf

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def omega_r_from_omega_l(omega_l_hz: float, gamma_r: float) -> float:
    """Reset-lag corner that places the fundamental-harmonic corner of the
    reset element at omega_l: omega_l / sqrt(1 + (4(1-g)/(pi(1+g)))^2)."""
    if omega_l_hz <= 0:
        raise ValueError("omega_l must be > 0")
    if not -1.0 < gamma_r <= 1.0:
        raise ValueError("gamma_r must lie in (-1, 1]")
    q = 4.0 * (1.0 - gamma_r) / (math.pi * (1.0 + gamma_r))
    return omega_l_hz / math.sqrt(1.0 + q * q)


def gain_correction(omega_l_hz: float, omega_f_hz: float) -> float:
    """Gain correction k_c = (omega_f - omega_l)/omega_f; together with the
    feedthrough d_r it satisfies k_c*(1 + d_r) = 1."""
    if not 0 < omega_l_hz < omega_f_hz:
        raise ValueError("need 0 < omega_l < omega_f")
    return (omega_f_hz - omega_l_hz) / omega_f_hz


@dataclass(frozen=True)
class CglpDesign:
    """Fully resolved CgLp stage."""

    phi_l_deg: float
    omega_target_hz: float
    gamma_r: float
    pfore: PforeParams
    k_c: float
    lead_lag: RationalTf

    def reset_element(self) -> ResetElement:
        return make_pfore(self.pfore)

    def to_config_dict(self) -> dict:
        """Fragment reusable in a case config file."""
        return {
            "phi_l_deg": self.phi_l_deg,
            "omega_target_hz": self.omega_target_hz,
            "gamma_r": self.gamma_r,
            "omega_l_hz": self.pfore.omega_l_hz,
            "omega_f_hz": self.pfore.omega_f_hz,
        }


def design_from_corners(
    omega_l_hz: float,
    omega_f_hz: float,
    gamma_r: float,
    phi_l_deg: float = 0.0,
    omega_target_hz: float = 0.0,
) -> CglpDesign:
    """Resolve the dependent CgLp quantities from explicit corners."""
    p = PforeParams(
        omega_r_from_omega_l(omega_l_hz, gamma_r), omega_l_hz, omega_f_hz, gamma_r
    )
    return CglpDesign(
        phi_l_deg,
        omega_target_hz,
        gamma_r,
        p,
        gain_correction(omega_l_hz, omega_f_hz),
        lti.lead_lag(omega_l_hz, omega_f_hz),
    )


def cglp_fundamental(design: CglpDesign, freqs_hz):
    """Fundamental-harmonic complex gain of the stage over a grid."""
    f = np.asarray(freqs_hz, dtype=float)
    h1 = hosidf._harmonic_gains_1d(design.reset_element(), TWO_PI * f, 1)
    return h1 * design.k_c * lti.eval_frf(design.lead_lag, f)


def _phase_at(u: float, ratio: float, gamma_r: float) -> float:
    """Fundamental phase (deg) of a unit-omega_l design at normalized
    frequency u = f/omega_l; depends only on (u, ratio, gamma_r)."""
    # scalar closed form of cglp_fundamental for a unit-omega_l design
    wr = TWO_PI * omega_r_from_omega_l(1.0, gamma_r)
    w = TWO_PI * u
    lam = w * w + wr * wr
    expa = math.exp(-math.pi * wr / w)
    delta = 1.0 + expa
    delta_r = 1.0 + gamma_r * expa
    th = -(2.0 * w * w / math.pi) * delta * (gamma_r * delta / (delta_r * lam) - 1.0 / lam)
    d_r = 1.0 / (ratio - 1.0)
    h1 = wr * (1.0 + 1j * th) / (1j * w + wr) + d_r
    k_c = (ratio - 1.0) / ratio
    c_l = (1.0 + 1j * u) / (1.0 + 1j * u / ratio)
    return math.degrees(cmath.phase(h1 * k_c * c_l))


def _golden_max(fun, lo: float, hi: float, tol: float = 1e-9) -> tuple[float, float]:
    """Golden-section maximizer on [lo, hi]; deterministic."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


@lru_cache(maxsize=4096)
def _peak_location(ratio: float, gamma_r: float) -> tuple[float, float]:
    """(u_peak, phase_peak_deg) of the normalized phase profile."""
    lu, phi = _golden_max(
        lambda lx: _phase_at(10.0**lx, ratio, gamma_r),
        -2.0,
        math.log10(ratio) + 2.0,
    )
    return 10.0**lu, phi


class CglpInfeasibleError(ValueError):
    def __init__(self, phi_l_deg: float, achievable_deg: float):
        super().__init__(
            f"requested phase lead {phi_l_deg:g} deg is infeasible; "
            f"achievable maximum is {achievable_deg:.2f} deg"
        )
        self.achievable_deg = achievable_deg


def tune_cglp(
    phi_l_deg: float,
    omega_target_hz: float,
    gamma_r: float = 0.0,
    peak_factor: float = 1.45,
    tol_deg: float = 1e-4,
) -> CglpDesign:
    """Resolve (omega_l, omega_f) so the stage's fundamental phase equals
    phi_l at the target frequency with the phase peak placed at least
    peak_factor times above it.

    The default peak placement (45% above the target) keeps the strongly
    nonlinear peak region out of the crossover band and reproduces the
    reference corner tables this tuner is validated against; it is
    configurable because the placement margin is a design choice, not a
    derived quantity.

    Search structure: for each candidate corner ratio omega_f/omega_l, a
    log-space bisection on omega_l pins the phase at the target (rising
    branch of the profile); an outer golden section on the log-ratio drives
    the phase-peak frequency to the peak_factor placement. Deterministic
    given the tolerances.
    """
    if not 0.0 < phi_l_deg < 60.0:
        raise ValueError("phase lead must lie in (0, 60) deg")
    if omega_target_hz <= 0:
        raise ValueError("target frequency must be > 0")
    if peak_factor < 1.0:
        raise ValueError("peak_factor must be >= 1")

    log_r_lo, log_r_hi = math.log10(1.0 + 1e-4), 3.0
    u_hi, phi_hi = _peak_location(10.0**log_r_hi, gamma_r)
    max_achievable = _phase_at(u_hi / peak_factor, 10.0**log_r_hi, gamma_r)
    if phi_l_deg > max_achievable:
        raise CglpInfeasibleError(phi_l_deg, max_achievable)

    def solve_omega_l(ratio: float) -> float | None:
        """omega_l putting the target on the rising branch at phi_l (Hz)."""
        u_pk, phi_pk = _peak_location(ratio, gamma_r)
        if phi_pk < phi_l_deg:
            return None
        # rising branch: phase increases with u up to u_pk
        lo, hi = math.log10(u_pk) - 8.0, math.log10(u_pk)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if _phase_at(10.0**mid, ratio, gamma_r) < phi_l_deg:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13:
                break
        u = 10.0 ** (0.5 * (lo + hi))
        return omega_target_hz / u

    def placement_error(log_ratio: float) -> float:
        ratio = 10.0**log_ratio
        wl = solve_omega_l(ratio)
        if wl is None:
            return -1e6  # infeasible ratio: push the search upward
        u_pk, _ = _peak_location(ratio, gamma_r)
        peak_hz = u_pk * wl
        return -abs(math.log10(peak_hz / (peak_factor * omega_target_hz)))

    log_ratio, _ = _golden_max(placement_error, log_r_lo, log_r_hi, tol=1e-10)
    ratio = 10.0**log_ratio
    wl = solve_omega_l(ratio)
    if wl is None:
        raise CglpInfeasibleError(phi_l_deg, max_achievable)
    design = design_from_corners(wl, ratio * wl, gamma_r, phi_l_deg, omega_target_hz)

    achieved = math.degrees(
        cmath.phase(complex(cglp_fundamental(design, [omega_target_hz])[0]))
    )
    if abs(achieved - phi_l_deg) > max(tol_deg, 0.1):
        raise CglpInfeasibleError(phi_l_deg, achieved)
    return design


@dataclass(frozen=True)
class ShapingParams:
    """Shaping-filter tuning: notch corners (Hz), fractional exponent, Q."""

    omega_low_hz: float
    omega_high_hz: float
    lam: float
    q: float
    fit_order: int = 2
    mirrored_damping: bool = False

    def __post_init__(self):
        if not 0 < self.omega_low_hz < self.omega_high_hz:
            raise ValueError("need 0 < omega_low < omega_high")
        if self.q <= 0:
            raise ValueError("Q must be > 0")
        if self.fit_order < 1:
            raise ValueError("fit order must be >= 1")


class RationalFitError(RuntimeError):
    """The weighted least-squares normal equations were rank deficient."""


@dataclass
class FitReport:
    converged: bool
    stabilized: bool
    n_iter: int
    residuals: list[float] = field(default_factory=list)


def fit_rational_frf(
    samples, num_order: int, den_order: int, weights=None
) -> tuple[RationalTf, FitReport]:
    """Fit num/den polynomial coefficients to complex FRF samples.

    Iteratively reweighted linear least squares (weights 1/|den|^2 of the
    previous iterate) linearizes the quotient; iteration stops after 20
    rounds, on a relative coefficient update below 1e-10, or as soon as the
    true residual stops decreasing (the best iterate is kept and the report
    is flagged non-converged). Unstable poles are reflected into the left
    half-plane and the numerator refit, with the report flagged.
    """
    if isinstance(samples, tuple) and len(samples) == 2:
        f = np.asarray(samples[0], dtype=float)
        h = np.asarray(samples[1], dtype=complex)
    else:
        pts = list(samples)
        f = np.array([p.freq_hz for p in pts])
        h = np.array([p.response for p in pts], dtype=complex)
    if np.any(np.diff(f) <= 0):
        raise ValueError("sample frequencies must be strictly increasing")
    n_min = 4 * (num_order + den_order)
    if f.size < n_min:
        raise ValueError(f"need at least {n_min} samples for orders {num_order}/{den_order}")
    w0 = np.ones(f.size) if weights is None else np.asarray(weights, dtype=float)
    s = 1j * TWO_PI * f

    def vander(order):
        return np.column_stack([s**k for k in range(order, -1, -1)])

    vn = vander(num_order)
    vd = vander(den_order)  # leading column is s**den_order (coefficient fixed to 1)

    def solve(wi):
        a = np.hstack([vn, -h[:, None] * vd[:, 1:]])
        rhs = h * vd[:, 0]
        aw = a * np.sqrt(wi)[:, None]
        rw = rhs * np.sqrt(wi)
        a_ri = np.vstack([aw.real, aw.imag])
        r_ri = np.concatenate([rw.real, rw.imag])
        sol, _, rank, _ = np.linalg.lstsq(a_ri, r_ri, rcond=None)
        if rank < a_ri.shape[1]:
            raise RationalFitError("rank-deficient normal equations in rational fit")
        num = sol[: num_order + 1]
        den = np.concatenate([[1.0], sol[num_order + 1 :]])
        return num, den

    def true_residual(num, den):
        model = np.polyval(num, s) / np.polyval(den, s)
        return float(np.sqrt(np.sum(w0 * np.abs(h - model) ** 2) / np.sum(w0 * np.abs(h) ** 2)))

    report = FitReport(converged=False, stabilized=False, n_iter=0)
    wi = w0.copy()
    best = None
    prev_coeffs = None
    for it in range(20):
        num, den = solve(wi)
        res = true_residual(num, den)
        report.n_iter = it + 1
        if best is not None and res > best[0]:
            # plateau counts as converged; a real increase keeps the best
            # iterate and leaves the warning flag unset
            report.converged = res <= best[0] * (1.0 + 1e-6)
            break
        report.residuals.append(res)
        best = (res, num, den)
        coeffs = np.concatenate([num, den])
        if prev_coeffs is not None and prev_coeffs.size == coeffs.size:
            upd = np.linalg.norm(coeffs - prev_coeffs) / max(np.linalg.norm(coeffs), 1e-300)
            if upd < 1e-10:
                report.converged = True
                break
        prev_coeffs = coeffs
        wi = w0 / np.maximum(np.abs(np.polyval(den, s)) ** 2, 1e-300)
    else:
        report.converged = True

    _, num, den = best
    poles = np.roots(den)
    if np.any(poles.real > 0):
        poles = np.where(poles.real > 0, -poles.conj(), poles)
        den = np.real(np.poly(poles))
        # refit the numerator against the stabilized denominator
        dv = np.polyval(den, s)
        aw = (vn / dv[:, None]) * np.sqrt(w0)[:, None]
        rw = h * np.sqrt(w0)
        a_ri = np.vstack([aw.real, aw.imag])
        r_ri = np.concatenate([rw.real, rw.imag])
        num, _, rank, _ = np.linalg.lstsq(a_ri, r_ri, rcond=None)
        if rank < a_ri.shape[1]:
            raise RationalFitError("rank-deficient numerator refit after stabilization")
        report.stabilized = True
    return RationalTf(tuple(num), tuple(den)), report


def fractional_lead_lag_frf(
    omega_low_hz: float, omega_high_hz: float, lam: float, freqs_hz
) -> np.ndarray:
    """((1 + s/wL)/(1 + s/wH))^lam evaluated on the jw axis (principal
    branch; the base has positive real part so no branch crossing occurs)."""
    f = np.asarray(freqs_hz, dtype=float)
    s = 1j * TWO_PI * f
    base = (1.0 + s / (TWO_PI * omega_low_hz)) / (1.0 + s / (TWO_PI * omega_high_hz))
    return np.exp(lam * np.log(base))


def approximate_fractional_lead_lag(
    omega_low_hz: float,
    omega_high_hz: float,
    lam: float,
    order: int = 2,
    grid_points: int = 60,
) -> tuple[RationalTf, FitReport]:
    """Rational approximation of the fractional lead-lag over a log grid
    spanning [omega_low/5, 5*omega_high]. A zero exponent is unity exactly
    (nothing to fit)."""
    if lam == 0.0:
        return lti.constant(1.0), FitReport(converged=True, stabilized=False, n_iter=0)
    f = np.logspace(
        math.log10(omega_low_hz / 5.0), math.log10(5.0 * omega_high_hz), grid_points
    )
    h = fractional_lead_lag_frf(omega_low_hz, omega_high_hz, lam, f)
    return fit_rational_frf((f, h), order, order)


def _shaping_notches(p: ShapingParams) -> tuple[RationalTf, RationalTf]:
    """Notch pair bounding the shaped band. As printed, the damping is
    asymmetric: unity-coefficient terms in the first notch numerator and the
    second notch denominator, 1/Q in the opposite positions;
    mirrored_damping swaps them (sensitivity-study variant)."""
    if p.mirrored_damping:
        n1 = lti.notch(p.omega_low_hz, p.q, 1.0)
        n2 = lti.notch(p.omega_high_hz, 1.0, p.q)
    else:
        n1 = lti.notch(p.omega_low_hz, 1.0, p.q)
        n2 = lti.notch(p.omega_high_hz, p.q, 1.0)
    return n1, n2


def make_shaping_filter(
    p: ShapingParams, r_bl: RationalTf
) -> tuple[RationalTf, FitReport]:
    """Trigger-shaping filter: R_bl / (N_s1 * N_s2 * C_L).

    r_bl is the base-linear model of the reset stage being shaped. The
    fractional lead-lag C_L is replaced by its rational approximation before
    composing the quotient, so the result is directly realizable.
    """
    if not r_bl.is_proper():
        raise ValueError("base-linear stage model must be proper")
    n1, n2 = _shaping_notches(p)
    cl_fit, report = approximate_fractional_lead_lag(
        p.omega_low_hz, p.omega_high_hz, p.lam, p.fit_order
    )
    den_chain = lti.series(lti.series(n1, n2), cl_fit)
    cs = RationalTf(
        np.polymul(r_bl.num, den_chain.den),
        np.polymul(r_bl.den, den_chain.num),
        r_bl.delay,
    )
    return cs, report


def shaping_filter_frf(p: ShapingParams, r_bl: RationalTf, freqs_hz) -> np.ndarray:
    """Exact (fractional, unapproximated) shaping-filter response; useful as
    an oracle for the rational approximation."""
    f = np.asarray(freqs_hz, dtype=float)
    n1, n2 = _shaping_notches(p)
    denom = (
        lti.eval_frf(n1, f)
        * lti.eval_frf(n2, f)
        * fractional_lead_lag_frf(p.omega_low_hz, p.omega_high_hz, p.lam, f)
    )
    return lti.eval_frf(r_bl, f) / denom
