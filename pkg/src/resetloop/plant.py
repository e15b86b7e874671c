"""Synthetic modal plant models and FRF file I/O.

The shipped default is a collocated flexure stage stand-in: a sum of
lightly damped second-order modes with unit DC gain and a short pure
delay. Its mode placement follows the structure of the measured device
the package targets; damping, residues, and delay are configurable and
are not calibrated values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lti
from .lti import FrfPoint, RationalTf, TWO_PI


@dataclass(frozen=True)
class Mode:
    """One structural mode: natural frequency, damping ratio, residue sign,
    and relative residue magnitude (higher modes typically couple less)."""

    freq_hz: float
    damping: float
    sign: int = 1
    weight: float = 1.0

    def __post_init__(self):
        if self.freq_hz <= 0:
            raise ValueError("mode frequency must be > 0")
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping ratio must lie in (0, 1)")
        if self.sign not in (-1, 1):
            raise ValueError("residue sign must be +1 or -1")
        if self.weight <= 0:
            raise ValueError("residue weight must be > 0")


@dataclass(frozen=True)
class ModalPlant:
    """DC gain, ordered mode list, and pure delay of a modal model."""

    dc_gain: float = 1.0
    modes: tuple[Mode, ...] = ()
    delay_s: float = 0.0

    def __post_init__(self):
        if self.dc_gain <= 0:
            raise ValueError("DC gain must be > 0")
        if self.delay_s < 0:
            raise ValueError("delay must be >= 0")
        freqs = [m.freq_hz for m in self.modes]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("mode frequencies must be strictly increasing")

    @property
    def first_resonance_hz(self) -> float | None:
        return self.modes[0].freq_hz if self.modes else None


@dataclass(frozen=True)
class BuiltPlant:
    tf: RationalTf
    interlaced: bool
    spec: ModalPlant


def default_plant(
    damping: float = 0.015, delay_s: float = 240e-6, dc_gain: float = 1.0
) -> ModalPlant:
    """Shipped stand-in stage: modes at 710, 1150, and 2582 Hz.

    Residue weights fall steeply with mode frequency (collocated stages
    couple high modes weakly) and the pure delay lumps actuator-amplifier
    dynamics; both are tuning choices, not identified values. The delay is
    what gives the loop its dominant phase constraint well below the first
    resonance.
    """
    return ModalPlant(
        dc_gain=dc_gain,
        modes=(
            Mode(710.0, damping, weight=1.0),
            Mode(1150.0, damping, weight=0.5),
            Mode(2582.0, damping, weight=0.03),
        ),
        delay_s=delay_s,
    )


def build_modal_plant(m: ModalPlant) -> BuiltPlant:
    """Sum of second-order modal sections scaled to the requested DC gain.

    Each mode contributes sign_i * c * w_i^2/(s^2 + 2 z_i w_i s + w_i^2)
    with a common magnitude c chosen so the DC gain matches. The result
    carries the plant delay as metadata and a flag reporting whether the
    pole-zero pattern interlaces (collocated structure).
    """
    if not m.modes:
        return BuiltPlant(RationalTf((m.dc_gain,), (1.0,), m.delay_s), True, m)
    weight_sum = sum(mode.sign * mode.weight for mode in m.modes)
    if weight_sum == 0:
        raise ValueError("signed residue weights sum to zero; DC gain cannot be matched")
    c = m.dc_gain / weight_sum

    num = np.zeros(1)
    den = np.ones(1)
    sections = []
    for mode in m.modes:
        w = TWO_PI * mode.freq_hz
        k = mode.sign * mode.weight * c
        sections.append(
            (np.array([k * w * w]), np.array([1.0, 2.0 * mode.damping * w, w * w]))
        )
    for sn, sd in sections:
        num = np.polyadd(np.polymul(num, sd), np.polymul(sn, den))
        den = np.polymul(den, sd)
    tf = RationalTf(tuple(num), tuple(den), m.delay_s)

    zeros = np.roots(tf.num)
    zero_freqs = np.sort(np.abs(zeros.imag[zeros.imag > 0])) / TWO_PI
    pole_freqs = np.array([mode.freq_hz for mode in m.modes])
    interlaced = len(zero_freqs) == len(pole_freqs) - 1 and all(
        pole_freqs[i] < zero_freqs[i] < pole_freqs[i + 1]
        for i in range(len(zero_freqs))
    )
    return BuiltPlant(tf, interlaced, m)


def save_frf_csv(path, points) -> None:
    """Write the shared FRF CSV schema: freq_hz,mag_db,phase_deg (unwrapped)."""
    pts = list(points)
    f = np.array([p.freq_hz for p in pts])
    h = np.array([p.response for p in pts], dtype=complex)
    phase = np.degrees(np.unwrap(np.angle(h)))
    mag = 20.0 * np.log10(np.abs(h))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("freq_hz,mag_db,phase_deg\n")
        for fi, mi, pi in zip(f, mag, phase):
            fh.write(f"{fi:.15g},{mi:.15g},{pi:.15g}\n")


class FrfCsvError(ValueError):
    """Malformed FRF CSV; the message names the offending line."""


def load_frf_csv(path) -> list[FrfPoint]:
    """Parse the shared FRF CSV schema into frequency-response points.

    Validates the header, per-row arity and finiteness, and a strictly
    increasing frequency grid; errors carry the 1-based line number.
    """
    points: list[FrfPoint] = []
    prev_f = 0.0
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "freq_hz,mag_db,phase_deg":
            raise FrfCsvError(
                f"line 1: expected header 'freq_hz,mag_db,phase_deg', got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise FrfCsvError(f"line {lineno}: expected 3 fields, got {len(parts)}")
            try:
                f, mag_db, phase_deg = (float(v) for v in parts)
            except ValueError:
                raise FrfCsvError(f"line {lineno}: non-numeric field") from None
            if not all(map(math.isfinite, (f, mag_db, phase_deg))):
                raise FrfCsvError(f"line {lineno}: non-finite value")
            if f <= prev_f:
                raise FrfCsvError(f"line {lineno}: frequency grid not strictly increasing")
            prev_f = f
            resp = 10.0 ** (mag_db / 20.0) * complex(
                math.cos(math.radians(phase_deg)), math.sin(math.radians(phase_deg))
            )
            points.append(FrfPoint(f, resp))
    return points
