"""Designing a constant-gain lead-in-phase (CgLp) stage.

A CgLp pairs a proportional reset lag with a linear lead-lag and a gain
correction so the fundamental gain stays flat while the reset action
supplies phase lead. Given a desired lead and a target crossover, the
tuner resolves the two free corners; everything else follows from closed
forms. The phase peak is deliberately parked above the target so the
strongly nonlinear peak region stays out of the crossover band.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from resetloop.tuning import cglp_fundamental, tune_cglp

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

target_hz = 300.0
fig, (ax_m, ax_p) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
freqs = np.logspace(1, 3.3, 400)

for phi in (5.0, 10.0, 15.0, 20.0):
    design = tune_cglp(phi, target_hz)
    h1 = cglp_fundamental(design, freqs)
    ax_m.semilogx(freqs, 20 * np.log10(np.abs(h1)), label=f"{phi:.0f} deg")
    ax_p.semilogx(freqs, np.angle(h1, deg=True))
    p = design.pfore
    achieved = np.angle(cglp_fundamental(design, [target_hz])[0], deg=True)
    print(f"lead {phi:4.1f} deg @ {target_hz:.0f} Hz -> corners "
          f"omega_l={p.omega_l_hz:7.2f}  omega_f={p.omega_f_hz:7.2f}  "
          f"omega_r={p.omega_r_hz:7.2f}  k_c={design.k_c:.4f}  "
          f"achieved={achieved:.3f} deg")
    # the gain correction and the feedthrough cancel exactly at DC
    assert abs(design.k_c * (1 + p.d_r) - 1) < 1e-12

for ax in (ax_m, ax_p):
    ax.axvline(target_hz, color="k", alpha=0.3, lw=0.8)
    ax.grid(True, which="both", alpha=0.3)
ax_m.set_ylabel("fundamental gain (dB)")
ax_m.set_ylim(-3, 4)
ax_m.legend(title="phase lead")
ax_p.set_ylabel("fundamental phase (deg)")
ax_p.set_xlabel("frequency (Hz)")
fig.tight_layout()
fig.savefig(OUT / "02_cglp_family.svg")
print(f"\nwrote {OUT / '02_cglp_family.svg'}")
