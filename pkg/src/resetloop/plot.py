"""Plot-data emission: turns CSV artifacts into gnuplot-ready .dat files
plus static SVG images."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class ArtifactError(ValueError):
    """Artifact file missing or not of the declared kind."""


def _read_csv(path, expected_header: str, kind: str):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"artifact not found: {path}")
    comments = []
    with open(path, "r", encoding="utf-8") as fh:
        line = fh.readline()
        while line.startswith("#"):
            comments.append(line.strip())
            line = fh.readline()
        header = line.strip()
        if header != expected_header:
            raise ArtifactError(
                f"{path}: not a {kind} artifact (header {header!r}, "
                f"expected {expected_header!r})"
            )
        rows = [
            [float(v) for v in ln.strip().split(",")]
            for ln in fh
            if ln.strip()
        ]
    return np.array(rows), comments


def _series_label(path: Path) -> str:
    # out/<case>/<command>/<file>.csv -> case name when available
    parts = path.parts
    return parts[-3] if len(parts) >= 3 else path.stem


def emit_plot_data(artifacts, kind: str, out_dir=".") -> list[Path]:
    """Write plot-ready files for one or more CSV artifacts.

    kinds: "bode" (single FRF file -> magnitude/phase panels),
    "sensitivity" (one or more FRF files -> labeled magnitude overlay),
    "trace" (time-domain trace -> signals plus reset-event markers).
    Returns the list of files written.
    """
    paths = [Path(p) for p in (artifacts if isinstance(artifacts, (list, tuple)) else [artifacts])]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if kind == "bode":
        if len(paths) != 1:
            raise ArtifactError("bode takes exactly one artifact")
        return _emit_bode(paths[0], out_dir)
    if kind == "sensitivity":
        return _emit_sensitivity(paths, out_dir)
    if kind == "trace":
        if len(paths) != 1:
            raise ArtifactError("trace takes exactly one artifact")
        return _emit_trace(paths[0], out_dir)
    raise ArtifactError(f"unknown plot kind {kind!r}")


def _emit_bode(path: Path, out_dir: Path) -> list[Path]:
    data, _ = _read_csv(path, "freq_hz,mag_db,phase_deg", "bode")
    dat = out_dir / f"{path.stem}_bode.dat"
    with open(dat, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# freq_hz mag_db phase_deg\n")
        for f, m, p in data:
            fh.write(f"{f:.10g} {m:.10g} {p:.10g}\n")
    fig, (ax_m, ax_p) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax_m.semilogx(data[:, 0], data[:, 1])
    ax_m.set_ylabel("magnitude (dB)")
    ax_m.grid(True, which="both", alpha=0.3)
    ax_p.semilogx(data[:, 0], data[:, 2])
    ax_p.set_ylabel("phase (deg)")
    ax_p.set_xlabel("frequency (Hz)")
    ax_p.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    svg = out_dir / f"{path.stem}_bode.svg"
    fig.savefig(svg)
    plt.close(fig)
    return [dat, svg]


def _emit_sensitivity(paths: list[Path], out_dir: Path) -> list[Path]:
    series = []
    for p in paths:
        data, _ = _read_csv(p, "freq_hz,mag_db,phase_deg", "sensitivity")
        series.append((_series_label(p), data))
    dat = out_dir / "sensitivity_overlay.dat"
    with open(dat, "w", encoding="utf-8", newline="\n") as fh:
        for label, data in series:
            fh.write(f"# series {label}\n# freq_hz mag_db\n")
            for f, m, _ in data:
                fh.write(f"{f:.10g} {m:.10g}\n")
            fh.write("\n\n")  # gnuplot index separator
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, data in series:
        ax.semilogx(data[:, 0], data[:, 1], label=label)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("|S| (dB)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    svg = out_dir / "sensitivity_overlay.svg"
    fig.savefig(svg)
    plt.close(fig)
    return [dat, svg]


def _emit_trace(path: Path, out_dir: Path) -> list[Path]:
    data, _ = _read_csv(path, "t,r,e,e_s,u_r,u,x,y,reset_flag", "trace")
    dat = out_dir / f"{path.stem}_trace.dat"
    with open(dat, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# t r e e_s u_r u x y reset_flag\n")
        for row in data:
            fh.write(" ".join(f"{v:.10g}" for v in row) + "\n")
    t = data[:, 0]
    resets = data[:, 8] > 0
    fig, (ax_y, ax_u) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_y.plot(t, data[:, 1], label="r", alpha=0.7)
    ax_y.plot(t, data[:, 7], label="y")
    ax_y.set_ylabel("position")
    ax_y.legend()
    ax_y.grid(alpha=0.3)
    ax_u.plot(t, data[:, 4], label="u_r")
    ax_u.plot(t[resets], data[resets, 4], "k.", markersize=4, label="reset")
    ax_u.set_ylabel("reset stage output")
    ax_u.set_xlabel("time (s)")
    ax_u.legend()
    ax_u.grid(alpha=0.3)
    fig.tight_layout()
    svg = out_dir / f"{path.stem}_trace.svg"
    fig.savefig(svg)
    plt.close(fig)
    return [dat, svg]
