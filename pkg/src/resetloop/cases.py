"""Declarative case configs and the batch case runner.

A case file is a TOML document describing one closed-loop design: the
plant (modal parameters or an FRF CSV), the damping and tracking
controllers, an optional CgLp stage (explicit corners or an auto-tune
request), an optional trigger-shaping filter, plus analysis-grid and
simulation defaults. The shipped presets (case1 .. case7) form the
bandwidth ladder on the default synthetic plant: case1 is the linear
baseline, cases 2-5 add 5/10/15/20 degrees of reset phase lead, and
cases 6/7 add the trigger-shaping filter to cases 4/5.
"""

from __future__ import annotations

import io
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from . import hosidf, lti, plant as plant_mod, sim, tuning
from .hosidf import LoopModel
from .lti import RationalTf, TrackingParams
from .reset import base_linear, unity_stage
from .sim import NoiseSpec, Scenario, SignalSpec


class ConfigError(ValueError):
    """Invalid case config; the message carries a path to the field."""


@dataclass(frozen=True)
class PlantSpec:
    kind: str  # "modal" | "frf_csv"
    dc_gain: float = 1.0
    delay_s: float = 0.0
    modes: tuple[tuple[float, float, int, float], ...] = ()
    path: str | None = None


@dataclass(frozen=True)
class DampingSpec:
    gamma: float = 1.0
    corner_multiple: float = 8.0
    resonance_hz: float | None = None


@dataclass(frozen=True)
class CglpSpec:
    gamma_r: float = 0.0
    omega_l_hz: float | None = None
    omega_f_hz: float | None = None
    phi_l_deg: float | None = None
    omega_target_hz: float | None = None

    def needs_tuning(self) -> bool:
        return self.omega_l_hz is None or self.omega_f_hz is None


@dataclass(frozen=True)
class ShapingSpec:
    omega_low_hz: float
    omega_high_hz: float
    lam: float
    q: float
    fit_order: int = 2


@dataclass(frozen=True)
class GridSpec:
    fmin_hz: float = 1.0
    fmax_hz: float = 8000.0
    points_per_decade: int = 200

    def freqs(self) -> np.ndarray:
        return lti.log_grid(self.fmin_hz, self.fmax_hz, self.points_per_decade)


@dataclass(frozen=True)
class ScenarioSpec:
    t_s: float = sim.DEFAULT_SAMPLE_TIME
    duration_s: float | None = None
    settle_periods: int = 10
    analysis_periods: int = 4
    seed: int = 1
    reference_kind: str = "sine"
    reference_f0_hz: float = 80.0
    reference_amplitude: float = 1.0
    reference_f1_hz: float | None = None
    noise_rms: float = 0.0
    disturbance_kind: str | None = None
    disturbance_f0_hz: float = 0.0
    disturbance_amplitude: float = 0.0
    chain_order: str = "lead-first"


@dataclass(frozen=True)
class CaseConfig:
    name: str
    plant: PlantSpec
    damping: DampingSpec
    tracking: TrackingParams
    cglp: CglpSpec | None = None
    shaping: ShapingSpec | None = None
    grid: GridSpec = GridSpec()
    scenario: ScenarioSpec = ScenarioSpec()


def _req(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"{where}.{key}: missing required field")
    return table[key]


def _num(val, where: str, positive=False, nonneg=False) -> float:
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ConfigError(f"{where}: expected a number, got {val!r}")
    v = float(val)
    if positive and not v > 0:
        raise ConfigError(f"{where}: must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{where}: must be >= 0")
    return v


def parse_config(path) -> CaseConfig:
    """Parse and validate a case config file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"{path}: TOML parse error: {err}") from None
    return _config_from_dict(doc, default_name=path.stem, base_dir=path.parent)


def _config_from_dict(doc: dict, default_name: str, base_dir: Path) -> CaseConfig:
    if not doc:
        raise ConfigError("empty config")
    name = doc.get("name", default_name)

    pt = _req(doc, "plant", "")
    kind = _req(pt, "kind", "plant")
    if kind == "modal":
        raw_modes = pt.get("modes", [])
        modes = []
        for i, m in enumerate(raw_modes):
            if not isinstance(m, list) or len(m) not in (2, 3, 4):
                raise ConfigError(
                    f"plant.modes[{i}]: expected [freq_hz, damping, sign?, weight?]"
                )
            f = _num(m[0], f"plant.modes[{i}][0]", positive=True)
            z = _num(m[1], f"plant.modes[{i}][1]", positive=True)
            sign = int(m[2]) if len(m) > 2 else 1
            weight = _num(m[3], f"plant.modes[{i}][3]", positive=True) if len(m) > 3 else 1.0
            modes.append((f, z, sign, weight))
        plant_spec = PlantSpec(
            "modal",
            _num(pt.get("dc_gain", 1.0), "plant.dc_gain", positive=True),
            _num(pt.get("delay_s", 0.0), "plant.delay_s", nonneg=True),
            tuple(modes),
        )
    elif kind == "frf_csv":
        rel = _req(pt, "path", "plant")
        p = Path(rel)
        if not p.is_absolute():
            p = base_dir / p
        if not p.exists():
            raise ConfigError(f"plant.path: file not found: {p}")
        plant_spec = PlantSpec("frf_csv", path=str(p))
    else:
        raise ConfigError(f"plant.kind: unknown kind {kind!r}")

    dmp = doc.get("damping", {})
    damping = DampingSpec(
        _num(dmp.get("gamma", 1.0), "damping.gamma"),
        _num(dmp.get("corner_multiple", 8.0), "damping.corner_multiple", positive=True),
        (_num(dmp["resonance_hz"], "damping.resonance_hz", positive=True)
         if "resonance_hz" in dmp else None),
    )

    tr = _req(doc, "tracking", "")
    notches = []
    for i, n in enumerate(tr.get("notches", [])):
        if not isinstance(n, list) or len(n) != 3:
            raise ConfigError(f"tracking.notches[{i}]: expected [center_hz, q_num, q_den]")
        notches.append(tuple(_num(v, f"tracking.notches[{i}][{j}]", positive=True)
                             for j, v in enumerate(n)))
    try:
        tracking = TrackingParams(
            _num(_req(tr, "kp", "tracking"), "tracking.kp", positive=True),
            _num(tr.get("omega_i_hz", 0.0), "tracking.omega_i_hz", nonneg=True),
            tuple(notches),
            _num(tr.get("omega_lpf_hz", 5000.0), "tracking.omega_lpf_hz", positive=True),
        )
    except ValueError as err:
        raise ConfigError(f"tracking: {err}") from None

    cglp = None
    if "cglp" in doc:
        cg = doc["cglp"]
        cglp = CglpSpec(
            _num(cg.get("gamma_r", 0.0), "cglp.gamma_r"),
            _num(cg["omega_l_hz"], "cglp.omega_l_hz", positive=True) if "omega_l_hz" in cg else None,
            _num(cg["omega_f_hz"], "cglp.omega_f_hz", positive=True) if "omega_f_hz" in cg else None,
            _num(cg["phi_l_deg"], "cglp.phi_l_deg", positive=True) if "phi_l_deg" in cg else None,
            _num(cg["omega_target_hz"], "cglp.omega_target_hz", positive=True)
            if "omega_target_hz" in cg else None,
        )
        if cglp.needs_tuning() and (cglp.phi_l_deg is None or cglp.omega_target_hz is None):
            raise ConfigError(
                "cglp: give explicit omega_l_hz/omega_f_hz or phi_l_deg/omega_target_hz"
            )

    shaping = None
    if "shaping" in doc:
        sh = doc["shaping"]
        try:
            shaping = ShapingSpec(
                _num(_req(sh, "omega_low_hz", "shaping"), "shaping.omega_low_hz", positive=True),
                _num(_req(sh, "omega_high_hz", "shaping"), "shaping.omega_high_hz", positive=True),
                _num(_req(sh, "lam", "shaping"), "shaping.lam"),
                _num(_req(sh, "q", "shaping"), "shaping.q", positive=True),
                int(sh.get("fit_order", 2)),
            )
            tuning.ShapingParams(shaping.omega_low_hz, shaping.omega_high_hz,
                                 shaping.lam, shaping.q, shaping.fit_order)
        except ValueError as err:
            raise ConfigError(f"shaping: {err}") from None
        if cglp is None:
            raise ConfigError("shaping: requires a cglp section (it shapes the reset trigger)")

    gr = doc.get("grid", {})
    grid = GridSpec(
        _num(gr.get("fmin_hz", 1.0), "grid.fmin_hz", positive=True),
        _num(gr.get("fmax_hz", 8000.0), "grid.fmax_hz", positive=True),
        int(gr.get("points_per_decade", 200)),
    )
    if grid.fmin_hz >= grid.fmax_hz:
        raise ConfigError("grid: need fmin_hz < fmax_hz")

    sc = doc.get("scenario", {})
    scen = ScenarioSpec(
        _num(sc.get("t_s", sim.DEFAULT_SAMPLE_TIME), "scenario.t_s", positive=True),
        _num(sc["duration_s"], "scenario.duration_s", positive=True) if "duration_s" in sc else None,
        int(sc.get("settle_periods", 10)),
        int(sc.get("analysis_periods", 4)),
        int(sc.get("seed", 1)),
        str(sc.get("reference_kind", "sine")),
        _num(sc.get("reference_f0_hz", 80.0), "scenario.reference_f0_hz", nonneg=True),
        _num(sc.get("reference_amplitude", 1.0), "scenario.reference_amplitude"),
        _num(sc["reference_f1_hz"], "scenario.reference_f1_hz", positive=True)
        if "reference_f1_hz" in sc else None,
        _num(sc.get("noise_rms", 0.0), "scenario.noise_rms", nonneg=True),
        sc.get("disturbance_kind"),
        _num(sc.get("disturbance_f0_hz", 0.0), "scenario.disturbance_f0_hz", nonneg=True),
        _num(sc.get("disturbance_amplitude", 0.0), "scenario.disturbance_amplitude"),
        str(sc.get("chain_order", "lead-first")),
    )
    if scen.reference_kind not in ("sine", "triangle", "step", "chirp"):
        raise ConfigError(f"scenario.reference_kind: unknown kind {scen.reference_kind!r}")

    return CaseConfig(name, plant_spec, damping, tracking, cglp, shaping, grid, scen)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    raise TypeError(f"cannot serialize {v!r}")


def serialize_config(cfg: CaseConfig) -> str:
    """Emit the canonical TOML form; parse(serialize(cfg)) == cfg."""
    out = io.StringIO()
    out.write(f"name = {_fmt(cfg.name)}\n")
    out.write("\n[plant]\n")
    out.write(f"kind = {_fmt(cfg.plant.kind)}\n")
    if cfg.plant.kind == "modal":
        out.write(f"dc_gain = {_fmt(cfg.plant.dc_gain)}\n")
        out.write(f"delay_s = {_fmt(cfg.plant.delay_s)}\n")
        rows = ", ".join(
            "[" + ", ".join(_fmt(v) for v in m) + "]" for m in cfg.plant.modes
        )
        out.write(f"modes = [{rows}]\n")
    else:
        out.write(f"path = {_fmt(cfg.plant.path)}\n")
    out.write("\n[damping]\n")
    out.write(f"gamma = {_fmt(cfg.damping.gamma)}\n")
    out.write(f"corner_multiple = {_fmt(cfg.damping.corner_multiple)}\n")
    if cfg.damping.resonance_hz is not None:
        out.write(f"resonance_hz = {_fmt(cfg.damping.resonance_hz)}\n")
    out.write("\n[tracking]\n")
    out.write(f"kp = {_fmt(cfg.tracking.kp)}\n")
    out.write(f"omega_i_hz = {_fmt(cfg.tracking.omega_i_hz)}\n")
    rows = ", ".join(
        "[" + ", ".join(_fmt(v) for v in n) + "]" for n in cfg.tracking.notches
    )
    out.write(f"notches = [{rows}]\n")
    out.write(f"omega_lpf_hz = {_fmt(cfg.tracking.omega_lpf_hz)}\n")
    if cfg.cglp is not None:
        out.write("\n[cglp]\n")
        out.write(f"gamma_r = {_fmt(cfg.cglp.gamma_r)}\n")
        for key in ("omega_l_hz", "omega_f_hz", "phi_l_deg", "omega_target_hz"):
            val = getattr(cfg.cglp, key)
            if val is not None:
                out.write(f"{key} = {_fmt(val)}\n")
    if cfg.shaping is not None:
        out.write("\n[shaping]\n")
        for key in ("omega_low_hz", "omega_high_hz", "lam", "q", "fit_order"):
            out.write(f"{key} = {_fmt(getattr(cfg.shaping, key))}\n")
    out.write("\n[grid]\n")
    for key in ("fmin_hz", "fmax_hz", "points_per_decade"):
        out.write(f"{key} = {_fmt(getattr(cfg.grid, key))}\n")
    out.write("\n[scenario]\n")
    s = cfg.scenario
    out.write(f"t_s = {_fmt(s.t_s)}\n")
    if s.duration_s is not None:
        out.write(f"duration_s = {_fmt(s.duration_s)}\n")
    out.write(f"settle_periods = {_fmt(s.settle_periods)}\n")
    out.write(f"analysis_periods = {_fmt(s.analysis_periods)}\n")
    out.write(f"seed = {_fmt(s.seed)}\n")
    out.write(f"reference_kind = {_fmt(s.reference_kind)}\n")
    out.write(f"reference_f0_hz = {_fmt(s.reference_f0_hz)}\n")
    out.write(f"reference_amplitude = {_fmt(s.reference_amplitude)}\n")
    if s.reference_f1_hz is not None:
        out.write(f"reference_f1_hz = {_fmt(s.reference_f1_hz)}\n")
    out.write(f"noise_rms = {_fmt(s.noise_rms)}\n")
    if s.disturbance_kind is not None:
        out.write(f"disturbance_kind = {_fmt(s.disturbance_kind)}\n")
        out.write(f"disturbance_f0_hz = {_fmt(s.disturbance_f0_hz)}\n")
        out.write(f"disturbance_amplitude = {_fmt(s.disturbance_amplitude)}\n")
    out.write(f"chain_order = {_fmt(s.chain_order)}\n")
    return out.getvalue()


def parse_config_text(text: str, name: str = "inline") -> CaseConfig:
    doc = tomllib.loads(text)
    return _config_from_dict(doc, default_name=name, base_dir=Path("."))


@dataclass
class BuiltCase:
    config: CaseConfig
    model: LoopModel
    design: tuning.CglpDesign | None
    resonance_hz: float | None
    shaping_report: tuning.FitReport | None = None


def build_case(cfg: CaseConfig) -> BuiltCase:
    """Assemble the loop model a config describes.

    A config without a cglp section is the linear baseline: the reset slot
    holds a unity feedthrough stage with no reset action.
    """
    if cfg.plant.kind == "modal":
        modes = tuple(
            plant_mod.Mode(f, z, sign, weight) for f, z, sign, weight in cfg.plant.modes
        )
        built = plant_mod.build_modal_plant(
            plant_mod.ModalPlant(cfg.plant.dc_gain, modes, cfg.plant.delay_s)
        )
        plant_tf = built.tf
        dc_gain = cfg.plant.dc_gain
        resonance = modes[0].freq_hz if modes else None
    else:
        points = plant_mod.load_frf_csv(cfg.plant.path)
        plant_tf = lti.FrfTable(points)
        dc_gain = abs(points[0].response)
        resonance = None

    resonance_hz = cfg.damping.resonance_hz or resonance
    if resonance_hz is None:
        raise ConfigError(
            "damping.resonance_hz: required when the plant supplies no mode list"
        )
    _, c_d = lti.make_nrc(cfg.damping.gamma, cfg.damping.corner_multiple, dc_gain, resonance_hz)
    c_t = lti.make_tracking_controller(cfg.tracking)

    design = None
    if cfg.cglp is not None:
        if cfg.cglp.needs_tuning():
            design = tuning.tune_cglp(
                cfg.cglp.phi_l_deg, cfg.cglp.omega_target_hz, cfg.cglp.gamma_r
            )
        else:
            design = tuning.design_from_corners(
                cfg.cglp.omega_l_hz,
                cfg.cglp.omega_f_hz,
                cfg.cglp.gamma_r,
                cfg.cglp.phi_l_deg or 0.0,
                cfg.cglp.omega_target_hz or 0.0,
            )
        reset = design.reset_element()
        c_l = design.lead_lag
        k_c = design.k_c
    else:
        reset = unity_stage()
        c_l = lti.constant(1.0)
        k_c = 1.0

    c_s = None
    shaping_report = None
    if cfg.shaping is not None:
        params = tuning.ShapingParams(
            cfg.shaping.omega_low_hz, cfg.shaping.omega_high_hz,
            cfg.shaping.lam, cfg.shaping.q, cfg.shaping.fit_order,
        )
        c_s, shaping_report = tuning.make_shaping_filter(params, base_linear(reset))

    model = LoopModel(plant_tf, c_d, c_t, reset, c_l, k_c, c_s)
    return BuiltCase(cfg, model, design, resonance_hz, shaping_report)


def scenario_from_config(cfg: CaseConfig, model: LoopModel,
                         freq_hz: float | None = None,
                         seed: int | None = None) -> Scenario:
    s = cfg.scenario
    f0 = s.reference_f0_hz
    if freq_hz is not None:
        f0 = freq_hz
    if s.reference_kind in ("sine", "triangle"):
        f0 = sim.snap_frequency(f0, s.t_s)
    reference = SignalSpec(s.reference_kind, f0, s.reference_amplitude, s.reference_f1_hz)
    disturbance = None
    if s.disturbance_kind:
        disturbance = SignalSpec(s.disturbance_kind, s.disturbance_f0_hz,
                                 s.disturbance_amplitude)
    noise = NoiseSpec(s.noise_rms) if s.noise_rms > 0 else None
    return Scenario(
        model=model,
        t_s=s.t_s,
        duration_s=s.duration_s,
        reference=reference,
        disturbance=disturbance,
        noise=noise,
        settle_periods=s.settle_periods,
        analysis_periods=s.analysis_periods,
        seed=seed if seed is not None else s.seed,
        chain_order=s.chain_order,
    )


def preset_path(name: str) -> Path:
    """Path of a shipped preset config (case1 .. case7)."""
    p = Path(__file__).parent / "presets" / f"{name}.toml"
    if not p.exists():
        raise ConfigError(f"unknown preset {name!r}")
    return p


def resolve_config(spec: str) -> Path:
    """A --config value is a file path or a bare preset name."""
    p = Path(spec)
    if p.exists():
        return p
    if "/" not in spec and not spec.endswith(".toml"):
        return preset_path(spec)
    raise ConfigError(f"config file not found: {spec}")


RMS_TABLE_FREQS = (1.0, 5.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0, 300.0)


def _write_summary(path: Path, rows: list[tuple[str, str]]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key,value\n")
        for k, v in rows:
            fh.write(f"{k},{v}\n")


def run_case(
    config_path,
    command: str,
    out_dir="out",
    grid: GridSpec | None = None,
    freq_hz: float | None = None,
    seed: int | None = None,
    harmonics=None,
    stream=None,
) -> int:
    """Execute one analysis command for a case; returns a process exit code.

    Artifacts are written under out_dir/<case>/<command>/ with fixed
    filenames; a summary is printed to the stream (stdout by default).
    """
    stream = stream or sys.stdout
    try:
        cfg = parse_config(resolve_config(str(config_path)))
        case = build_case(cfg)
        grid = grid or cfg.grid
        orders = tuple(harmonics) if harmonics else hosidf.DEFAULT_ORDERS
        dest = Path(out_dir) / cfg.name / command
        dest.mkdir(parents=True, exist_ok=True)
        handler = _COMMANDS[command]
    except KeyError:
        print(f"error: unknown command {command!r}", file=stream)
        return 2
    except (ConfigError, ValueError, OSError) as err:
        print(f"error: {err}", file=stream)
        return 2
    try:
        handler(case, dest, grid, freq_hz, seed, orders, stream)
    except Exception as err:  # module errors pass through with case context
        print(f"error: case {cfg.name}: {command}: {err}", file=stream)
        return 1
    return 0


def _margins_of(case: BuiltCase, grid: GridSpec):
    freqs = grid.freqs()
    _, outer = hosidf.open_loop_harmonics(case.model, freqs, (1,))
    return freqs, outer, hosidf.crossover_from_harmonics(outer)


def _cmd_margins(case, dest, grid, freq_hz, seed, orders, stream):
    freqs, outer, m = _margins_of(case, grid)
    l1 = outer.order_gains(1)
    plant_mod.save_frf_csv(dest / "open_loop_frf.csv", lti.frf_points(freqs, l1))
    try:
        t1 = hosidf.complementary_harmonics(case.model, freqs, (1,)).order_gains(1)
        wc = lti.closed_loop_bandwidth((freqs, t1))
        wc_txt = f"{wc:.4f}"
    except lti.BandwidthBeyondGridError:
        wc = None
        wc_txt = "beyond-grid"
    gm = "inf" if math.isinf(m.gain_margin_db) else f"{m.gain_margin_db:.4f}"
    rows = [("omega_b_hz", f"{m.omega_b_hz:.4f}"),
            ("phase_margin_deg", f"{m.phase_margin_deg:.4f}"),
            ("gain_margin_db", gm),
            ("omega_c_hz", wc_txt)]
    _write_summary(dest / "summary.csv", rows)
    print(f"[{case.config.name}] margins:", file=stream)
    for k, v in rows:
        print(f"  {k} = {v}", file=stream)


def _cmd_hosidf(case, dest, grid, freq_hz, seed, orders, stream):
    freqs = grid.freqs()
    cg = hosidf.cglp_harmonics(case.model, freqs, orders)
    dual, outer = hosidf.open_loop_harmonics(case.model, freqs, orders)
    ser = hosidf.sensitivity_harmonics(case.model, freqs, orders)
    tyr = hosidf.complementary_harmonics(case.model, freqs, orders)
    hosidf.write_harmonic_csv(cg, dest / "cglp_hosidf.csv")
    hosidf.write_harmonic_csv(dual, dest / "open_loop_dual.csv")
    hosidf.write_harmonic_csv(outer, dest / "open_loop_outer.csv")
    hosidf.write_harmonic_csv(ser, dest / "sensitivity.csv", include_rss=True)
    hosidf.write_harmonic_csv(tyr, dest / "complementary.csv", include_rss=True)
    m = hosidf.crossover_from_harmonics(outer)
    print(
        f"[{case.config.name}] hosidf orders={list(orders)}: "
        f"omega_b={m.omega_b_hz:.2f} Hz PM={m.phase_margin_deg:.2f} deg "
        f"GM={m.gain_margin_db:.2f} dB",
        file=stream,
    )


def _cmd_tune(case, dest, grid, freq_hz, seed, orders, stream):
    cfg = case.config
    if cfg.cglp is None or cfg.cglp.phi_l_deg is None or cfg.cglp.omega_target_hz is None:
        raise ConfigError("tune: config needs cglp.phi_l_deg and cglp.omega_target_hz")
    design = tuning.tune_cglp(cfg.cglp.phi_l_deg, cfg.cglp.omega_target_hz, cfg.cglp.gamma_r)
    frag = design.to_config_dict()
    with open(dest / "design.toml", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("[cglp]\n")
        for k, v in frag.items():
            fh.write(f"{k} = {_fmt(v)}\n")
    print(f"[{cfg.name}] tuned cglp:", file=stream)
    print(f"  omega_l = {design.pfore.omega_l_hz:.4f} Hz", file=stream)
    print(f"  omega_f = {design.pfore.omega_f_hz:.4f} Hz", file=stream)
    print(f"  omega_r = {design.pfore.omega_r_hz:.4f} Hz", file=stream)
    print(f"  k_c     = {design.k_c:.6f}", file=stream)


def _cmd_simulate(case, dest, grid, freq_hz, seed, orders, stream):
    sc = scenario_from_config(case.config, case.model, freq_hz, seed)
    trace = sim.run_closed_loop(sc)
    sim.write_trace_csv(trace, dest / "trace.csv")
    sim.write_reset_log(trace, dest / "reset_log.txt")
    print(f"[{case.config.name}] simulate: {sc.reference.kind} "
          f"f0={sc.reference.f0_hz:.4f} Hz, {trace.n_samples} samples, "
          f"{len(trace.reset_indices)} resets", file=stream)
    if sc.reference.is_periodic():
        census = sim.count_resets_per_period(trace, sc.reference.f0_hz)
        rms = sim.rms_error(trace)
        print(f"  reset verdict = {census.verdict}", file=stream)
        print(f"  rms error     = {rms:.6g}", file=stream)
        _write_summary(dest / "summary.csv", [
            ("verdict", census.verdict),
            ("rms_error", f"{rms:.10g}"),
            ("resets", str(len(trace.reset_indices))),
        ])


def _cmd_sweep(case, dest, grid, freq_hz, seed, orders, stream):
    freqs = lti.log_grid(max(grid.fmin_hz, 10.0), min(grid.fmax_hz, 1000.0),
                         max(grid.points_per_decade, 2)
                         if grid.points_per_decade < 50 else 10)
    template = scenario_from_config(case.config, case.model, seed=seed)
    for selector in ("S_er", "T_yr"):
        result = sim.measure_frf_sweep(template, freqs, selector)
        fname = "sweep_s_er.csv" if selector == "S_er" else "sweep_t_yr.csv"
        sim.write_sweep_csv(result, selector, dest / fname)
        nominal = sum(v == sim.VERDICT_NOMINAL for v in result.verdicts)
        print(f"[{case.config.name}] sweep {selector}: {len(result.points)} points "
              f"({nominal} NOMINAL, {len(result.failures)} failed)", file=stream)


def _cmd_rms_table(case, dest, grid, freq_hz, seed, orders, stream):
    rows = []
    print(f"[{case.config.name}] rms of triangle tracking error:", file=stream)
    for f in RMS_TABLE_FREQS:
        sc = scenario_from_config(case.config, case.model, f, seed)
        sc = replace(sc, reference=replace(sc.reference, kind="triangle"))
        trace = sim.run_closed_loop(sc)
        rms = sim.rms_error(trace)
        rows.append((f"{sc.reference.f0_hz:.6g}", f"{rms:.10g}"))
        print(f"  {f:6.1f} Hz: {rms:.6g}", file=stream)
    with open(dest / "rms_table.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("freq_hz,rms_error\n")
        for f, r in rows:
            fh.write(f"{f},{r}\n")


_COMMANDS = {
    "margins": _cmd_margins,
    "hosidf": _cmd_hosidf,
    "tune": _cmd_tune,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "rms-table": _cmd_rms_table,
}
