"""Reset-control loop shaping for resonant plants.

Subpackages map to the layers of the workflow: `lti` (rational models,
frequency response, margins, discretization), `reset` (reset elements and
their hybrid execution), `hosidf` (harmonic describing-function analysis of
elements and of the dual loop), `tuning` (CgLp and shaping-filter
synthesis), `plant` (synthetic modal plants and FRF files), `sim`
(closed-loop simulation and sweeps), and `cases` / `cli` (declarative case
configs and the batch front end).
"""

from .lti import (
    DiscreteFilter,
    FrfPoint,
    FrfTable,
    Margins,
    NrcParams,
    RationalTf,
    TrackingParams,
    bilinear_discretize,
    closed_loop_bandwidth,
    compose,
    eval_frf,
    feedback,
    log_grid,
    make_nrc,
    make_tracking_controller,
    margins_and_crossover,
    parallel,
    series,
    step_filter,
)
from .reset import (
    PforeParams,
    ResetElement,
    ResetState,
    base_linear,
    clegg,
    make_gfore,
    make_pfore,
    make_state,
    simulate_element,
    step_reset,
    unity_stage,
)
from .hosidf import (
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
from .tuning import (
    CglpDesign,
    ShapingParams,
    design_from_corners,
    fit_rational_frf,
    gain_correction,
    make_shaping_filter,
    omega_r_from_omega_l,
    tune_cglp,
)
from .plant import (
    ModalPlant,
    Mode,
    build_modal_plant,
    default_plant,
    load_frf_csv,
    save_frf_csv,
)
from .sim import (
    NoiseSpec,
    Scenario,
    SignalSpec,
    SimTrace,
    count_resets_per_period,
    measure_frf_sweep,
    reference_signal,
    rms_error,
    run_closed_loop,
    snap_frequency,
    steady_state_harmonics,
)

__version__ = "0.1.0"
