"""Numerical laboratory for the degenerate taxis-consumption system

    u_t = lap(u phi(v)),   v_t = lap v - u v,   no-flux walls,

its explicit positivity-preserving discretization, the vanishing-viscosity
regularization u_t = eps lap u + lap(u phi(v)), certified movement bounds,
and the linear positivity probe with its sharpness counterexample.
"""

from .config import Config, ConfigError, EXPERIMENT_IDS, default_config, load_config, parse_config, serialize
from .diagnostics import (
    DIAGNOSTICS_COLUMNS,
    DiagnosticsRecord,
    GradIneqConfig,
    TestFunctionDictionary,
    TVReport,
    build_dictionary,
    check_gradient_inequality,
    count_violations,
    diagnostics_step,
    dual_norm_proxy,
    fit_inequality_constant,
    nonconstancy,
    plateau_height,
    random_pair,
    required_constant,
    read_diagnostics_csv,
    tv_series,
    write_diagnostics_csv,
    write_tv_csv,
)
from .experiments import (
    ExperimentResult,
    ThresholdReport,
    bell_with_mass,
    bell_with_width,
    certified_movement_rate,
    plateau_bump,
    run_experiment,
    sweep_v0_mass,
    two_bump_u,
)
from .fields import (
    Grid,
    ScalarField,
    VectorField,
    div_flux,
    field_from_function,
    grad,
    grad_cell_sq,
    integrate,
    laplacian,
    lp_norm,
    make_field,
    make_grid,
    read_snapshot,
    value_at,
    vector_field_from_face_arrays,
    write_snapshot,
    zero_vector_field,
)
from .linear_mp import (
    CounterexampleReport,
    CounterexampleSpec,
    MPProbeConfig,
    MPProbeResult,
    barrier,
    barrier_field,
    build_counterexample,
    default_counterexample,
    exponent_condition,
    linear_cfl,
    probe_lower_bound,
    residual_min,
    run_counterexample,
    step_linear,
    supercritical_exponents,
    verify_g_condition,
    window_inf,
    write_counterexample_csv,
)
from .motility import (
    MotilitySpec,
    envelope_constants,
    exp_decay,
    linear,
    load_tabulated,
    phi_eval,
    phi_max_on_range,
    phi_prime,
    saturating,
    shifted,
    tabulated,
    write_tabulated,
)
from .solver import (
    ConvergenceReport,
    SimParams,
    SolverInvariantError,
    SolverState,
    Trajectory,
    cfl_timestep,
    epsilon_sweep,
    initial_state,
    simulate,
    step,
)

__version__ = "0.1.0"
