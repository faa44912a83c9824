"""Numerical laboratory for initial-boundary value transport constructions.

The package builds divergence-free velocity fields whose dyadic jet
patterns defeat uniqueness for the continuity equation on the half-space
r > 0, and provides the measurement apparatus: exact face-flux sampling,
mollified divergence scans, trace profiles and their weak-star pairings,
an upwind finite-volume solver, and acceptance suites tying the measured
numbers to the constructions' published invariants.
"""

from ._env import numba_preference, thread_cap
from .errors import CFLError, ConfigurationError, ResolutionError, ScheduleError
from .geometry import (
    CellScalarField,
    DomainBox,
    DyadicGrid,
    FaceFluxField,
    Mollifier,
    MollifiedDivergenceReport,
    VelocityField,
    discrete_divergence,
    make_grid,
    mollified_divergence_l1,
    sample_face_fluxes,
    zero_extend,
)
from .catalog import (
    DEFAULT_DOMAIN,
    ConstructionVariant,
    DyadicSchedule,
    ScalarSolution,
    assemble_field,
    chessboard_cycle,
    chessboard_datum,
    exact_solution,
    mixing_block,
    mixing_chessboard_cycle,
    pattern_rects,
    periodic_extend,
    rotation_block,
    sigma_of,
)
from .kernels import active_lane, available_lanes, set_lane
from .traces import (
    TestFunction,
    TraceProfile,
    battery,
    boundary_condition_check,
    initial_trace,
    l1_distance,
    one_sided_trace,
    renormalization_trace_check,
    slab_variation_bound,
    strong_l1_check,
    trace_jump,
    trace_pairing,
    weak_star_check,
)
from .solver import (
    ConeWeight,
    Scenario,
    Trajectory,
    cone_energy,
    cone_energy_check,
    l2_balance_report,
    smooth_field,
    fill_scenario,
    smooth_scenario,
    solve_ibvp,
    upwind_step,
    weak_residual,
)
from .transport import evolve_chessboard, flow_map, pushforward_density, quarter_turn
from .suites import SUITE_NAMES, CheckRecord, Report, RunConfig, run_suite, worker_cap
from .io import (
    emit_heatmap,
    format_report,
    parse_config,
    write_conserved_csv,
    write_profile_csv,
    write_report,
    write_snapshot_csv,
)

__version__ = "0.1.0"

__all__ = [
    "CFLError",
    "CellScalarField",
    "CheckRecord",
    "ConeWeight",
    "ConfigurationError",
    "ConstructionVariant",
    "DEFAULT_DOMAIN",
    "DomainBox",
    "DyadicGrid",
    "DyadicSchedule",
    "FaceFluxField",
    "Mollifier",
    "MollifiedDivergenceReport",
    "Report",
    "ResolutionError",
    "RunConfig",
    "SUITE_NAMES",
    "ScalarSolution",
    "Scenario",
    "ScheduleError",
    "TestFunction",
    "TraceProfile",
    "Trajectory",
    "VelocityField",
    "active_lane",
    "assemble_field",
    "available_lanes",
    "battery",
    "boundary_condition_check",
    "chessboard_cycle",
    "chessboard_datum",
    "cone_energy",
    "cone_energy_check",
    "discrete_divergence",
    "emit_heatmap",
    "evolve_chessboard",
    "exact_solution",
    "flow_map",
    "format_report",
    "initial_trace",
    "l1_distance",
    "l2_balance_report",
    "make_grid",
    "mixing_block",
    "mixing_chessboard_cycle",
    "mollified_divergence_l1",
    "numba_preference",
    "one_sided_trace",
    "parse_config",
    "pattern_rects",
    "periodic_extend",
    "pushforward_density",
    "quarter_turn",
    "renormalization_trace_check",
    "rotation_block",
    "run_suite",
    "sample_face_fluxes",
    "set_lane",
    "sigma_of",
    "slab_variation_bound",
    "smooth_field",
    "fill_scenario",
    "smooth_scenario",
    "solve_ibvp",
    "strong_l1_check",
    "thread_cap",
    "trace_jump",
    "trace_pairing",
    "upwind_step",
    "weak_residual",
    "weak_star_check",
    "worker_cap",
    "write_conserved_csv",
    "write_profile_csv",
    "write_report",
    "write_snapshot_csv",
    "zero_extend",
    "__version__",
]
