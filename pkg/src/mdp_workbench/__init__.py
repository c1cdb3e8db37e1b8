"""Exact workbench for metric-private mechanisms.

Everything is computed over arbitrary-precision rationals: channel/hyper
algebra, the posterior polytope's vertices and kernel mechanisms, leakage
capacities (per channel, and over a whole privacy type by LP or closed
form), refinement decisions, and universal-optimality verdicts for loss
functions.
"""

from .cache import TOOL_VERSION as __version__
from .exact import (
    DimensionError,
    LPOptimal,
    LPProblem,
    LP_INFEASIBLE,
    LP_UNBOUNDED,
    INCONSISTENT,
    UNDERDETERMINED,
    SimplexIterationLimit,
    Unique,
    format_scalar,
    lp_optimize,
    parse_scalar,
    rank,
    solve_linear_system,
)
from .metrics import (
    MetricSpace,
    canonical_metric_json,
    make_metric,
    metric_from_json,
    metric_to_json,
    restrict_space,
    stretch,
    tight_pairs,
)
from .mechanisms import (
    Channel,
    DpReport,
    Hyper,
    Prior,
    binary_optimal,
    channel_from_json,
    channel_to_json,
    check_dx_private,
    check_dx_private_via_hyper,
    external_choice,
    from_hyper,
    geometric_truncated,
    hyper_from_json,
    hyper_to_json,
    prior_from_json,
    prior_to_json,
    random_response,
    random_response_dual,
    restrict,
    to_hyper,
    trivial_channel,
    uniform_prior,
)
from .geometry import (
    ConstraintSystem,
    EnumerationBudgetExceeded,
    anti_refine,
    build_constraints,
    decompose_vertex_mechanism,
    enumerate_kernels,
    enumerate_vertices,
    is_kernel,
    is_polytope_point,
    is_vertex,
    is_vertex_mechanism,
)
from .analysis import (
    CapacityReport,
    add_capacity_channel,
    capacity_report_to_json,
    mult_capacity_channel,
    posterior_uncertainty,
    prior_uncertainty,
    refines,
    type_capacity_closed_form,
    type_capacity_lp,
)
from .optimality import (
    LossClass,
    LossFunction,
    Verdict,
    add_losses,
    check_universal_l_optimal,
    classify_monotone,
    extend_loss,
    impossibility_sweep,
    is_trivial,
    loss_from_json,
    loss_to_json,
    make_loss,
    min_pair_mechanism,
    restrict_loss,
    scale_loss,
)

__all__ = [
    "__version__",
    "DimensionError",
    "LPOptimal",
    "LPProblem",
    "LP_INFEASIBLE",
    "LP_UNBOUNDED",
    "INCONSISTENT",
    "UNDERDETERMINED",
    "SimplexIterationLimit",
    "Unique",
    "format_scalar",
    "lp_optimize",
    "parse_scalar",
    "rank",
    "solve_linear_system",
    "MetricSpace",
    "canonical_metric_json",
    "make_metric",
    "metric_from_json",
    "metric_to_json",
    "restrict_space",
    "stretch",
    "tight_pairs",
    "Channel",
    "DpReport",
    "Hyper",
    "Prior",
    "binary_optimal",
    "channel_from_json",
    "channel_to_json",
    "check_dx_private",
    "check_dx_private_via_hyper",
    "external_choice",
    "from_hyper",
    "geometric_truncated",
    "hyper_from_json",
    "hyper_to_json",
    "prior_from_json",
    "prior_to_json",
    "random_response",
    "random_response_dual",
    "restrict",
    "to_hyper",
    "trivial_channel",
    "uniform_prior",
    "ConstraintSystem",
    "EnumerationBudgetExceeded",
    "anti_refine",
    "build_constraints",
    "decompose_vertex_mechanism",
    "enumerate_kernels",
    "enumerate_vertices",
    "is_kernel",
    "is_polytope_point",
    "is_vertex",
    "is_vertex_mechanism",
    "CapacityReport",
    "add_capacity_channel",
    "capacity_report_to_json",
    "mult_capacity_channel",
    "posterior_uncertainty",
    "prior_uncertainty",
    "refines",
    "type_capacity_closed_form",
    "type_capacity_lp",
    "LossClass",
    "LossFunction",
    "Verdict",
    "add_losses",
    "check_universal_l_optimal",
    "classify_monotone",
    "extend_loss",
    "impossibility_sweep",
    "is_trivial",
    "loss_from_json",
    "loss_to_json",
    "make_loss",
    "min_pair_mechanism",
    "restrict_loss",
    "scale_loss",
]
