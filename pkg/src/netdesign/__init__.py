"""Path-addition analysis for transport networks.

Solves constant-cost capacitated routing (mc), system-optimal (so) and
user-equilibrium (ue) flows, evaluates the design objectives over subsets
of candidate path additions, and checks monotonicity and supermodularity
of those objectives with explicit witnesses.
"""

from .costs import (
    Affine,
    BPR,
    Constant,
    Greenshields,
    beckmann_integral,
    derivative,
    evaluate,
    marginal,
    marginal_model,
)
from .design import (
    DOUBLE_PRIME,
    GENERAL,
    HOLDS,
    MONOTONE,
    PRIME,
    SUPERMODULAR,
    VIOLATED,
    CandidateSet,
    DesignState,
    GreedyDesign,
    LambdaEvaluation,
    LambdaEvaluator,
    PropertyReport,
    RestrictionReport,
    Witness,
    candidate_set_from_json,
    candidate_set_to_json,
    check_monotonicity,
    check_restriction,
    check_supermodularity,
    greedy_designer,
    lambda_eval,
    parallel_mc_value,
    parallel_uniform_value,
)
from .errors import (
    BadParams,
    CapacitySaturation,
    DomainError,
    FormatError,
    Infeasible,
    NetdesignError,
    NotConverged,
    PathLimitExceeded,
    TemplateConsistencyError,
    UnknownScenario,
    Unreachable,
)
from .network import (
    DEFAULT_PATH_LIMIT,
    Edge,
    Network,
    Path,
    PathSet,
    TemplateGraph,
    Trip,
    TripPathGraph,
    TripSpanningTree,
    Violation,
    ViolationList,
    added_paths,
    build_grid_template,
    enumerate_paths,
    enumerate_trip_paths,
    graph_union,
    subgraph_issues,
    validate_trip_path_graph,
    validate_trip_spanning_tree,
)
from .routing import (
    MC,
    SO,
    UE,
    BridgeComparison,
    FlowAssignment,
    Instance,
    MCDuals,
    OptimalityCertificate,
    SolveResult,
    SolverConfig,
    all_or_nothing,
    price_of_anarchy,
    shortest_path_nodes,
    so_ue_bridge,
    solve_mc,
    solve_so,
    solve_ue,
    total_cost_under,
    verify_certificate,
)
from .scenarios import (
    SCENARIO_NAMES,
    ParallelFamily,
    Scenario,
    materialize,
    random_candidate_set,
    random_parallel_family,
    scenario_descriptions,
)

__version__ = "0.1.0"
