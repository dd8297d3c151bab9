"""Driver node selection for linear network dynamics.

The package compares three ways of choosing which nodes of a network receive
external inputs so that a set of target nodes can be steered cheaply:

* a greedy method on the log-determinant of the output controllability Gramian,
* a facility-location (p-median) method on a purely structural cost built from
  shortest-path distances and path redundancy,
* projected gradient descent on the expected control energy.

The closed-form Gramian of directed balloon graphs, which motivates the
structural cost, lives in :mod:`driverselect.balloon`.
"""
from importlib.metadata import PackageNotFoundError, version

from .balloon import (
    BalloonSpec,
    OrbitPartition,
    balloon_Jstar,
    balloon_orbits,
    balloon_Wdd,
    build_balloon,
    expand_gramian,
    is_symmetry,
    quotient_adjacency,
)
from .estimators import FLPSelector, GreedySelector, HillClimbSelector, LPGMSelector
from .exceptions import (
    ConfigError,
    DriverSelectError,
    EdgeListParseError,
    InfeasibleError,
    NotHurwitzError,
    NumericalError,
)
from .flp import branch_and_bound, ilp_constraint_matrix, solve_pmedian, swap_local_search
from .gramian import (
    GramianSet,
    Maneuver,
    driver_contributions,
    expected_energy,
    gramian_finite,
    log_det_output,
    lyapunov_infinite,
    numerical_rank,
    optimal_energy,
    vol_cost,
)
from .graph import (
    FAMILIES,
    Graph,
    gen_graph,
    gershgorin_nu,
    is_hurwitz,
    read_edge_list,
    state_matrix,
    write_edge_list,
)
from .selectors import (
    METHODS,
    HillClimbResult,
    SelectionProblem,
    SelectionResult,
    evaluate_costs,
    flp_select,
    greedy_select,
    hill_climb,
    lpgm_select,
    probabilistic_projection,
)
from .structure import (
    StructureMatrices,
    all_pairs_distance,
    flp_set_cost,
    pairwise_cost,
    redundancy,
    structure_matrices,
)

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.0.0"

__all__ = [
    "BalloonSpec",
    "OrbitPartition",
    "balloon_Jstar",
    "balloon_orbits",
    "balloon_Wdd",
    "build_balloon",
    "expand_gramian",
    "is_symmetry",
    "quotient_adjacency",
    "FLPSelector",
    "GreedySelector",
    "HillClimbSelector",
    "LPGMSelector",
    "ConfigError",
    "DriverSelectError",
    "EdgeListParseError",
    "InfeasibleError",
    "NotHurwitzError",
    "NumericalError",
    "branch_and_bound",
    "ilp_constraint_matrix",
    "solve_pmedian",
    "swap_local_search",
    "GramianSet",
    "Maneuver",
    "driver_contributions",
    "expected_energy",
    "gramian_finite",
    "log_det_output",
    "lyapunov_infinite",
    "numerical_rank",
    "optimal_energy",
    "vol_cost",
    "FAMILIES",
    "Graph",
    "gen_graph",
    "gershgorin_nu",
    "is_hurwitz",
    "read_edge_list",
    "state_matrix",
    "write_edge_list",
    "METHODS",
    "HillClimbResult",
    "SelectionProblem",
    "SelectionResult",
    "evaluate_costs",
    "flp_select",
    "greedy_select",
    "hill_climb",
    "lpgm_select",
    "probabilistic_projection",
    "StructureMatrices",
    "all_pairs_distance",
    "flp_set_cost",
    "pairwise_cost",
    "redundancy",
    "structure_matrices",
    "__version__",
]
