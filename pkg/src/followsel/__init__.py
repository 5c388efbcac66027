"""Direct-follower selection for leader influence in weighted digraphs."""

from .baselines import brute_force, pagerank, select_by_degree, select_by_pagerank
from .convex import PgmConfig, RelaxReport, gamma_sweep, pgm_solve, round_topK
from .graph import (
    GraphError,
    Network,
    ParseError,
    extract_largest_scc,
    load_edge_list,
    random_network,
    validate,
)
from .greedy import certify, curvature, greedy_add, greedy_swap, ratio_R
from .objective import Instance, eval_J, eval_f, grad_f, hessian_f, lipschitz_Lf

__version__ = "0.1.0"

__all__ = [
    "GraphError",
    "Instance",
    "Network",
    "ParseError",
    "PgmConfig",
    "RelaxReport",
    "brute_force",
    "certify",
    "curvature",
    "eval_J",
    "eval_f",
    "extract_largest_scc",
    "gamma_sweep",
    "grad_f",
    "greedy_add",
    "greedy_swap",
    "hessian_f",
    "lipschitz_Lf",
    "load_edge_list",
    "pagerank",
    "pgm_solve",
    "random_network",
    "ratio_R",
    "round_topK",
    "select_by_degree",
    "select_by_pagerank",
    "validate",
]
