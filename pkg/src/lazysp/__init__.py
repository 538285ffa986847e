"""Lazy shortest-path search with learned edge-evaluation selectors."""

from .engine import (
    EpisodeResult,
    SearchState,
    action_set,
    goal_test,
    run_lazysp,
    transition,
)
from .graph import ExplicitGraph, Path, enumerate_paths_shorter_than, shortest_path
from .oracle import approx_oracle_action, exact_cover_value, greedy_cover
from .selectors import (
    FeatureVector,
    LinearPolicy,
    compute_features,
    linear_select,
    make_baseline,
)
from .training import (
    classifier_fit,
    exact_policy_value,
    mixture_rollin,
    q_learning,
    stroll_train,
    value_iteration_exact,
)
from .worlds import (
    World,
    WorldDistribution,
    env1_distribution,
    env2_distribution,
    grid_world_generator,
    posterior_edge_prob,
    prior_edge_prob,
)

__all__ = [
    "EpisodeResult",
    "ExplicitGraph",
    "FeatureVector",
    "LinearPolicy",
    "Path",
    "SearchState",
    "World",
    "WorldDistribution",
    "action_set",
    "approx_oracle_action",
    "classifier_fit",
    "compute_features",
    "enumerate_paths_shorter_than",
    "env1_distribution",
    "env2_distribution",
    "exact_cover_value",
    "exact_policy_value",
    "goal_test",
    "greedy_cover",
    "grid_world_generator",
    "linear_select",
    "make_baseline",
    "mixture_rollin",
    "posterior_edge_prob",
    "prior_edge_prob",
    "q_learning",
    "run_lazysp",
    "shortest_path",
    "stroll_train",
    "transition",
    "value_iteration_exact",
]

__version__ = "0.1.0"
