"""Edge selectors: uninformed baselines, belief-based rules, and the linear policy.

A selector's only obligation is to return one unevaluated edge on the
current lazy shortest path. ``selection_probs`` exposes the selection rule
as a distribution over candidates, which exact policy evaluation integrates
over; deterministic selectors are point masses.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .graph import shortest_path
from .worlds import posterior_edge_prob, prior_edge_prob, world_matrix

POLICY_FORMAT = "lazysp-policy"
POLICY_FORMAT_VERSION = 1

FEATURE_NAMES = ("prior", "posterior", "location", "delta_len", "delta_eval", "pdl")
N_FEATURES = len(FEATURE_NAMES)


class SelectorError(RuntimeError):
    """Selector queried outside its contract (e.g. fully evaluated path)."""


def unevaluated_path_edges(path, state):
    return [e for e in path.edges if not state.is_evaluated(e)]


def _require_candidates(path, state):
    candidates = unevaluated_path_edges(path, state)
    if not candidates:
        raise SelectorError("path is fully evaluated; nothing to select")
    return candidates


class EdgeSelector:
    """Base selector; subclasses implement ``select``."""

    name = "base"

    def select(self, graph, path, state, *, world=None, rng=None):
        raise NotImplementedError

    def selection_probs(self, graph, path, state, *, world=None):
        """Distribution over candidate edges; deterministic by default."""
        return {self.select(graph, path, state, world=world): 1.0}


class ForwardSelector(EdgeSelector):
    """First unevaluated edge along the path."""

    name = "forward"

    def select(self, graph, path, state, *, world=None, rng=None):
        return _require_candidates(path, state)[0]


class BackwardSelector(EdgeSelector):
    """Last unevaluated edge along the path."""

    name = "backward"

    def select(self, graph, path, state, *, world=None, rng=None):
        return _require_candidates(path, state)[-1]


class AlternateSelector(EdgeSelector):
    """First edge on even selection counts, last on odd.

    The selection count is the number of edges evaluated so far this
    episode, which for episodes starting from a fresh state is exactly the
    size of the evaluation record; this keeps the selector stateless.
    """

    name = "alternate"

    def select(self, graph, path, state, *, world=None, rng=None):
        candidates = _require_candidates(path, state)
        return candidates[0] if state.n_evaluated % 2 == 0 else candidates[-1]


class RandomSelector(EdgeSelector):
    """Uniform choice among unevaluated path edges."""

    name = "random"

    def select(self, graph, path, state, *, world=None, rng=None):
        candidates = _require_candidates(path, state)
        if rng is None:
            raise SelectorError("random selector needs an rng")
        return candidates[int(rng.integers(len(candidates)))]

    def selection_probs(self, graph, path, state, *, world=None):
        candidates = _require_candidates(path, state)
        p = 1.0 / len(candidates)
        return {e: p for e in candidates}


class FailFastSelector(EdgeSelector):
    """Edge most likely to be invalid under the training-set prior."""

    name = "failfast"

    def __init__(self, invalid_priors):
        self.invalid_priors = np.asarray(invalid_priors, dtype=float)

    @classmethod
    def from_training_worlds(cls, training_worlds):
        return cls(prior_edge_prob(training_worlds))

    def select(self, graph, path, state, *, world=None, rng=None):
        candidates = _require_candidates(path, state)
        scores = self.invalid_priors[candidates]
        return candidates[int(np.argmax(scores))]  # argmax keeps the earliest tie


class PostFailFastSelector(EdgeSelector):
    """Edge most likely to be invalid under the posterior given evaluations."""

    name = "postfailfast"

    def __init__(self, training_worlds):
        self.worlds = world_matrix(training_worlds)

    def select(self, graph, path, state, *, world=None, rng=None):
        candidates = _require_candidates(path, state)
        posterior = posterior_edge_prob(state, self.worlds, graph.n_edges)
        return candidates[int(np.argmax(posterior[candidates]))]


def expected_evaluations_to_invalidate(p_valid):
    """Expected number of checks to hit an invalid edge, in the given order.

    For validity probabilities (p_1..p_n) checked in sequence this is
    sum_l (prod_{m<l} p_m) (1 - p_l) l; the all-valid outcome contributes
    nothing because the path is then never invalidated.
    """
    total = 0.0
    survive = 1.0
    for l, p in enumerate(p_valid, start=1):
        total += survive * (1.0 - p) * l
        survive *= p
    return total


# ---------------------------------------------------------------------------
# Features and the linear policy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureVector:
    """Per-candidate decision features, in FEATURE_NAMES order."""

    prior: float
    posterior: float
    location: float
    delta_len: float
    delta_eval: float
    pdl: float

    def as_array(self):
        return np.array(
            [self.prior, self.posterior, self.location, self.delta_len,
             self.delta_eval, self.pdl]
        )


def delta_len_sentinel(graph):
    """Finite stand-in for an infinite detour: twice the total edge length
    (no simple path can be longer than the sum of all edges)."""
    return 2.0 * graph.total_length()


def _hallucinate_removal(graph, path, state, edge):
    """(delta_len, delta_eval) after pretending ``edge`` is invalid."""
    alt = shortest_path(graph, state.invalid | {edge})
    if alt is None:
        return delta_len_sentinel(graph), 1.0
    unevaluated = sum(1 for e in alt.edges if not state.is_evaluated(e))
    return alt.length - path.length, unevaluated / len(alt.edges)


def compute_features(graph, path, edge, state, training_worlds=None,
                     priors=None, posterior=None):
    """Feature vector for one unevaluated candidate edge on the path.

    ``priors``/``posterior`` may be precomputed arrays; otherwise they are
    derived from ``training_worlds``.
    """
    candidates = unevaluated_path_edges(path, state)
    if edge not in candidates:
        raise SelectorError(f"edge {edge} is not an unevaluated path edge")
    if priors is None:
        priors = prior_edge_prob(training_worlds)
    if posterior is None:
        posterior = posterior_edge_prob(state, training_worlds, graph.n_edges)
    rank = candidates.index(edge)
    n = len(candidates)
    location = 1.0 if n == 1 else 1.0 - rank / (n - 1)
    delta_len, delta_eval = _hallucinate_removal(graph, path, state, edge)
    post = float(posterior[edge])
    return FeatureVector(
        prior=float(priors[edge]),
        posterior=post,
        location=location,
        delta_len=delta_len,
        delta_eval=delta_eval,
        pdl=post * delta_len,
    )


def decision_feature_matrix(graph, path, state, training_worlds=None,
                            priors=None, posterior=None):
    """(candidates, feature matrix) for every unevaluated edge on the path."""
    candidates = _require_candidates(path, state)
    if priors is None:
        priors = prior_edge_prob(training_worlds)
    if posterior is None:
        posterior = posterior_edge_prob(state, training_worlds, graph.n_edges)
    rows = [
        compute_features(graph, path, e, state, priors=priors, posterior=posterior).as_array()
        for e in candidates
    ]
    return candidates, np.vstack(rows)


def normalize_feature_matrix(features):
    """Min-max normalize each feature across the decision's candidates.

    Constant columns map to zero; monotone per column, so single-feature
    argmax selections are unaffected.
    """
    lo = features.min(axis=0)
    span = features.max(axis=0) - lo
    out = np.zeros_like(features, dtype=float)
    nonconst = span > 0
    out[:, nonconst] = (features[:, nonconst] - lo[nonconst]) / span[nonconst]
    return out


@dataclass
class LinearPolicy:
    """Linear scoring weights over the decision features."""

    weights: np.ndarray
    normalize: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} weights")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def scores(self, features):
        if self.normalize:
            features = normalize_feature_matrix(features)
        return features @ self.weights

    def save(self, path):
        obj = {
            "format": POLICY_FORMAT,
            "version": POLICY_FORMAT_VERSION,
            "normalize": bool(self.normalize),
            "weights": {name: float(w) for name, w in zip(FEATURE_NAMES, self.weights)},
        }
        with open(path, "w") as fh:
            json.dump(obj, fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            obj = json.load(fh)
        if obj.get("format") != POLICY_FORMAT:
            raise ValueError(f"{path}: not a policy file")
        if obj.get("version") != POLICY_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported policy version")
        weights = [obj["weights"][name] for name in FEATURE_NAMES]
        return cls(np.array(weights), normalize=obj["normalize"])


def linear_select(policy, candidates, features):
    """Argmax of the policy score; ties go to the earliest candidate."""
    if len(candidates) == 0:
        raise SelectorError("no candidates to score")
    return candidates[int(np.argmax(policy.scores(features)))]


class LinearSelector(EdgeSelector):
    """Learned selector: score features of every candidate, pick the argmax."""

    name = "linear"

    def __init__(self, policy, training_worlds):
        self.policy = policy
        self.worlds = world_matrix(training_worlds)
        self.priors = prior_edge_prob(self.worlds)

    def select(self, graph, path, state, *, world=None, rng=None):
        posterior = posterior_edge_prob(state, self.worlds, graph.n_edges)
        candidates, features = decision_feature_matrix(
            graph, path, state, priors=self.priors, posterior=posterior
        )
        return linear_select(self.policy, candidates, features)


BASELINE_NAMES = ("forward", "backward", "alternate", "random", "failfast", "postfailfast")


def make_baseline(name, training_worlds=None):
    """Construct a baseline selector by name.

    ``failfast`` and ``postfailfast`` require training worlds.
    """
    if name == "forward":
        return ForwardSelector()
    if name == "backward":
        return BackwardSelector()
    if name == "alternate":
        return AlternateSelector()
    if name == "random":
        return RandomSelector()
    if name == "failfast":
        if training_worlds is None:
            raise ValueError("failfast needs training worlds")
        return FailFastSelector.from_training_worlds(training_worlds)
    if name == "postfailfast":
        if training_worlds is None:
            raise ValueError("postfailfast needs training worlds")
        return PostFailFastSelector(training_worlds)
    raise ValueError(f"unknown baseline {name!r}; expected one of {BASELINE_NAMES}")
