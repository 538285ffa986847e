"""Trainers: tabular Q-learning on tiny graphs and imitation of the
clairvoyant oracle, plus exact dynamic programming over exact-support
distributions for ground truth.

The imitation trainer follows the interactive scheme: roll in a mixture of
a reference policy and the current learner, label every visited decision
with the clairvoyant oracle's choice, aggregate, refit, and keep the best
iterate on held-out validation worlds.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from .engine import SearchState, current_path, goal_test, run_lazysp, transition
from .oracle import ApproxOracleSelector, approx_oracle_action
from .selectors import (
    BASELINE_NAMES,
    EdgeSelector,
    LinearPolicy,
    LinearSelector,
    N_FEATURES,
    decision_feature_matrix,
    make_baseline,
    normalize_feature_matrix,
    unevaluated_path_edges,
)
from .worlds import posterior_edge_prob, prior_edge_prob, world_matrix

QTABLE_FORMAT = "lazysp-qtable"
QTABLE_FORMAT_VERSION = 1

#: Tabular methods enumerate up to 3^|E| states; refuse beyond this.
MAX_TABULAR_EDGES = 12

_STATE_CHARS = {-1: ".", 0: "0", 1: "1"}
_CHAR_STATES = {v: k for k, v in _STATE_CHARS.items()}


class TrainingError(RuntimeError):
    pass


def _guard_tabular(graph):
    if graph.n_edges > MAX_TABULAR_EDGES:
        raise TrainingError(
            f"graph has {graph.n_edges} edges; tabular methods support at most "
            f"{MAX_TABULAR_EDGES}"
        )


def _state_key(graph, state):
    return state.vector(graph.n_edges)


def _key_to_str(key):
    return "".join(_STATE_CHARS[v] for v in key)


def _str_to_key(text):
    return tuple(_CHAR_STATES[ch] for ch in text)


# ---------------------------------------------------------------------------
# Tabular Q-learning
# ---------------------------------------------------------------------------


@dataclass
class QLearnConfig:
    episodes: int = 3000
    exploration_episodes: int = 100
    epsilon0: float = 1.0
    gamma: float = 1.0
    alpha: float = 0.5


class QTable:
    """State-action values keyed by the {-1,0,1} state vector and edge id."""

    def __init__(self, n_edges):
        self.n_edges = n_edges
        self.values = {}
        self.visits = {}

    def get(self, key, action):
        return self.values.get((key, action), 0.0)

    def update(self, key, action, target, alpha):
        old = self.get(key, action)
        self.values[(key, action)] = old + alpha * (target - old)
        self.visits[(key, action)] = self.visits.get((key, action), 0) + 1

    def greedy_action(self, key, actions):
        best = max(self.get(key, a) for a in actions)
        for a in actions:  # path order: earliest of the maximizers
            if self.get(key, a) == best:
                return a

    def save(self, path):
        entries = sorted(
            [_key_to_str(key), action, value]
            for (key, action), value in self.values.items()
        )
        obj = {
            "format": QTABLE_FORMAT,
            "version": QTABLE_FORMAT_VERSION,
            "n_edges": self.n_edges,
            "entries": entries,
        }
        with open(path, "w") as fh:
            json.dump(obj, fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            obj = json.load(fh)
        if obj.get("format") != QTABLE_FORMAT:
            raise TrainingError(f"{path}: not a Q-table file")
        table = cls(obj["n_edges"])
        for key_str, action, value in obj["entries"]:
            table.values[(_str_to_key(key_str), int(action))] = float(value)
        return table


class QTableSelector(EdgeSelector):
    """Greedy selector over a learned Q-table (unseen pairs default to 0)."""

    name = "qlearn"

    def __init__(self, table):
        self.table = table

    def select(self, graph, path, state, *, world=None, rng=None):
        candidates = unevaluated_path_edges(path, state)
        return self.table.greedy_action(_state_key(graph, state), candidates)


def q_learning(graph, distribution, config=None, seed=0):
    """Train a tabular Q-table with epsilon-greedy exploration.

    Epsilon anneals linearly from epsilon0 to 0 over the exploration
    episodes and stays 0 afterwards; terminal states bootstrap 0.
    """
    _guard_tabular(graph)
    config = config or QLearnConfig()
    rng = np.random.default_rng(seed)
    table = QTable(graph.n_edges)
    for episode in range(config.episodes):
        if config.exploration_episodes > 0:
            epsilon = config.epsilon0 * max(
                0.0, 1.0 - episode / config.exploration_episodes
            )
        else:
            epsilon = 0.0
        world = distribution.sample(rng)
        state = SearchState.fresh()
        while True:
            path = current_path(graph, state)
            if path is None or all(e in state.valid for e in path.edges):
                break
            actions = unevaluated_path_edges(path, state)
            key = _state_key(graph, state)
            if rng.random() < epsilon:
                action = actions[int(rng.integers(len(actions)))]
            else:
                action = table.greedy_action(key, actions)
            nxt = transition(state, action, world)
            check = goal_test(graph, nxt)
            if check.is_goal or not check.feasible:
                target = -1.0
            else:
                nxt_actions = unevaluated_path_edges(current_path(graph, nxt), nxt)
                nxt_key = _state_key(graph, nxt)
                target = -1.0 + config.gamma * max(
                    table.get(nxt_key, a) for a in nxt_actions
                )
            table.update(key, action, target, config.alpha)
            state = nxt
    return table


# ---------------------------------------------------------------------------
# Exact dynamic programming over exact supports
# ---------------------------------------------------------------------------


class BeliefDP:
    """Optimal expected reward for an exact-support distribution.

    The belief over support worlds is a function of the evaluation record,
    so dynamic programming over state vectors is exact. Small graphs only.
    """

    def __init__(self, graph, support):
        _guard_tabular(graph)
        self.graph = graph
        self.worlds = [w for w, _ in support]
        self.probs = np.array([p for _, p in support])
        self.mat = world_matrix(self.worlds)
        self._v_memo = {}

    def _consistent(self, state):
        mask = np.ones(len(self.worlds), dtype=bool)
        for e in state.valid:
            mask &= self.mat[:, e] == 1
        for e in state.invalid:
            mask &= self.mat[:, e] == 0
        return mask

    def q_values(self, state):
        """action -> optimal expected reward of taking it in ``state``."""
        mask = self._consistent(state)
        weights = self.probs * mask
        total = weights.sum()
        if total <= 0:
            raise TrainingError("state is inconsistent with the support")
        weights = weights / total
        path = current_path(self.graph, state)
        actions = unevaluated_path_edges(path, state)
        out = {}
        for a in actions:
            value = -1.0
            for idx, w in enumerate(self.worlds):
                if weights[idx] > 0:
                    value += weights[idx] * self.value(transition(state, a, w))
            out[a] = value
        return out

    def value(self, state):
        key = _state_key(self.graph, state)
        if key in self._v_memo:
            return self._v_memo[key]
        check = goal_test(self.graph, state)
        if check.is_goal:
            self._v_memo[key] = 0.0
            return 0.0
        if not check.feasible:
            raise TrainingError("reached an infeasible state; support broken")
        result = max(self.q_values(state).values())
        self._v_memo[key] = result
        return result

    def reachable_states(self):
        """All (state, consistent-world mask) pairs reachable from scratch."""
        seen = {}
        stack = [SearchState.fresh()]
        while stack:
            state = stack.pop()
            key = _state_key(self.graph, state)
            if key in seen:
                continue
            seen[key] = state
            if goal_test(self.graph, state).is_goal:
                continue
            path = current_path(self.graph, state)
            mask = self._consistent(state)
            for a in unevaluated_path_edges(path, state):
                for idx, w in enumerate(self.worlds):
                    if mask[idx]:
                        stack.append(transition(state, a, w))
        return list(seen.values())


def value_iteration_exact(graph, support):
    """Exact optimum of the expected-evaluations objective (a reward)."""
    return BeliefDP(graph, support).value(SearchState.fresh())


def exact_policy_value(graph, support, selector):
    """Exact expected reward of a fixed selector by support enumeration.

    Integrates over the selector's per-decision distribution, so stochastic
    selectors (e.g. uniform-random) are evaluated exactly too. The selector
    must be a stateless function of the search state.
    """
    _guard_tabular(graph)
    total = 0.0
    for world, prob in support:
        memo = {}

        def expected_evals(state):
            key = _state_key(graph, state)
            if key in memo:
                return memo[key]
            path = current_path(graph, state)
            if path is None:
                raise TrainingError("infeasible support world")
            if all(e in state.valid for e in path.edges):
                memo[key] = 0.0
                return 0.0
            result = 0.0
            for edge, p in selector.selection_probs(graph, path, state, world=world).items():
                result += p * (1.0 + expected_evals(transition(state, edge, world)))
            memo[key] = result
            return result

        total += prob * -expected_evals(SearchState.fresh())
    return total


# ---------------------------------------------------------------------------
# Imitation of the clairvoyant oracle
# ---------------------------------------------------------------------------


class ImitationDataset:
    """Aggregated classification data: one entry per visited decision.

    Each entry is (feature matrix over candidate edges, index of the
    oracle-chosen edge, episode id, iteration id); aggregation across
    iterations is append-only.
    """

    def __init__(self):
        self.entries = []

    def add(self, features, label, episode_id, iteration_id):
        if not 0 <= label < features.shape[0]:
            raise TrainingError("oracle label outside candidate range")
        self.entries.append((features, label, episode_id, iteration_id))

    def __len__(self):
        return len(self.entries)


def classifier_fit(dataset, l2=1e-3):
    """Fit linear weights by softmax-over-candidates cross-entropy.

    The 0/1 imitation objective ranges over a variable-size candidate set,
    so the surrogate treats each decision as its own softmax. Features are
    min-max normalized per decision, the loss is averaged over decisions
    (duplicating data leaves the optimum unchanged), and the fit is a
    deterministic L-BFGS run from zero weights.
    """
    if len(dataset) == 0:
        raise TrainingError("empty imitation dataset")
    multi = [(f, y) for f, y, _, _ in dataset.entries if f.shape[0] > 1]
    if not multi:
        warnings.warn("every decision has a single candidate; returning zero weights")
        return LinearPolicy(np.zeros(N_FEATURES))
    kmax = max(f.shape[0] for f, _ in multi)
    n = len(multi)
    feats = np.zeros((n, kmax, N_FEATURES))
    mask = np.zeros((n, kmax), dtype=bool)
    labels = np.zeros(n, dtype=int)
    for i, (f, y) in enumerate(multi):
        k = f.shape[0]
        feats[i, :k] = normalize_feature_matrix(f)
        mask[i, :k] = True
        labels[i] = y
    neg_inf = -1e30

    def objective(w):
        scores = feats @ w
        scores = np.where(mask, scores, neg_inf)
        lse = logsumexp(scores, axis=1)
        loss = float(np.mean(lse - scores[np.arange(n), labels]) + l2 * w @ w)
        probs = softmax(scores, axis=1)
        resid = probs.copy()
        resid[np.arange(n), labels] -= 1.0
        grad = np.einsum("nk,nkf->f", resid, feats) / n + 2.0 * l2 * w
        return loss, grad

    result = minimize(objective, np.zeros(N_FEATURES), jac=True, method="L-BFGS-B")
    return LinearPolicy(result.x)


def mixture_rollin(learner, rollin_policy, beta, rng):
    """Per-episode coin: Bernoulli(beta) picks the roll-in policy for the
    whole episode, otherwise the learner."""
    if not 0.0 <= beta <= 1.0:
        raise TrainingError(f"beta must be in [0, 1], got {beta}")
    return rollin_policy if rng.random() < beta else learner


@dataclass
class StrollConfig:
    iterations: int = 4
    episodes_per_iteration: int = 25
    rollin: str = "oracle"  # "oracle" or "heuristic"
    l2: float = 1e-3
    validation_episodes: int = 200
    beta_schedule: Optional[list] = None

    def betas(self):
        if self.beta_schedule is not None:
            betas = [float(b) for b in self.beta_schedule]
            if len(betas) != self.iterations:
                raise TrainingError("beta schedule length must equal iterations")
        elif self.rollin == "oracle":
            betas = [1.0] + [0.0] * (self.iterations - 1)
        elif self.rollin == "heuristic":
            betas = [0.9 ** (i + 1) for i in range(self.iterations)]
        else:
            raise TrainingError(f"unknown rollin kind {self.rollin!r}")
        if any(b2 > b1 + 1e-12 for b1, b2 in zip(betas, betas[1:])):
            raise TrainingError("beta schedule must be non-increasing")
        return betas


def mean_episode_reward(graph, worlds, selector, seed=0):
    """Average reward of running the selector once per world."""
    total = 0
    for i, world in enumerate(worlds):
        rng = np.random.default_rng([seed, i])
        total += run_lazysp(graph, world, selector, rng=rng).reward
    return total / len(worlds)


def best_heuristic_rollin(graph, training_worlds, seed=0):
    """(name, selector) of the baseline with the best training reward."""
    best = None
    for name in BASELINE_NAMES:
        selector = make_baseline(name, training_worlds=training_worlds)
        reward = mean_episode_reward(graph, training_worlds, selector, seed=seed)
        if best is None or reward > best[2]:
            best = (name, selector, reward)
    return best[0], best[1]


def stroll_train(graph, distribution, training_worlds, config=None, seed=0,
                 out_dir=None):
    """Iterative imitation of the approximate clairvoyant oracle.

    Per iteration: run episodes under the mixture of the roll-in policy and
    the current learner, label every decision with the oracle's choice,
    aggregate, refit the linear classifier, and score the new policy on
    held-out validation worlds. Returns (best policy, history).
    """
    config = config or StrollConfig()
    betas = config.betas()
    worlds_mat = world_matrix(training_worlds)
    priors = prior_edge_prob(worlds_mat)

    val_rng = np.random.default_rng([seed, 0x5A1])
    validation_worlds = distribution.sample_many(val_rng, config.validation_episodes)

    oracle = ApproxOracleSelector()
    if config.rollin == "oracle":
        rollin_name, rollin_policy = "oracle", oracle
    else:
        rollin_name, rollin_policy = best_heuristic_rollin(
            graph, training_worlds, seed=seed
        )

    learner = LinearPolicy(np.zeros(N_FEATURES))
    dataset = ImitationDataset()
    history = {"rollin": rollin_name, "iterations": []}
    log_lines = []
    best_policy, best_reward = None, -math.inf

    for iteration, beta in enumerate(betas):
        learner_selector = LinearSelector(learner, worlds_mat)
        for episode in range(config.episodes_per_iteration):
            rng = np.random.default_rng([seed, 1, iteration, episode])
            world = distribution.sample(rng)
            episode_selector = mixture_rollin(learner_selector, rollin_policy, beta, rng)

            def record(path, state, _chosen_edge):
                posterior = posterior_edge_prob(state, worlds_mat, graph.n_edges)
                candidates, features = decision_feature_matrix(
                    graph, path, state, priors=priors, posterior=posterior
                )
                oracle_edge = approx_oracle_action(graph, state, world)
                dataset.add(features, candidates.index(oracle_edge), episode, iteration)

            result = run_lazysp(graph, world, episode_selector, rng=rng, observer=record)
            log_lines.append(
                {"iteration": iteration, "episode": episode, "reward": result.reward}
            )

        learner = classifier_fit(dataset, l2=config.l2)
        val_reward = mean_episode_reward(
            graph, validation_worlds, LinearSelector(learner, worlds_mat),
            seed=seed + 977,
        )
        history["iterations"].append(
            {
                "iteration": iteration,
                "beta": beta,
                "dataset_size": len(dataset),
                "validation_reward": val_reward,
                "policy": learner,
            }
        )
        if val_reward > best_reward:
            best_policy, best_reward = learner, val_reward
        if out_dir is not None:
            _write_checkpoint(out_dir, iteration, learner, len(dataset), val_reward)

    if out_dir is not None:
        with open(os.path.join(out_dir, "training_log.jsonl"), "w") as fh:
            for line in log_lines:
                fh.write(json.dumps(line, sort_keys=True) + "\n")
    history["log"] = log_lines
    history["best_validation_reward"] = best_reward
    return best_policy, history


def _write_checkpoint(out_dir, iteration, policy, dataset_size, val_reward):
    os.makedirs(out_dir, exist_ok=True)
    policy.save(os.path.join(out_dir, f"policy_iter_{iteration:03d}.json"))
    meta = {
        "iteration": iteration,
        "dataset_size": dataset_size,
        "validation_reward": val_reward,
    }
    with open(os.path.join(out_dir, f"checkpoint_iter_{iteration:03d}.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
