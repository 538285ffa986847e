"""Clairvoyant selectors: edge choice when the world is fully known.

With the world revealed, the cheapest way to finish the search is to
invalidate every not-yet-eliminated path at most as long as the shortest
feasible one, using as few edge checks as possible: a set cover over those
paths by the world's invalid edges. This module provides the exact cover
value (brute force, small graphs), the greedy cover, and the cheap
path-length surrogate used as the training-time oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .engine import InfeasibleProblemError, current_path, goal_test, transition
from .graph import enumerate_paths_shorter_than, shortest_path
from .selectors import EdgeSelector, SelectorError, unevaluated_path_edges

DEFAULT_PATH_CAP = 20000


@dataclass
class CoverInstance:
    """Set-cover view of a search state under a known world.

    ``universe`` holds the paths still to be eliminated (no longer than the
    shortest feasible path, avoiding known-invalid edges, each containing at
    least one world-invalid edge); ``membership`` maps candidate invalid
    edges to the universe paths they appear on.
    """

    universe: list
    candidates: list
    membership: dict


def build_cover_instance(graph, state, world, cap=DEFAULT_PATH_CAP):
    feasible_path = shortest_path(graph, world.invalid_edges())
    if feasible_path is None:
        raise InfeasibleProblemError("world leaves the goal unreachable")
    invalid = world.invalid_edges()
    universe = [
        p
        for p in enumerate_paths_shorter_than(
            graph, feasible_path.length, excluded=state.invalid, cap=cap
        )
        if any(e in invalid for e in p.edges)
    ]
    membership = {}
    for idx, path in enumerate(universe):
        for e in path.edges:
            if e in invalid:
                membership.setdefault(e, set()).add(idx)
    candidates = sorted(membership)
    return CoverInstance(universe, candidates, membership)


def exact_cover_value(graph, state, world, cap=DEFAULT_PATH_CAP):
    """Minimum number of invalid edges eliminating every universe path."""
    inst = build_cover_instance(graph, state, world, cap=cap)
    n_paths = len(inst.universe)
    if n_paths == 0:
        return 0
    all_paths = set(range(n_paths))
    for size in range(1, len(inst.candidates) + 1):
        for combo in itertools.combinations(inst.candidates, size):
            covered = set()
            for e in combo:
                covered |= inst.membership[e]
            if covered == all_paths:
                return size
    raise RuntimeError("universe cannot be covered; inconsistent instance")


def greedy_cover(graph, state, world, cap=DEFAULT_PATH_CAP):
    """Greedy cover: repeatedly take the invalid edge on the most surviving
    universe paths (smallest edge id on ties)."""
    inst = build_cover_instance(graph, state, world, cap=cap)
    remaining = set(range(len(inst.universe)))
    chosen = []
    while remaining:
        best_edge, best_gain = None, -1
        for e in inst.candidates:
            gain = len(inst.membership[e] & remaining)
            if gain > best_gain:
                best_edge, best_gain = e, gain
        if best_gain <= 0:
            raise RuntimeError("universe cannot be covered; inconsistent instance")
        chosen.append(best_edge)
        remaining -= inst.membership[best_edge]
    return chosen


def approx_oracle_action(graph, state, world):
    """Cheap clairvoyant choice: among the current path's invalid edges, take
    the one whose removal lengthens the shortest path the most.

    Disconnection counts as an infinite gain. When every edge on the path is
    valid the search is already on its terminal path, and the first
    unevaluated edge is returned as the documented fallback.
    """
    path = current_path(graph, state)
    if path is None:
        raise InfeasibleProblemError("goal unreachable")
    candidates = unevaluated_path_edges(path, state)
    if not candidates:
        raise SelectorError("path is fully evaluated; nothing to select")
    invalid_on_path = [e for e in candidates if world[e] == 0]
    if not invalid_on_path:
        return candidates[0]
    best_edge, best_gain = None, -math.inf
    for e in invalid_on_path:
        alt = shortest_path(graph, state.invalid | {e})
        gain = math.inf if alt is None else alt.length - path.length
        if gain > best_gain:  # strict: ties keep the earliest along the path
            best_edge, best_gain = e, gain
    return best_edge


class ApproxOracleSelector(EdgeSelector):
    """Clairvoyant selector wrapping ``approx_oracle_action``."""

    name = "oracle"

    def select(self, graph, path, state, *, world=None, rng=None):
        if world is None:
            raise SelectorError("oracle selector needs the world revealed")
        return approx_oracle_action(graph, state, world)


def clairvoyant_value(graph, state, world, _memo=None):
    """Optimal remaining reward when the world is known (exact DP).

    Explores the deterministic known-world decision process; intended for
    small graphs only.
    """
    if _memo is None:
        _memo = {}
    key = state.vector(graph.n_edges)
    if key in _memo:
        return _memo[key]
    check = goal_test(graph, state)
    if not check.feasible:
        raise InfeasibleProblemError("goal unreachable")
    if check.is_goal:
        _memo[key] = 0.0
        return 0.0
    path = current_path(graph, state)
    best = -math.inf
    for e in unevaluated_path_edges(path, state):
        value = -1.0 + clairvoyant_value(graph, transition(state, e, world), world, _memo)
        best = max(best, value)
    _memo[key] = best
    return best


def clairvoyant_q_value(graph, state, action, world):
    """Reward of taking ``action`` and then following the optimal
    clairvoyant policy for the known world."""
    return -1.0 + clairvoyant_value(graph, transition(state, action, world), world)
