"""The lazy search loop and its decision-process view.

The search state is the record of edge evaluations so far (valid set,
invalid set). One loop iteration computes the shortest potentially-valid
path, asks a selector for one unevaluated edge on it, evaluates that edge
against the world, and repeats until the current path is fully verified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .graph import Path, shortest_path

UNEVALUATED = -1
INVALID = 0
VALID = 1


class ContractError(RuntimeError):
    """A caller or selector broke an interface contract."""


class InfeasibleProblemError(RuntimeError):
    """No start-goal path exists once known-invalid edges are removed."""


@dataclass(frozen=True)
class SearchState:
    """Evaluation record: which edges are known valid / known invalid."""

    valid: frozenset = frozenset()
    invalid: frozenset = frozenset()

    def __post_init__(self):
        if self.valid & self.invalid:
            raise ContractError("an edge cannot be both valid and invalid")

    @classmethod
    def fresh(cls):
        return cls(frozenset(), frozenset())

    def status(self, eid):
        if eid in self.valid:
            return VALID
        if eid in self.invalid:
            return INVALID
        return UNEVALUATED

    def is_evaluated(self, eid):
        return eid in self.valid or eid in self.invalid

    @property
    def n_evaluated(self):
        return len(self.valid) + len(self.invalid)

    def vector(self, n_edges):
        """{-1, 0, 1} encoding (unevaluated / invalid / valid) per edge id."""
        return tuple(self.status(e) for e in range(n_edges))


def transition(state, eid, world):
    """Apply one evaluation outcome; the edge must be unevaluated."""
    if state.is_evaluated(eid):
        raise ContractError(f"edge {eid} was already evaluated")
    if world[eid]:
        return SearchState(state.valid | {eid}, state.invalid)
    return SearchState(state.valid, state.invalid | {eid})


def current_path(graph, state):
    """Shortest path ignoring unevaluated edges' status (lazy view)."""
    return shortest_path(graph, state.invalid)


def action_set(graph, state):
    """Unevaluated edges of the current lazy shortest path, in path order."""
    path = current_path(graph, state)
    if path is None:
        raise InfeasibleProblemError("goal unreachable; no feasible path exists")
    return [e for e in path.edges if not state.is_evaluated(e)]


@dataclass(frozen=True)
class GoalCheck:
    is_goal: bool
    feasible: bool


def goal_test(graph, state):
    """True iff the current lazy shortest path is fully verified valid.

    An unreachable goal yields (is_goal=False, feasible=False) so callers can
    distinguish "not done yet" from "no feasible path exists".
    """
    path = current_path(graph, state)
    if path is None:
        return GoalCheck(False, False)
    return GoalCheck(all(e in state.valid for e in path.edges), True)


@dataclass
class EpisodeResult:
    """Outcome of one lazy-search run.

    ``evaluated`` holds (edge id, outcome bit, lazy path length at selection)
    triples in evaluation order; reward is -len(evaluated).
    """

    path: Optional[Path]
    feasible: bool
    evaluated: list = field(default_factory=list)

    @property
    def reward(self):
        return -len(self.evaluated)

    @property
    def n_evaluations(self):
        return len(self.evaluated)


def run_lazysp(graph, world, selector, rng=None, state=None, observer=None):
    """Run the lazy search loop to completion with the given edge selector.

    ``observer(path, state, edge)``, when given, is called after each
    selection but before the evaluation outcome is applied (used by trainers
    to record decisions). Starting from a partial ``state`` is allowed.
    """
    if state is None:
        state = SearchState.fresh()
    evaluated = []
    while True:
        path = current_path(graph, state)
        if path is None:
            return EpisodeResult(None, False, evaluated)
        if all(e in state.valid for e in path.edges):
            return EpisodeResult(path, True, evaluated)
        edge = selector.select(graph, path, state, world=world, rng=rng)
        if edge not in path.edges or state.is_evaluated(edge):
            raise ContractError(
                f"selector returned edge {edge} off the current path or already evaluated"
            )
        if observer is not None:
            observer(path, state, edge)
        outcome = 1 if world[edge] else 0
        evaluated.append((edge, outcome, path.length))
        state = transition(state, edge, world)
