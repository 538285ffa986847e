"""World distributions: sampling, exact supports, generators, and edge beliefs.

A world assigns every edge a validity bit; a distribution over worlds is the
prior the search operates under. Small hand-built lattice environments carry
an exact support (for dynamic programming and exact policy evaluation), grid
generators stamp worlds from parametric obstacles, and the belief helpers
turn a training set of worlds into per-edge invalidity probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from shapely.geometry import LineString, Point, box

from .engine import VALID
from .graph import ExplicitGraph, shortest_path

WORLDSET_MAGIC = "LAZYSP-WORLDS"
WORLDSET_VERSION = 1


class WorldError(ValueError):
    """Invalid world, distribution, or world-set file."""


@dataclass(frozen=True)
class World:
    """Per-edge validity bits (1 = valid, 0 = invalid)."""

    bits: tuple

    def __getitem__(self, eid):
        return self.bits[eid]

    def __len__(self):
        return len(self.bits)

    @classmethod
    def from_invalid(cls, n_edges, invalid_edges):
        invalid = set(invalid_edges)
        return cls(tuple(0 if e in invalid else 1 for e in range(n_edges)))

    def invalid_edges(self):
        return frozenset(e for e, b in enumerate(self.bits) if b == 0)


def is_feasible(graph, world):
    """Does the world leave at least one start-goal path valid?"""
    return shortest_path(graph, world.invalid_edges()) is not None


class WorldDistribution:
    """Sampleable distribution over worlds, optionally with exact support.

    ``sampler(rng)`` must return a World; when an exact support is supplied
    the probabilities must be non-negative and sum to one, and sampling draws
    from it directly.
    """

    def __init__(self, n_edges, sampler=None, support=None):
        self.n_edges = n_edges
        self.support = None
        if support is not None:
            support = [(w, float(p)) for w, p in support]
            total = sum(p for _, p in support)
            if any(p < 0 for _, p in support):
                raise WorldError("support probabilities must be non-negative")
            if abs(total - 1.0) > 1e-12:
                raise WorldError(f"support probabilities sum to {total}, not 1")
            for w, _ in support:
                if len(w) != n_edges:
                    raise WorldError("support world size does not match edge count")
            self.support = support
            self._probs = np.array([p for _, p in support])
        elif sampler is None:
            raise WorldError("need a sampler or an exact support")
        self._sampler = sampler

    def sample(self, rng):
        if self.support is not None:
            idx = rng.choice(len(self.support), p=self._probs)
            return self.support[idx][0]
        return self._sampler(rng)

    def sample_many(self, rng, n):
        return [self.sample(rng) for _ in range(n)]


# ---------------------------------------------------------------------------
# Hand-built lattice environments (exact supports)
# ---------------------------------------------------------------------------


def _parallel_route_graph(route_names, edge_lengths):
    """Graph of parallel two-edge start-goal routes, one mid vertex per route.

    Route i owns edge ids 2i ("<name>_left") and 2i+1 ("<name>_right").
    Returns (graph, name -> edge id map).
    """
    vertices = ["s", "g"] + [f"m_{name}" for name in route_names]
    edges = []
    names = {}
    for i, name in enumerate(route_names):
        mid = f"m_{name}"
        left, right = 2 * i, 2 * i + 1
        edges.append((left, "s", mid, edge_lengths[name]))
        edges.append((right, mid, "g", edge_lengths[name]))
        names[f"{name}_left"] = left
        names[f"{name}_right"] = right
    return ExplicitGraph(vertices, edges, "s", "g"), names


def env1_distribution():
    """Six-edge lattice with three routes and correlated failures.

    70%: top_left and middle_right invalid. 30%: top_left valid, and within
    that 50%: top_right invalid plus one of the remaining four edges invalid
    (uniformly), 50%: everything valid.
    Returns (graph, distribution, edge name -> id map).
    """
    graph, names = _parallel_route_graph(
        ["top", "middle", "bottom"], {"top": 1.0, "middle": 1.1, "bottom": 1.2}
    )
    n = graph.n_edges
    inv = lambda *edge_names: World.from_invalid(n, [names[e] for e in edge_names])
    support = [
        (inv("top_left", "middle_right"), 0.7),
        (inv(), 0.15),
    ]
    remaining = ["middle_left", "middle_right", "bottom_left", "bottom_right"]
    for other in remaining:
        support.append((inv("top_right", other), 0.3 * 0.5 * 0.25))
    dist = WorldDistribution(n, support=support)
    _check_support_feasible(graph, dist)
    return graph, dist, names


def env2_distribution():
    """Eight-edge lattice, four routes, two failure modes.

    60%: top_left, middle_right, bottom_left invalid (the base route is the
    shortest survivor). 40%: top_right and middle_right invalid (the bottom
    route survives). The base route is always valid.
    Returns (graph, distribution, edge name -> id map).
    """
    graph, names = _parallel_route_graph(
        ["top", "middle", "base", "bottom"],
        {"top": 1.0, "middle": 1.1, "base": 1.3, "bottom": 1.2},
    )
    n = graph.n_edges
    inv = lambda *edge_names: World.from_invalid(n, [names[e] for e in edge_names])
    support = [
        (inv("top_left", "middle_right", "bottom_left"), 0.6),
        (inv("top_right", "middle_right"), 0.4),
    ]
    dist = WorldDistribution(n, support=support)
    _check_support_feasible(graph, dist)
    return graph, dist, names


def _check_support_feasible(graph, dist):
    for world, _ in dist.support:
        if not is_feasible(graph, world):
            raise WorldError("support contains an infeasible world")


# ---------------------------------------------------------------------------
# Parametric grid-world generators
# ---------------------------------------------------------------------------

GRID_KINDS = ("onewall", "twowall", "forest", "gate")

#: Obstacle rectangles are slightly narrower than a cell in y so that a
#: corridor through a one-cell gap stays collision-free, and slightly under
#: half a cell in x so diagonal edges cannot sneak through a wall.
_WALL_HALF_X = 0.45
_WALL_MARGIN_Y = 0.4

_FEASIBILITY_RETRIES = 50


def grid_graph(rows, cols):
    """8-connected grid; vertex (r, c) has id r * cols + c.

    Start is the middle of the left border, goal the middle of the right.
    """
    if rows < 3 or cols < 3:
        raise WorldError("grid must be at least 3x3")
    vid = lambda r, c: r * cols + c
    vertices = [vid(r, c) for r in range(rows) for c in range(cols)]
    edges = []
    sqrt2 = math.sqrt(2.0)
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((len(edges), vid(r, c), vid(r, c + 1), 1.0))
            if r + 1 < rows:
                edges.append((len(edges), vid(r, c), vid(r + 1, c), 1.0))
            if r + 1 < rows and c + 1 < cols:
                edges.append((len(edges), vid(r, c), vid(r + 1, c + 1), sqrt2))
            if r + 1 < rows and c - 1 >= 0:
                edges.append((len(edges), vid(r, c), vid(r + 1, c - 1), sqrt2))
    start = vid(rows // 2, 0)
    goal = vid(rows // 2, cols - 1)
    return ExplicitGraph(vertices, edges, start, goal)


def _edge_segments(graph, cols):
    segs = []
    for eid, u, v, _ in graph.edges:
        pu = (u % cols, u // cols)  # (x, y) = (col, row)
        pv = (v % cols, v // cols)
        segs.append(LineString([pu, pv]))
    return segs


def _wall_rects(col, rows, gap_rows):
    """Rectangles blocking a vertical wall column except the given gap rows."""
    blocked = [r for r in range(rows) if r not in gap_rows]
    rects = []
    run = []
    for r in blocked + [None]:
        if run and (r is None or r != run[-1] + 1):
            rects.append(
                box(
                    col - _WALL_HALF_X,
                    run[0] - _WALL_MARGIN_Y,
                    col + _WALL_HALF_X,
                    run[-1] + _WALL_MARGIN_Y,
                )
            )
            run = []
        if r is not None:
            run.append(r)
    return rects


def _rasterize(graph, segments, obstacles):
    bits = []
    for seg in segments:
        hit = any(seg.intersects(obs) for obs in obstacles)
        bits.append(0 if hit else 1)
    return World(tuple(bits))


def _obstacles_for(kind, rows, cols, params, rng):
    gap = int(params.get("gap_width", 1))
    if kind == "onewall":
        col = int(params.get("wall_col", cols // 2))
        lo = int(rng.integers(0, rows - gap + 1))
        return _wall_rects(col, rows, set(range(lo, lo + gap)))
    if kind == "twowall":
        obstacles = []
        for col in (cols // 3, (2 * cols) // 3):
            lo = int(rng.integers(0, rows - gap + 1))
            obstacles += _wall_rects(col, rows, set(range(lo, lo + gap)))
        return obstacles
    if kind == "forest":
        n = int(params.get("n_obstacles", 8))
        radius = float(params.get("radius", 0.8))
        obstacles = []
        for _ in range(n):
            x = rng.uniform(0.5, cols - 1.5)
            y = rng.uniform(0.5, rows - 1.5)
            obstacles.append(Point(x, y).buffer(radius))
        return obstacles
    if kind == "gate":
        col = int(params.get("wall_col", cols // 2))
        n_gates = int(params.get("n_gates", 2))
        gate_rows = rng.choice(rows, size=min(n_gates, rows), replace=False)
        gaps = set()
        for r in gate_rows:
            gaps.update(range(int(r), min(int(r) + gap, rows)))
        return _wall_rects(col, rows, gaps)
    raise WorldError(f"unknown grid kind {kind!r}; expected one of {GRID_KINDS}")


def grid_world_generator(kind, rows, cols, params=None, seed=None):
    """(graph, distribution) for a parametric obstacle family on a grid.

    Worlds are produced by placing obstacles (wall with a random gap, two
    walls, random discs, wall with gates) and invalidating every edge whose
    segment intersects one. Sampling is deterministic given the caller's RNG;
    parameter sets that block all paths are resampled up to a retry cap.
    """
    params = dict(params or {})
    graph = grid_graph(rows, cols)
    segments = _edge_segments(graph, cols)

    def sampler(rng):
        for _ in range(_FEASIBILITY_RETRIES):
            world = _rasterize(graph, segments, _obstacles_for(kind, rows, cols, params, rng))
            if is_feasible(graph, world):
                return world
        raise WorldError(
            f"could not sample a feasible {kind} world in {_FEASIBILITY_RETRIES} tries"
        )

    dist = WorldDistribution(graph.n_edges, sampler=sampler)
    if seed is not None:
        # convenience: pre-seeded sample method for one-off callers
        dist.default_rng = np.random.default_rng(seed)
    return graph, dist


# ---------------------------------------------------------------------------
# Edge-validity beliefs from a training set of worlds
# ---------------------------------------------------------------------------


def world_matrix(training_worlds):
    """Stack worlds into an (N, |E|) 0/1 validity matrix (pass-through for arrays)."""
    if isinstance(training_worlds, np.ndarray):
        if training_worlds.size == 0:
            raise WorldError("empty training world set")
        return training_worlds
    if len(training_worlds) == 0:
        raise WorldError("empty training world set")
    return np.array([w.bits for w in training_worlds], dtype=np.int8)


def prior_edge_prob(training_worlds):
    """Per-edge probability of being INVALID across the training worlds."""
    mat = world_matrix(training_worlds)
    return 1.0 - mat.mean(axis=0)


def posterior_world_weights(state, training_worlds, n_edges):
    """Softmax weight of each training world given the evaluation record.

    Each world is scored by minus the number of evaluated edges whose
    observed outcome disagrees with that world.
    """
    mat = world_matrix(training_worlds)
    evaluated = [e for e in range(n_edges) if state.is_evaluated(e)]
    if not evaluated:
        return np.full(mat.shape[0], 1.0 / mat.shape[0])
    outcomes = np.array([1 if state.status(e) == VALID else 0 for e in evaluated])
    disagreements = (mat[:, evaluated] != outcomes[None, :]).sum(axis=1)
    z = -disagreements.astype(float)
    z -= z.max()
    w = np.exp(z)
    return w / w.sum()


def posterior_edge_prob(state, training_worlds, n_edges):
    """Per-edge INVALID probability under the softmax posterior over worlds."""
    mat = world_matrix(training_worlds)
    weights = posterior_world_weights(state, training_worlds, n_edges)
    return weights @ (1 - mat)


# ---------------------------------------------------------------------------
# World-set files
# ---------------------------------------------------------------------------


def save_worldset(path, graph, worlds):
    """Write a world set paired to ``graph`` via its content hash."""
    with open(path, "w") as fh:
        fh.write(
            f"{WORLDSET_MAGIC} v{WORLDSET_VERSION} "
            f"graph={graph.content_hash()} edges={graph.n_edges} count={len(worlds)}\n"
        )
        for world in worlds:
            if len(world) != graph.n_edges:
                raise WorldError("world size does not match graph")
            fh.write("".join(str(b) for b in world.bits) + "\n")


def load_worldset(path, graph=None):
    """Load a world set; when ``graph`` is given, enforce the hash pairing."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != WORLDSET_MAGIC:
            raise WorldError(f"{path}: not a world-set file")
        if header[1] != f"v{WORLDSET_VERSION}":
            raise WorldError(f"{path}: unsupported version {header[1]}")
        fields = dict(part.split("=") for part in header[2:])
        n_edges = int(fields["edges"])
        count = int(fields["count"])
        if graph is not None:
            if fields["graph"] != graph.content_hash():
                raise WorldError(f"{path}: world set was built for a different graph")
            if n_edges != graph.n_edges:
                raise WorldError(f"{path}: edge count mismatch")
        worlds = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if len(line) != n_edges or set(line) - {"0", "1"}:
                raise WorldError(f"{path}: malformed world row {line!r}")
            worlds.append(World(tuple(int(ch) for ch in line)))
    if len(worlds) != count:
        raise WorldError(f"{path}: expected {count} worlds, found {len(worlds)}")
    return worlds
