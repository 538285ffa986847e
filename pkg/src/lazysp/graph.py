"""Explicit graphs, deterministic shortest paths, and simple-path enumeration.

Graphs are undirected, immutable after construction, and small enough that
recomputing Dijkstra per query is fine. Ties between equal-length shortest
paths are broken by the lexicographically smallest edge-id sequence so that
every query is reproducible across runs and platforms.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass, field

GRAPH_FORMAT = "lazysp-graph"
GRAPH_FORMAT_VERSION = 1

#: Inclusive slack used when comparing path lengths against a bound, to
#: absorb float summation noise between different traversal orders.
LENGTH_EPS = 1e-9


class GraphError(ValueError):
    """Invalid graph structure or query."""


class PathEnumerationCapError(RuntimeError):
    """Raised when simple-path enumeration exceeds the configured cap.

    Signals that the graph is too large for exact (enumeration-based) use.
    """


@dataclass(frozen=True)
class Path:
    """A start-to-goal walk: vertex sequence, edge-id sequence, total length."""

    vertices: tuple
    edges: tuple
    length: float

    def __len__(self):
        return len(self.edges)


class ExplicitGraph:
    """Undirected graph with positive edge lengths and fixed start/goal.

    Edge ids must be dense 0..|E|-1; each edge is usable in both directions.
    """

    def __init__(self, vertices, edges, start, goal):
        self.vertices = list(vertices)
        self.edges = [(int(eid), u, v, float(length)) for eid, u, v, length in edges]
        self.start = start
        self.goal = goal
        self._validate()
        self._adjacency = self._build_adjacency()

    def _validate(self):
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise GraphError("duplicate vertex ids")
        if self.start not in vset or self.goal not in vset:
            raise GraphError("start/goal must be graph vertices")
        if self.start == self.goal:
            raise GraphError("start and goal must differ")
        ids = sorted(eid for eid, _, _, _ in self.edges)
        if ids != list(range(len(self.edges))):
            raise GraphError("edge ids must be dense 0..|E|-1")
        for eid, u, v, length in self.edges:
            if u not in vset or v not in vset:
                raise GraphError(f"edge {eid} references unknown vertex")
            if not (length > 0.0) or not math.isfinite(length):
                raise GraphError(f"edge {eid} must have positive finite length")

    def _build_adjacency(self):
        adj = {v: [] for v in self.vertices}
        for eid, u, v, length in self.edges:
            adj[u].append((v, eid, length))
            adj[v].append((u, eid, length))
        # sorted neighbour order keeps traversal deterministic
        for v in adj:
            adj[v].sort(key=lambda t: t[1])
        return adj

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_endpoints(self, eid):
        _, u, v, _ = self.edges[eid]
        return u, v

    def edge_length(self, eid):
        return self.edges[eid][3]

    def total_length(self):
        return sum(length for _, _, _, length in self.edges)

    # -- serialization ----------------------------------------------------

    def to_json_obj(self):
        return {
            "format": GRAPH_FORMAT,
            "version": GRAPH_FORMAT_VERSION,
            "vertices": list(self.vertices),
            "edges": [[eid, u, v, length] for eid, u, v, length in self.edges],
            "start": self.start,
            "goal": self.goal,
        }

    @classmethod
    def from_json_obj(cls, obj):
        if obj.get("format") != GRAPH_FORMAT:
            raise GraphError(f"not a graph file (format={obj.get('format')!r})")
        if obj.get("version") != GRAPH_FORMAT_VERSION:
            raise GraphError(f"unsupported graph file version {obj.get('version')!r}")
        return cls(obj["vertices"], obj["edges"], obj["start"], obj["goal"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_obj(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_obj(json.load(fh))

    def content_hash(self):
        """Stable hash of the graph content, used to pair graph/world files."""
        blob = json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _reconstruct(graph, edge_seq):
    vertices = [graph.start]
    length = 0.0
    for eid in edge_seq:
        u, v = graph.edge_endpoints(eid)
        nxt = v if vertices[-1] == u else u
        vertices.append(nxt)
        length += graph.edge_length(eid)
    return Path(tuple(vertices), tuple(edge_seq), length)


def shortest_path(graph, excluded=frozenset()):
    """Minimum-length start-to-goal path avoiding ``excluded`` edge ids.

    Among equal-length optima the lexicographically smallest edge-id
    sequence wins. Returns None when the goal is unreachable.
    """
    excluded = frozenset(excluded)
    start, goal = graph.start, graph.goal
    best = {start: (0.0, ())}
    heap = [(0.0, (), start)]
    settled = set()
    while heap:
        dist, seq, u = heapq.heappop(heap)
        if u in settled or (dist, seq) != best.get(u):
            continue
        settled.add(u)
        if u == goal:
            return _reconstruct(graph, seq)
        for v, eid, length in graph._adjacency[u]:
            if eid in excluded or v in settled:
                continue
            cand = (dist + length, seq + (eid,))
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, (cand[0], cand[1], v))
    return None


def distances_from(graph, source, excluded=frozenset()):
    """Plain Dijkstra lengths from ``source`` to every reachable vertex."""
    excluded = frozenset(excluded)
    dist = {source: 0.0}
    heap = [(0.0, 0, source)]
    tie = 0  # heap tie-breaker; vertex ids may not be comparable
    settled = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in settled:
            continue
        settled.add(u)
        for v, eid, length in graph._adjacency[u]:
            if eid in excluded or v in settled:
                continue
            nd = d + length
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                tie += 1
                heapq.heappush(heap, (nd, tie, v))
    return dist


def enumerate_paths_shorter_than(graph, bound, excluded=frozenset(), cap=100000):
    """All simple start-to-goal paths with length <= bound avoiding ``excluded``.

    Depth-first search pruned by exact distance-to-goal lower bounds; raises
    PathEnumerationCapError beyond ``cap`` found paths, which means the graph
    is too large for exact oracle use.
    """
    if not math.isfinite(bound):
        raise GraphError("bound must be finite")
    excluded = frozenset(excluded)
    to_goal = distances_from(graph, graph.goal, excluded)
    slack = bound + LENGTH_EPS
    results = []

    def dfs(u, visited, seq, length):
        if length + to_goal.get(u, math.inf) > slack:
            return
        if u == graph.goal:
            if len(results) >= cap:
                raise PathEnumerationCapError(
                    f"more than {cap} paths within bound {bound}"
                )
            results.append(_reconstruct(graph, seq))
            return
        for v, eid, elen in graph._adjacency[u]:
            if eid in excluded or v in visited:
                continue
            dfs(v, visited | {v}, seq + (eid,), length + elen)

    dfs(graph.start, {graph.start}, (), 0.0)
    return results
