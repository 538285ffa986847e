import numpy as np
import pytest

from lazysp.engine import SearchState, transition
from lazysp.graph import ExplicitGraph
from lazysp.worlds import World, is_feasible


def diamond_graph():
    """s-a-g (length 2.0) and s-b-g (length 2.2), four edges."""
    edges = [
        (0, "s", "a", 1.0),
        (1, "a", "g", 1.0),
        (2, "s", "b", 1.1),
        (3, "b", "g", 1.1),
    ]
    return ExplicitGraph(["s", "a", "b", "g"], edges, "s", "g")


def random_connected_graph(rng, max_vertices=30, max_extra_edges=None):
    """Random graph built from a spanning tree plus extra edges.

    Start is vertex 0, goal the last vertex; lengths uniform in (0.5, 2.0)
    so length ties have measure zero.
    """
    n = int(rng.integers(4, max_vertices + 1))
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.append((len(edges), u, v, float(rng.uniform(0.5, 2.0))))
    if max_extra_edges is None:
        max_extra_edges = n
    present = {(min(u, v), max(u, v)) for _, u, v, _ in edges}
    for _ in range(int(rng.integers(0, max_extra_edges + 1))):
        u, v = int(rng.integers(0, n)), int(rng.integers(0, n))
        if u == v or (min(u, v), max(u, v)) in present:
            continue
        present.add((min(u, v), max(u, v)))
        edges.append((len(edges), u, v, float(rng.uniform(0.5, 2.0))))
    return ExplicitGraph(list(range(n)), edges, 0, n - 1)


def random_world(rng, graph, p_invalid=0.3, require_feasible=True, max_tries=200):
    for _ in range(max_tries):
        bits = tuple(int(rng.random() >= p_invalid) for _ in range(graph.n_edges))
        world = World(bits)
        if not require_feasible or is_feasible(graph, world):
            return world
    return World(tuple([1] * graph.n_edges))


def random_consistent_state(rng, graph, world, max_steps=None):
    """Partial evaluation record consistent with ``world``."""
    state = SearchState.fresh()
    if max_steps is None:
        max_steps = graph.n_edges
    n = int(rng.integers(0, max_steps + 1))
    order = rng.permutation(graph.n_edges)[:n]
    for e in order:
        state = transition(state, int(e), world)
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
