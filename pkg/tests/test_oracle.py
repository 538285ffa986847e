import math

import numpy as np
import pytest

from lazysp.engine import (
    InfeasibleProblemError,
    SearchState,
    current_path,
    run_lazysp,
    transition,
)
from lazysp.graph import ExplicitGraph
from lazysp.oracle import (
    ApproxOracleSelector,
    approx_oracle_action,
    build_cover_instance,
    clairvoyant_q_value,
    clairvoyant_value,
    exact_cover_value,
    greedy_cover,
)
from lazysp.worlds import World, is_feasible

from conftest import diamond_graph, random_connected_graph, random_world


def shared_edge_graph():
    """Three short routes through a hub plus one long safe route.

    Routes P1 = (0, 1), P2 = (0, 2), P3 = (3, 4) share structure so that
    edge 0 covers two of them at once; edges 5-6 form the long feasible
    detour.
    """
    edges = [
        (0, "s", "h", 1.0),
        (1, "h", "g", 1.0),
        (2, "h", "g", 1.05),
        (3, "s", "m", 1.0),
        (4, "m", "g", 1.1),
        (5, "s", "b", 2.0),
        (6, "b", "g", 2.0),
    ]
    return ExplicitGraph(["s", "h", "m", "b", "g"], edges, "s", "g")


class TestCoverInstance:
    def test_shared_edge_instance(self):
        g = shared_edge_graph()
        # world invalidates the hub entry (covers P1 and P2) and edge 4
        world = World((0, 1, 1, 1, 0, 1, 1))
        inst = build_cover_instance(g, SearchState.fresh(), world)
        assert len(inst.universe) == 3
        assert inst.candidates == [0, 4]
        assert exact_cover_value(g, SearchState.fresh(), world) == 2
        assert greedy_cover(g, SearchState.fresh(), world) == [0, 4]

    def test_empty_universe_when_optimum_survives(self):
        g = diamond_graph()
        world = World((1, 1, 1, 1))
        assert exact_cover_value(g, SearchState.fresh(), world) == 0
        assert greedy_cover(g, SearchState.fresh(), world) == []

    def test_known_invalid_paths_excluded(self):
        g = shared_edge_graph()
        world = World((0, 1, 1, 1, 0, 1, 1))
        state = transition(SearchState.fresh(), 0, world)
        inst = build_cover_instance(g, state, world)
        # eliminating edge 0 removed P1 and P2 from the universe
        assert [p.edges for p in inst.universe] == [(3, 4)]
        assert exact_cover_value(g, state, world) == 1

    def test_disjoint_routes_need_one_edge_each(self, rng):
        # k disjoint short routes, each with one invalid edge, plus a
        # feasible long one: minimum cover is exactly k
        for k in (2, 3, 4):
            vertices = ["s", "g"] + [f"m{i}" for i in range(k)] + ["b"]
            edges = []
            for i in range(k):
                edges.append((len(edges), "s", f"m{i}", 1.0 + 0.01 * i))
                edges.append((len(edges), f"m{i}", "g", 1.0))
            edges.append((len(edges), "s", "b", 3.0))
            edges.append((len(edges), "b", "g", 3.0))
            g = ExplicitGraph(vertices, edges, "s", "g")
            bits = [1] * g.n_edges
            for i in range(k):
                bits[2 * i] = 0
            world = World(tuple(bits))
            assert exact_cover_value(g, SearchState.fresh(), world) == k
            assert len(greedy_cover(g, SearchState.fresh(), world)) == k

    def test_greedy_within_log_factor_of_exact(self, rng):
        for _ in range(40):
            g = random_connected_graph(rng, max_vertices=8)
            world = random_world(rng, g)
            exact = exact_cover_value(g, SearchState.fresh(), world)
            greedy = len(greedy_cover(g, SearchState.fresh(), world))
            assert greedy >= exact
            if exact:
                n = len(build_cover_instance(g, SearchState.fresh(), world).universe)
                harmonic = sum(1 / i for i in range(1, n + 1))
                assert greedy <= harmonic * exact + 1e-9

    def test_chosen_edge_shrinks_universe(self, rng):
        for _ in range(30):
            g = random_connected_graph(rng, max_vertices=8)
            world = random_world(rng, g)
            inst = build_cover_instance(g, SearchState.fresh(), world)
            if not inst.candidates:
                continue
            e = inst.candidates[0]
            after = build_cover_instance(g, transition(SearchState.fresh(), e, world), world)
            assert len(after.universe) == len(inst.universe) - len(inst.membership[e])

    def test_infeasible_world_rejected(self):
        g = diamond_graph()
        with pytest.raises(InfeasibleProblemError):
            build_cover_instance(g, SearchState.fresh(), World((0, 1, 0, 1)))


class TestApproxOracle:
    def test_diamond_prefers_larger_length_gain(self):
        g = diamond_graph()
        # both edges of the short route invalid; removing either reroutes to
        # the 2.2 detour, so the earliest along the path wins
        world = World((0, 0, 1, 1))
        assert approx_oracle_action(g, SearchState.fresh(), world) == 0

    def test_gain_ranking(self):
        g = shared_edge_graph()
        # edge 0 invalid: its removal reroutes to 2.05 (gain 0.05 over 2.0);
        # removing edge 1 instead reroutes through edge 2 (also short)
        world = World((1, 0, 1, 1, 0, 1, 1))
        action = approx_oracle_action(g, SearchState.fresh(), world)
        assert action == 1

    def test_all_valid_falls_back_to_forward(self):
        g = diamond_graph()
        assert approx_oracle_action(g, SearchState.fresh(), World((1, 1, 1, 1))) == 0

    def test_disconnection_dominates_finite_gain(self):
        # infeasible world at the function level: cutting edge 2 leaves no
        # route at all, which outranks any finite detour gain
        edges = [
            (0, "s", "a", 1.0),
            (1, "a", "g", 1.0),
            (2, "s", "b", 1.1),
            (3, "b", "g", 1.1),
        ]
        g = ExplicitGraph(["s", "a", "b", "g"], edges, "s", "g")
        world = World((0, 1, 1, 0))
        state = transition(SearchState.fresh(), 0, world)
        # current path is now (2, 3); edge 3 is invalid and cuts the graph
        assert approx_oracle_action(g, state, world) == 3

    def test_selector_requires_world(self):
        g = diamond_graph()
        path = current_path(g, SearchState.fresh())
        sel = ApproxOracleSelector()
        with pytest.raises(Exception):
            sel.select(g, path, SearchState.fresh())

    def test_oracle_rollout_never_wastes_valid_checks(self, rng):
        # every valid edge the clairvoyant selector checks ends up on the
        # returned path
        for _ in range(40):
            g = random_connected_graph(rng, max_vertices=10)
            world = random_world(rng, g)
            res = run_lazysp(g, world, ApproxOracleSelector())
            assert res.feasible
            path_edges = set(res.path.edges)
            for e, outcome, _ in res.evaluated:
                if outcome == 1:
                    assert e in path_edges


class TestClairvoyantDP:
    def test_all_valid_cost_is_path_length_in_edges(self):
        g = diamond_graph()
        assert clairvoyant_value(g, SearchState.fresh(), World((1, 1, 1, 1))) == -2.0

    def test_single_invalidation_then_detour(self):
        g = diamond_graph()
        # one check eliminates the short route, two verify the detour
        assert clairvoyant_value(g, SearchState.fresh(), World((1, 0, 1, 1))) == -3.0

    def test_value_equals_cover_plus_final_path(self, rng):
        for _ in range(30):
            g = random_connected_graph(rng, max_vertices=8)
            world = random_world(rng, g)
            cover = exact_cover_value(g, SearchState.fresh(), world)
            final = len(
                __import__("lazysp.graph", fromlist=["shortest_path"]).shortest_path(
                    g, world.invalid_edges()
                ).edges
            )
            assert clairvoyant_value(g, SearchState.fresh(), world) == -(cover + final)

    def test_q_value_never_exceeds_value(self, rng):
        from lazysp.selectors import unevaluated_path_edges

        for _ in range(30):
            g = random_connected_graph(rng, max_vertices=8)
            world = random_world(rng, g)
            state = SearchState.fresh()
            path = current_path(g, state)
            v = clairvoyant_value(g, state, world)
            qs = [
                clairvoyant_q_value(g, state, e, world)
                for e in unevaluated_path_edges(path, state)
            ]
            assert max(qs) == pytest.approx(v)
            assert all(q <= v + 1e-12 for q in qs)

    def test_oracle_rollout_within_one_of_optimal(self, rng):
        # greedy length-gain choice tracks the exact DP closely on small graphs
        gap_total = 0
        for _ in range(40):
            g = random_connected_graph(rng, max_vertices=8)
            world = random_world(rng, g)
            res = run_lazysp(g, world, ApproxOracleSelector())
            opt = clairvoyant_value(g, SearchState.fresh(), world)
            assert res.reward <= opt + 1e-12 or res.reward == pytest.approx(opt)
            gap_total += opt - res.reward
        assert gap_total <= 8
