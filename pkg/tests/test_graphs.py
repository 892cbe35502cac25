import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitprobe.errors import FormulaRegime, NoMatching
from bitprobe.graphs import (
    INFINITE,
    BipartiteGraph,
    check_expansion,
    girth,
    grow_high_girth,
    hall_b_matching,
    has_cycle_at_most,
    high_girth_size,
    sample_high_girth,
    shortest_cycle_through,
)
from bitprobe.threeprobe import build_three_probe_scheme

from oracles import brute_force_b_matching, brute_force_expansion, nx_girth


@st.composite
def small_graphs(draw, max_side=8):
    left = draw(st.integers(1, max_side))
    right = draw(st.integers(1, max_side))
    rows = [draw(st.sets(st.integers(0, right - 1), max_size=right)) for _ in range(left)]
    return BipartiteGraph(left, right, tuple(tuple(r) for r in rows))


def even_left_degrees(g):
    return all(len(row) % 2 == 0 for row in g.adjacency)


class TestGirth:
    def test_k22(self):
        assert girth(BipartiteGraph(2, 2, ((0, 1), (0, 1)))) == 4

    def test_tree_is_infinite(self):
        g = BipartiteGraph(3, 4, ((0, 1), (1, 2), (2, 3)))
        assert girth(g) == INFINITE

    def test_six_cycle(self):
        g = BipartiteGraph(3, 3, ((0, 1), (1, 2), (0, 2)))
        assert girth(g) == 6
        assert has_cycle_at_most(g, 6) and not has_cycle_at_most(g, 5)

    @settings(max_examples=200, deadline=None)
    @given(small_graphs(max_side=10))
    def test_matches_networkx(self, g):
        assert girth(g) == nx_girth(g.left_size, g.adjacency)

    def test_dump_round_trip(self):
        g = BipartiteGraph(3, 5, ((0, 4), (), (1, 2, 3)))
        text = g.dumps()
        assert text.splitlines()[1] == "L0: 0 4"
        assert BipartiteGraph.loads(text) == g

    @pytest.mark.parametrize("text", ["", "L0: 1\n", "bipartite left=2 right=2\nL0: 1\n",
                                      "bipartite left=1 right=2\nL0: 5\n"])
    def test_bad_dumps_rejected(self, text):
        with pytest.raises((ValueError, KeyError)):
            BipartiteGraph.loads(text)

    def test_repeated_neighbor_needs_multigraph_flag(self):
        with pytest.raises(ValueError):
            BipartiteGraph(1, 2, ((1, 1),))
        assert BipartiteGraph(1, 2, ((1, 1),), multigraph=True).num_edges == 2


class TestShortestCycleThrough:
    def test_loop_and_parallel_edges(self):
        adj = [[(0, "loop")], []]
        cyc = shortest_cycle_through(adj, 0)
        assert cyc.length == 1 and cyc.vertices == (0, 0)
        adj = [[(1, "a"), (1, "b")], [(0, "a"), (0, "b")]]
        cyc = shortest_cycle_through(adj, 0)
        assert cyc.length == 2 and set(cyc.edges) == {"a", "b"}

    def test_banned_edges_and_limit(self):
        # square 0-1-2-3 plus a triangle 0-4-5
        edges = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 4), (4, 5), (5, 0)]
        adj = [[] for _ in range(6)]
        for e, (a, b) in enumerate(edges):
            adj[a].append((b, e))
            adj[b].append((a, e))
        assert shortest_cycle_through(adj, 0).length == 3
        assert shortest_cycle_through(adj, 0, banned={4}).length == 4
        assert shortest_cycle_through(adj, 0, limit=3, banned={4}) is None
        cyc = shortest_cycle_through(adj, 0, banned={5})
        assert cyc.vertices[0] == cyc.vertices[-1] == 0
        for (a, b), e in zip(zip(cyc.vertices, cyc.vertices[1:]), cyc.edges):
            assert {a, b} == set(edges[e])


class TestHighGirth:
    def test_size_formula_at_two_to_the_twenty(self):
        s, _ = high_girth_size(2**20, 4)
        assert s == 262144

    @pytest.mark.parametrize("m,k", [(10**6, 4), (12345, 6), (777, 8), (2**30, 12)])
    def test_size_formula_matches_float(self, m, k):
        s, d = high_girth_size(m, k)
        approx = 4 * m ** (1 - 1 / (k + 1))
        assert s - 1 < approx + 1e-6 * approx and s >= approx - 1e-6 * approx
        assert d % 2 == 0 and d**k <= s and (d + 2) ** k > s

    def test_m500_k4_seed1(self):
        g = sample_high_girth(500, 4, 1)
        s, _ = high_girth_size(500, 4)
        assert g.left_size == g.right_size == s
        assert even_left_degrees(g)
        assert sum(len(r) for r in g.adjacency) == g.num_edges >= 1000
        assert nx_girth(g.left_size, g.adjacency) > 4
        assert girth(g) == nx_girth(g.left_size, g.adjacency)

    def test_deterministic(self):
        assert sample_high_girth(500, 4, 1) == sample_high_girth(500, 4, 1)

    def test_out_of_regime(self):
        with pytest.raises(FormulaRegime):
            sample_high_girth(20, 8, 0)
        with pytest.raises(ValueError):
            sample_high_girth(500, 5, 0)

    @pytest.mark.slow
    def test_k8_seed7(self):
        m = 60000  # smallest round m where the degree formula reaches 4
        g = sample_high_girth(m, 8, 7)
        assert even_left_degrees(g) and g.num_edges >= 2 * m
        assert girth(g) > 8

    @pytest.mark.parametrize("seed", range(3))
    def test_greedy_growth(self, seed):
        g = grow_high_girth(200, 8, 144, seed)
        assert g is not None
        assert even_left_degrees(g) and g.num_edges >= 400
        assert nx_girth(g.left_size, g.adjacency) > 8


class TestHall:
    def test_single_element_takes_its_neighborhood(self):
        assert hall_b_matching([[3, 1, 4, 5, 9]], 5) == [[1, 3, 4, 5, 9]]

    def test_two_elements_one_small_neighborhood(self):
        with pytest.raises(NoMatching):
            hall_b_matching([[0, 1, 2, 3, 4], [0, 1, 2, 3, 4]], 5)

    def test_zero_demand(self):
        assert hall_b_matching([[1], [1]], 0) == [[], []]

    def test_random_against_backtracking(self):
        rng = np.random.default_rng(11)
        outcomes = set()
        for _ in range(150):
            k = int(rng.integers(1, 13))
            b = int(rng.integers(1, 6))
            universe = int(rng.integers(b, 4 * b + 8))
            hoods = [rng.choice(universe, size=int(rng.integers(b, min(universe, b + 4) + 1)), replace=False).tolist()
                     for _ in range(k)]
            if k * b > universe:
                expected = False
            else:
                expected = brute_force_b_matching(hoods, b)
            try:
                got = hall_b_matching(hoods, b)
            except NoMatching:
                got = None
            assert (got is not None) == expected
            outcomes.add(expected)
            if got is not None:
                flat = [x for chosen in got for x in chosen]
                assert len(flat) == len(set(flat)) == k * b
                assert all(set(c) <= set(h) for c, h in zip(got, hoods))
        assert outcomes == {True, False}


class TestExpansion:
    def test_perfect_matching_expands(self):
        g = BipartiteGraph(5, 5, tuple((i,) for i in range(5)))
        assert check_expansion(g, r_max=5, c=1).ok

    def test_shared_single_neighbor(self):
        g = BipartiteGraph(2, 3, ((1,), (1,)))
        rep = check_expansion(g, r_max=2, c=1)
        assert not rep.ok and rep.witness == (0, 1) and rep.neighborhood_size == 1

    @settings(max_examples=120, deadline=None)
    @given(small_graphs(max_side=7), st.integers(1, 4), st.sampled_from([1, 1.5, 2, 3]))
    def test_exhaustive_is_exact(self, g, r_max, c):
        expected = brute_force_expansion(g.adjacency, r_max, c)
        rep = check_expansion(g, r_max=r_max, c=c)
        assert rep.ok == (expected is None)
        if not rep.ok:
            W = rep.witness
            hood = set().union(*(set(g.adjacency[v]) for v in W))
            assert 1 <= len(W) <= r_max and len(hood) < c * len(W)

    def test_sampled_is_flagged(self):
        g = BipartiteGraph(2, 3, ((1,), (1,)))
        rep = check_expansion(g, r_max=2, c=1, mode="sampled", trials=50)
        assert rep.probabilistic

    def test_three_probe_graph_agrees_with_matching(self):
        """An exact expansion verdict on the m=60 depth-3 graph matches
        whether five private cells per element can be found."""
        scheme = build_three_probe_scheme(60, 2, 5, s_override=24)
        g = scheme.graph.as_bipartite()
        rep = check_expansion(g, r_max=6, c=5)
        assert not rep.ok
        hoods = [g.adjacency[u] for u in rep.witness]
        with pytest.raises(NoMatching):
            hall_b_matching(hoods, 5)
        rng = np.random.default_rng(0)
        for _ in range(300):
            W = sorted(rng.choice(60, size=int(rng.integers(1, 7)), replace=False).tolist())
            sub = BipartiteGraph(len(W), g.right_size, tuple(g.adjacency[u] for u in W))
            ok = check_expansion(sub, r_max=len(W), c=5).ok
            try:
                hall_b_matching([g.adjacency[u] for u in W], 5)
                matched = True
            except NoMatching:
                matched = False
            assert ok == matched
