from fractions import Fraction as F

from hypothesis import given, strategies as st

from amenwalk.wgraph import (WeightedDigraph, epsilon_boundary, folner_search,
                             gerl_boundary, gerl_expansion_constant, isoperimetric_ratio,
                             lattice_graph, prune_graph)
from oracles import f2_ball_sizes


def _interval(G, m):
    return [G.vertex_id((i,)) for i in range(m)]


def test_epsilon_boundary_examples():
    G = lattice_graph(1)
    K = _interval(G, 10)
    assert {G.key(v) for v in epsilon_boundary(G, K, F(1, 10))} == {(0,), (9,)}
    assert epsilon_boundary(G, K, F(6, 10)) == set()
    C = WeightedDigraph.from_edges({0: [(1, 1)], 1: [(0, 1)]})
    assert epsilon_boundary(C, [0, 1], 0) == set()


def test_isoperimetric_ratio_line_and_tree():
    G = lattice_graph(1)
    for m in (2, 5, 40):
        assert isoperimetric_ratio(G, _interval(G, m), F(1, 4)) == F(2, m)
    from amenwalk.scenarios import free_group
    T = free_group().graph
    for r in range(1, 5):
        K = T.ball(r, undirected=True)
        sphere, ball = f2_ball_sizes(r)
        assert len(K) == ball
        assert isoperimetric_ratio(T, K, F(1, 5)) == F(sphere, ball)


def test_folner_search_examples():
    G = lattice_graph(1)
    r = folner_search(G, F(2, 5), F(1, 100))
    assert r.certificate and r.set_size == 201 and r.ratio == F(2, 201)
    assert isoperimetric_ratio(G, r.vertices, F(2, 5)) == r.ratio
    from amenwalk.scenarios import free_group
    r = folner_search(free_group().graph, F(1, 5), F(1, 2), budget=10**5)
    assert not r.certificate and r.ratio >= F(2, 3) - F(1, 100)
    S = WeightedDigraph.from_edges({"o": [("o", 1)]})
    r = folner_search(S, F(1, 10), F(1, 100))
    assert r.certificate and r.ratio == 0 and r.keys == ["o"]


def _path(n):
    edges = {}
    for i in range(n):
        nb = [j for j in (i - 1, i + 1) if 0 <= j < n]
        edges[i] = [(j, F(1, len(nb))) for j in nb]
    return WeightedDigraph.from_edges(edges)


def test_expansion_constant_examples():
    two = WeightedDigraph.from_edges({0: [(1, 1)], 1: [(0, 1)]})
    assert gerl_expansion_constant(two).value == 1
    K4 = WeightedDigraph.from_edges(
        {i: [(j, F(1, 3)) for j in range(4) if j != i] for i in range(4)})
    assert gerl_expansion_constant(K4).value == 1
    # over all 62 proper subsets the minimiser is {0..4} with boundary {4}
    res = gerl_expansion_constant(_path(6))
    assert res.exhaustive and res.value == F(1, 5)


graphs = st.integers(2, 9).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.lists(st.integers(0, 4), min_size=n, max_size=n), min_size=n, max_size=n),
    st.sets(st.integers(0, n - 1), min_size=1)))


def _random_graph(n, raw):
    edges = {}
    for i, row in enumerate(raw):
        tot = sum(row) or 1
        ws = row if sum(row) else [1 if j == i else 0 for j in range(n)]
        edges[i] = [(j, F(w, tot if sum(row) else 1)) for j, w in enumerate(ws) if w]
    G = WeightedDigraph.from_edges(edges)
    for i in range(n):
        G.vertex_id(i)
    return G


@given(graphs, st.fractions(0, 1), st.fractions(0, 1))
def test_boundary_monotone_in_eps(g, e1, e2):
    n, raw, K = g
    G = _random_graph(n, raw)
    lo, hi = sorted((e1, e2))
    small = epsilon_boundary(G, K, hi)
    assert small <= epsilon_boundary(G, K, lo)
    assert small <= set(K)


@given(graphs, st.fractions(0, 1))
def test_boundary_equals_pruned_gerl_boundary(g, eps):
    n, raw, K = g
    G = _random_graph(n, raw)
    adj = prune_graph(G, range(n), eps)
    assert gerl_boundary(adj, K) == epsilon_boundary(G, K, eps)
