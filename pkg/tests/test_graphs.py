import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsesync.graphs import (
    Graph,
    GraphError,
    diameter,
    find_branches,
    is_terminal_branch,
    make_complete,
    make_cycle,
    make_path,
    make_random_connected,
    make_star,
    make_torus_moore,
    make_tree_random,
    prufer_decode,
    square_graph,
    uniform_spanning_tree,
)


def spanning_trees(g):
    """Exhaustive oracle: every (n-1)-edge subset that connects all nodes."""
    out = []
    for sub in itertools.combinations(g.edges, g.n - 1):
        h = Graph(g.n, sub)
        if h.is_connected:
            out.append(frozenset(sub))
    return out


def test_small_families():
    s = make_star(4)
    assert (s.diameter, s.max_degree, s.n) == (2, 4, 5)
    p = make_path(5)
    assert (p.diameter, p.max_degree) == (4, 2)
    assert make_complete(3).diameter == 1
    assert diameter(make_path(5)) == 4


def test_torus_moore_counts():
    g = make_torus_moore(3, 3)
    assert g.n == 9 and all(g.degree(v) == 8 for v in range(9))
    # direct enumeration of the 8 Moore offsets on a 4x3 torus
    w, h = 4, 3
    edges = set()
    for x, y in itertools.product(range(w), range(h)):
        for dx, dy in itertools.product((-1, 0, 1), repeat=2):
            if (dx, dy) != (0, 0):
                u, v = y * w + x, ((y + dy) % h) * w + (x + dx) % w
                edges.add((min(u, v), max(u, v)))
    assert make_torus_moore(4, 3).edge_count == len(edges) == 48


def test_simple_graph_validation():
    with pytest.raises(GraphError):
        Graph(3, [(0, 0)])
    with pytest.raises(GraphError):
        Graph(3, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Graph(2, [(0, 2)])


def test_ust_of_tree_is_the_tree():
    t = make_tree_random(20, seed=3)
    assert uniform_spanning_tree(t, seed=1) == t


def test_ust_triangle_is_uniform():
    g = make_complete(3)
    trees = spanning_trees(g)
    assert len(trees) == 3
    rng = np.random.default_rng(7)
    counts = Counter(frozenset(uniform_spanning_tree(g, seed=rng).edges) for _ in range(10_000))
    assert set(counts) == set(trees)
    for c in counts.values():
        assert abs(c / 10_000 - 1 / 3) <= 0.02


def test_ust_torus():
    t = uniform_spanning_tree(make_torus_moore(5, 5), seed=0)
    assert t.edge_count == 24 and t.is_tree


def test_branches_examples():
    # star(4) with the edge to leaf 4 subdivided by node 5
    g = Graph(6, [(0, 1), (0, 2), (0, 3), (0, 5), (5, 4)])
    br = find_branches(g)
    assert sum(1 for b in br if b.k == 3) == 1
    assert len([b for b in find_branches(make_path(4)) if b.k == 1]) == 2
    assert find_branches(make_complete(4)) == []


def test_square_graph_examples():
    assert square_graph(make_path(3)) == make_complete(3)
    assert square_graph(make_star(5)) == make_complete(6)


def test_prufer_decode_known():
    # sequence (3, 3) on 4 nodes is the star centered at 3
    assert sorted(prufer_decode([3, 3])) == [(0, 3), (1, 3), (2, 3)]


def test_tree_degree_cap_and_determinism():
    a = make_tree_random(40, max_degree=3, seed=11)
    b = make_tree_random(40, max_degree=3, seed=11)
    assert a == b and a.is_tree and a.max_degree <= 3


@given(st.integers(2, 40), st.integers(2, 6), st.integers(0, 2**32))
def test_random_connected_is_simple_and_connected(n, cap, seed):
    g = make_random_connected(n, max_degree=cap, seed=seed)
    g.validate()
    assert g.is_connected and g.max_degree <= max(cap, 2)


@given(st.integers(1, 30), st.integers(0, 2**32))
def test_ust_is_spanning_tree(n, seed):
    g = make_random_connected(n, seed=seed)
    t = uniform_spanning_tree(g, seed=seed)
    assert t.is_tree and t.n == g.n
    assert set(t.edges) <= set(g.edges)


@given(st.integers(3, 40), st.integers(0, 2**32))
def test_tree_branches_include_a_terminal_one(n, seed):
    t = make_tree_random(n, seed=seed)
    br = find_branches(t)
    assert br
    for b in br:
        b.validate(t)
    assert any(is_terminal_branch(t, b, br) for b in br)


def test_cycle():
    c = make_cycle(5)
    assert c.edge_count == 5 and c.diameter == 2
