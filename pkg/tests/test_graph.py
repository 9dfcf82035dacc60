import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcsynth.graph import (
    CapacityError,
    GraphError,
    LabeledGraph,
    carries_word,
    debruijn,
    is_complete,
    is_deterministic,
    is_path_complete,
    load_graph,
    save_graph,
)


def path_exists(g, word):
    """Depth-first search over explicit edge paths spelling ``word``."""
    edges_from = {}
    for a, b, i in g.edges:
        edges_from.setdefault(a, []).append((b, i))

    def walk(node, k):
        if k == len(word):
            return True
        return any(walk(b, k + 1) for b, i in edges_from.get(node, ()) if i == word[k])

    return any(walk(s, 0) for s in range(g.node_count))


def brute_force_path_complete(g, max_len):
    """Enumerate words in order of length, extending only carried words."""
    layer = [()]
    for _ in range(max_len):
        nxt = []
        for w in layer:
            for i in g.labels:
                word = w + (i,)
                if not path_exists(g, word):
                    return False
                nxt.append(word)
        layer = nxt
    return True


def random_graph(rng, n, M, density):
    edges = [(a, b, i) for a in range(n) for b in range(n) for i in range(1, M + 1) if rng.random() < density]
    return LabeledGraph(M, tuple(str(s) for s in range(n)), tuple(edges))


class TestDeBruijn:
    def test_order_one(self):
        g = debruijn(2, 1)
        assert g.node_names == ("1", "2")
        assert sorted(g.edges) == [(0, 0, 1), (0, 1, 2), (1, 0, 1), (1, 1, 2)]

    def test_order_zero(self):
        g = debruijn(2, 0)
        assert g.node_count == 1
        assert sorted(g.edges) == [(0, 0, 1), (0, 0, 2)]
        assert g.node_names == ("()",)

    def test_order_two_shift_rule(self):
        g = debruijn(2, 2)
        assert g.node_count == 4 and len(g.edges) == 8
        assert g.successors(g.index("12"), 2) == (g.index("21"),)
        assert g.successors(g.index("12"), 1) == (g.index("11"),)

    def test_lexicographic_nodes(self):
        assert debruijn(3, 2).node_names == ("11", "12", "13", "21", "22", "23", "31", "32", "33")

    def test_large_alphabet_names(self):
        g = debruijn(10, 1)
        assert g.node_names[9] == "10"
        assert debruijn(11, 2).node_names[1] == "1,2"

    @pytest.mark.parametrize("M", range(1, 5))
    @pytest.mark.parametrize("l", range(0, 7))
    def test_complete_and_deterministic(self, M, l):
        g = debruijn(M, l)
        assert g.node_count == M**l
        assert len(g.edges) == M ** (l + 1)
        assert is_complete(g) and is_deterministic(g)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            debruijn(2, 80)

    def test_bad_arguments(self):
        with pytest.raises(GraphError):
            debruijn(0, 1)
        with pytest.raises(GraphError):
            debruijn(2, -1)

    def test_window_semantics(self):
        # after reading a word of length >= l, the node is its last l letters, newest first
        g = debruijn(3, 3)
        rng = np.random.default_rng(0)
        for _ in range(20):
            word = rng.integers(1, 4, size=7)
            node = 0
            for i in word:
                (node,) = g.successors(node, int(i))
            assert g.node_names[node] == "".join(str(v) for v in word[::-1][:3])


class TestPredicates:
    def test_missing_label_incomplete(self):
        g = LabeledGraph(2, ("0",), ((0, 0, 1),))
        assert not is_complete(g)

    def test_deleting_any_edge_breaks_completeness(self):
        g = debruijn(3, 1)
        for e in g.edges:
            assert not is_complete(g.without_edge(e))

    def test_nondeterministic(self):
        g = LabeledGraph(1, ("0", "1"), ((0, 0, 1), (0, 1, 1)))
        assert not is_deterministic(g)

    def test_edgeless_is_deterministic(self):
        assert is_deterministic(LabeledGraph(2, ("0",), ()))

    def test_path_complete_debruijn(self):
        assert is_path_complete(debruijn(2, 3))

    def test_not_path_complete(self):
        g = LabeledGraph(2, ("0", "1"), ((0, 0, 1), (1, 1, 2)))
        assert not is_path_complete(g)
        assert not path_exists(g, (1, 2))
        assert not carries_word(g, (1, 2))

    def test_path_complete_but_not_complete(self):
        # node 0 lacks label 2 but node 1 carries everything
        g = LabeledGraph(2, ("0", "1"), ((0, 1, 1), (1, 1, 1), (1, 1, 2)))
        assert not is_complete(g)
        assert is_path_complete(g)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_complete_implies_path_complete(self, n, M, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n, M, 0.4)
        extra = [(a, int(rng.integers(n)), i) for a in range(n) for i in range(1, M + 1) if not g.successors(a, i)]
        g = LabeledGraph(M, g.node_names, g.edges + tuple(extra))
        assert is_complete(g)
        assert is_path_complete(g)

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 3), st.sampled_from([0.2, 0.35, 0.5]), st.integers(0, 2**32 - 1))
    def test_powerset_matches_enumeration(self, n, M, density, seed):
        g = random_graph(np.random.default_rng(seed), n, M, density)
        assert is_path_complete(g) == brute_force_path_complete(g, 2 * n + 2)

    def test_frontier_helper_matches_path_search(self, rng):
        for _ in range(30):
            g = random_graph(rng, 3, 2, 0.4)
            for L in range(5):
                for w in itertools.product((1, 2), repeat=L):
                    assert carries_word(g, w) == path_exists(g, w)


class TestSerialization:
    def test_round_trip(self):
        g = debruijn(3, 2)
        assert load_graph(save_graph(g)) == g

    def test_duplicate_edges_rejected(self):
        doc = {"M": 2, "nodes": ["a"], "edges": [[0, 0, 1], [0, 0, 1]]}
        with pytest.raises(GraphError, match="duplicate"):
            load_graph(json.dumps(doc))

    @pytest.mark.parametrize(
        "doc",
        [
            {"M": 2, "nodes": ["a"], "edges": [[0, 1, 1]]},
            {"M": 2, "nodes": ["a"], "edges": [[0, 0, 3]]},
            {"M": 2, "nodes": ["a", "a"], "edges": []},
            {"M": 0, "nodes": ["a"], "edges": []},
            {"M": 2, "nodes": [], "edges": []},
            {"nodes": ["a"], "edges": []},
            {"M": 2, "nodes": ["a"], "edges": [[0, 0]]},
        ],
    )
    def test_malformed(self, doc):
        with pytest.raises(GraphError):
            load_graph(json.dumps(doc))

    def test_invalid_json(self):
        with pytest.raises(GraphError):
            load_graph("{")
