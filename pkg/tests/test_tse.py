import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gomkcn.errors import ConfigError
from gomkcn.graph import Graph
from gomkcn.tse import encode, reconstruct_adjacency

from conftest import random_weighted_graph


def recursive_level(g, v, i):
    """Leaf-to-root aggregation, one node at a time (the slow definition)."""
    if i == 0:
        return g.features[v].copy()
    total = np.zeros(g.d)
    for u in np.nonzero(g.adjacency[v])[0]:
        total += g.adjacency[u, v] * recursive_level(g, int(u), i - 1)
    return total


class TestEncode:
    def test_level_zero_is_features(self, rng):
        g = random_weighted_graph(5, 3, rng)
        emb = encode(g, t=0)
        assert emb.levels.shape == (1, 5, 3)
        assert np.array_equal(emb.levels[0], g.features)

    def test_two_node_alternation(self):
        g = Graph(np.array([[0.0, 1.0], [1.0, 0.0]]),
                  np.array([[1.0, 0.0], [0.0, 1.0]]))
        emb = encode(g, t=2)
        node0 = emb.node(0).levels
        assert np.array_equal(node0, [[1, 0], [0, 1], [1, 0]])

    def test_matches_recursive_definition(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 8))
            g = random_weighted_graph(n, 2, rng)
            t = int(rng.integers(0, 4))
            emb = encode(g, t)
            for v in range(n):
                for i in range(t + 1):
                    expected = recursive_level(g, v, i)
                    assert np.allclose(emb.levels[i, v], expected, atol=1e-10)

    def test_negative_levels_rejected(self, rng):
        with pytest.raises(ConfigError):
            encode(random_weighted_graph(3, 1, rng), t=-1)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        g = random_weighted_graph(n, 2, rng)
        perm = rng.permutation(n)
        g_perm = Graph(g.adjacency[np.ix_(perm, perm)], g.features[perm])
        a = encode(g, 3).levels[:, perm, :]
        b = encode(g_perm, 3).levels
        assert np.allclose(a, b, atol=1e-12)

    def test_linearity_in_features(self, rng):
        g = random_weighted_graph(6, 3, rng)
        scaled = Graph(g.adjacency, 2.5 * g.features)
        assert np.allclose(encode(scaled, 3).levels, 2.5 * encode(g, 3).levels)

    def test_per_node_views(self, rng):
        g = random_weighted_graph(4, 2, rng)
        emb = encode(g, 2)
        nodes = emb.per_node
        assert len(nodes) == 4
        assert nodes[1].t == 2 and nodes[1].d == 2
        assert np.array_equal(nodes[1].levels, emb.levels[:, 1, :])


class TestReconstruction:
    def test_recovers_random_full_rank(self, rng):
        for _ in range(10):
            g = random_weighted_graph(6, 3, rng)
            rec = reconstruct_adjacency(encode(g, 6))
            assert rec.full_rank
            assert np.abs(rec.adjacency - g.adjacency).max() < 1e-6

    def test_reports_rank_deficiency(self):
        # identical feature rows on a regular structure cannot separate nodes
        g = Graph(np.ones((4, 4)) - np.eye(4), np.ones((4, 2)))
        rec = reconstruct_adjacency(encode(g, 4))
        assert not rec.full_rank
        assert rec.adjacency is None
        assert not rec

    def test_single_node(self):
        g = Graph(np.zeros((1, 1)), np.array([[0.7, 0.1]]))
        rec = reconstruct_adjacency(encode(g, 1))
        assert rec.full_rank
        assert np.array_equal(rec.adjacency, [[0.0]])

    def test_level_zero_only_is_underdetermined(self, rng):
        g = random_weighted_graph(3, 2, rng)
        rec = reconstruct_adjacency(encode(g, 0))
        assert not rec.full_rank
