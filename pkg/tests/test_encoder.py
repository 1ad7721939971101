import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pup.encoder import (
    apply_feature_dropout,
    encode,
    encode_per_node,
    init_embeddings,
    propagate_message,
)
from pup.graph import build_graph, build_normalized_adjacency

from conftest import make_dataset, random_dataset


def chain():
    # u0 - i0 - c0, i0 - p0 ; node order u, i, c, p0, p1
    ds = make_dataset(1, [0], [0], train=[(0, 0)], levels=2, n_categories=1)
    g = build_graph(ds)
    return g, build_normalized_adjacency(g)


class TestInit:
    def test_deterministic(self):
        assert np.array_equal(init_embeddings(10, 4, 3), init_embeddings(10, 4, 3))

    def test_seeds_differ(self):
        assert not np.array_equal(init_embeddings(10, 4, 3), init_embeddings(10, 4, 4))

    def test_branches_differ(self):
        assert not np.array_equal(init_embeddings(10, 4, 3, 0), init_embeddings(10, 4, 3, 1))

    def test_scale(self):
        vals = np.array([init_embeddings(1, 1, s)[0, 0] for s in range(10_000)])
        assert np.all(np.isfinite(vals)) and np.all(np.abs(vals) < 1)
        assert vals.std() == pytest.approx(0.1, rel=0.05)
        assert init_embeddings(1000, 64, 0).std() == pytest.approx(0.1 / 8, rel=0.05)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            init_embeddings(0, 4, 1)


class TestEncode:
    def test_zero(self):
        g, adj = chain()
        assert np.array_equal(encode(adj, np.zeros((g.node_count, 3))), np.zeros((g.node_count, 3)))

    def test_self_loops_only(self, rng):
        ds = make_dataset(3, [0, 1], [0, 1], levels=2)
        g = build_graph(ds, False, False)
        W = rng.normal(size=(g.node_count, 5))
        assert np.allclose(encode(build_normalized_adjacency(g), W), np.tanh(W), atol=0)

    def test_hand_chain(self):
        g, adj = chain()
        W = np.array([[0.1], [0.2], [0.4], [0.3], [0.0]])
        F = encode(adj, W)
        # user: (0.1 + 0.2) / 2 ; item: (0.1 + 0.2 + 0.4 + 0.3) / 4
        assert F[0, 0] == pytest.approx(np.tanh(0.15), abs=1e-15)
        assert F[1, 0] == pytest.approx(np.tanh(0.25), abs=1e-15)
        assert F[0, 0] == pytest.approx(0.1489, abs=1e-4)
        assert F[1, 0] == pytest.approx(0.2449, abs=1e-4)

    def test_shape_mismatch(self):
        g, adj = chain()
        with pytest.raises(ValueError):
            encode(adj, np.zeros((g.node_count + 1, 2)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matrix_equals_per_node(self, seed):
        rng = np.random.default_rng(seed)
        g = build_graph(random_dataset(rng))
        W = rng.normal(size=(g.node_count, int(rng.integers(1, 6))))
        F = encode(build_normalized_adjacency(g), W)
        assert np.max(np.abs(F - encode_per_node(g, W))) <= 1e-12
        assert np.all(np.abs(F) < 1)

    def test_permutation_equivariance(self, rng):
        g = build_graph(random_dataset(rng, 4, 5, 2, 3))
        adj = build_normalized_adjacency(g)
        W = rng.normal(size=(g.node_count, 3))
        perm = rng.permutation(g.node_count)
        A = adj.matrix.toarray()
        A_p = A[np.ix_(perm, perm)]
        F_p = np.tanh(A_p @ W[perm])
        assert np.allclose(F_p, encode(adj, W)[perm], atol=1e-14)


class TestMessage:
    def test_identity(self):
        assert np.array_equal(propagate_message(np.array([1.0, -2.0]), 1), [1.0, -2.0])

    def test_half(self):
        assert np.array_equal(propagate_message(np.array([1.0, -2.0]), 2), [0.5, -1.0])

    def test_quarter(self):
        assert np.allclose(propagate_message(np.array([0.4, -0.8]), 4), [0.1, -0.2], atol=1e-16)

    def test_zero_count(self):
        with pytest.raises(ValueError):
            propagate_message(np.ones(2), 0)


class TestDropout:
    def test_p_zero(self, rng):
        F = rng.normal(size=(10, 3))
        assert np.array_equal(apply_feature_dropout(F, 0.0, 1), F)

    def test_inference_passthrough(self, rng):
        F = rng.normal(size=(10, 3))
        assert np.array_equal(apply_feature_dropout(F, 0.7, 1, training=False), F)

    def test_p_one_rejected(self):
        with pytest.raises(ValueError):
            apply_feature_dropout(np.ones((2, 2)), 1.0, 0)

    def test_dropped_fraction(self):
        out = apply_feature_dropout(np.ones((10_000, 2)), 0.5, 7)
        dropped = np.mean(np.all(out == 0, axis=1))
        assert abs(dropped - 0.5) <= 0.02
        # whole rows: each row is either all zero or all scaled by 2
        assert set(np.unique(out).tolist()) <= {0.0, 2.0}

    def test_deterministic(self, rng):
        F = rng.normal(size=(50, 3))
        assert np.array_equal(apply_feature_dropout(F, 0.3, 5), apply_feature_dropout(F, 0.3, 5))

    def test_unbiased(self, rng):
        F = rng.normal(size=(4, 3))
        p = 0.4
        draws = np.stack([apply_feature_dropout(F, p, s) for s in range(4000)])
        mean = draws.mean(axis=0)
        se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
        assert np.all(np.abs(mean - F) <= 3 * se + 1e-12)
