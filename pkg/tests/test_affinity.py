import numpy as np
import pytest
import scipy.sparse as sp
from numpy.testing import assert_allclose

from embedopt.affinity import (
    AffinityGraph,
    calibrate_perplexity,
    graph_laplacian,
    knn_sparsify,
    pairwise_sqdist,
    sne_affinities,
    symmetrize_affinities,
)
from embedopt.errors import CalibrationFailed

from oracles import (
    brute_force_knn_union,
    entropy_bits,
    grid_search_sigma2,
    laplacian_quadratic_form,
    naive_sqdist,
    random_nonneg_weights,
)


class TestPairwiseSqdist:
    def test_one_dimensional_pair(self):
        D = pairwise_sqdist(np.array([[0.0, 3.0]]))
        assert_allclose(D, [[0.0, 9.0], [9.0, 0.0]])

    def test_identical_points(self):
        Y = np.ones((4, 3))
        assert_allclose(pairwise_sqdist(Y), np.zeros((3, 3)))

    def test_matches_double_loop(self):
        rng = np.random.default_rng(0)
        Y = rng.standard_normal((5, 20))
        D = pairwise_sqdist(Y)
        ref = naive_sqdist(Y)
        assert np.abs(D - ref).max() <= 1e-12 * ref.max()
        assert np.all(D >= 0)
        assert_allclose(np.diag(D), 0.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            pairwise_sqdist(np.array([[np.nan, 0.0]]))


class TestCalibratePerplexity:
    def test_two_equal_distances_forces_uniform(self):
        row = np.array([0.0, 4.0, 4.0])
        _, p = calibrate_perplexity(row, 2.0, self_index=0)
        assert_allclose(p, [0.0, 0.5, 0.5], atol=1e-12)

    def test_equidistant_five_points(self):
        # uniform is the only attainable distribution: perplexity N-1
        row = np.array([7.0, 7.0, 0.0, 7.0, 7.0])
        _, p = calibrate_perplexity(row, 4.0, self_index=2)
        assert_allclose(p, [0.25, 0.25, 0.0, 0.25, 0.25], atol=1e-12)

    def test_matches_grid_search(self):
        row = np.array([0.0, 1.0, 4.0, 9.0])
        s2, p = calibrate_perplexity(row, 2.5, self_index=0)
        ref = grid_search_sigma2(np.array([1.0, 4.0, 9.0]), 2.5)
        assert abs(s2 - ref) <= 1e-3 * ref  # 3 significant digits
        assert abs(2.0 ** entropy_bits(p[1:]) - 2.5) <= 1e-4 * 2.5
        assert p[0] == 0.0
        assert_allclose(p.sum(), 1.0, rtol=1e-12)

    def test_monotone_in_perplexity(self):
        rng = np.random.default_rng(1)
        row = np.concatenate([[0.0], rng.uniform(0.5, 5.0, size=9)])
        sigmas = [
            calibrate_perplexity(row, k, self_index=0)[0] for k in (2.0, 4.0, 8.0)
        ]
        assert sigmas[0] < sigmas[1] < sigmas[2]

    def test_all_zero_row_is_uniform(self):
        _, p = calibrate_perplexity(np.zeros(5), 3.0, self_index=0)
        assert_allclose(p, [0.0, 0.25, 0.25, 0.25, 0.25])

    def test_infeasible_target_fails(self):
        row = np.array([0.0, 1.0, 2.0, 4.0, 8.0])
        with pytest.raises(CalibrationFailed):
            calibrate_perplexity(row, 4.5, self_index=0)  # above N-1

    def test_rejects_tiny_perplexity(self):
        with pytest.raises(ValueError):
            calibrate_perplexity(np.array([0.0, 1.0, 2.0]), 1.0, self_index=0)


class TestSymmetrize:
    def test_two_points(self):
        C = np.array([[0.0, 1.0], [1.0, 0.0]])
        g = symmetrize_affinities(C)
        assert g.normalized
        assert_allclose(g.weights, [[0.0, 0.5], [0.5, 0.0]])
        assert_allclose(g.weights.sum(), 1.0)

    def test_symmetric_conditionals_identity(self):
        rng = np.random.default_rng(2)
        C = random_nonneg_weights(rng, 6)
        C = C / C.sum(axis=1, keepdims=True)
        C = 0.5 * (C + C.T)  # symmetric row-stochastic-ish input
        g = symmetrize_affinities(C)
        assert_allclose(g.weights, C / 6.0, rtol=1e-14)

    def test_random_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        C = rng.uniform(size=(10, 10))
        np.fill_diagonal(C, 0.0)
        C /= C.sum(axis=1, keepdims=True)
        g = symmetrize_affinities(C)
        assert abs(g.weights.sum() - 1.0) <= 1e-12
        assert np.array_equal(g.weights, g.weights.T)
        assert np.all(np.diag(g.weights) == 0)

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            symmetrize_affinities(np.eye(3))


class TestSneAffinities:
    def test_pipeline_invariants(self):
        rng = np.random.default_rng(4)
        Y = rng.standard_normal((4, 30))
        g = sne_affinities(Y, perplexity=8.0)
        assert g.normalized
        W = g.weights
        assert abs(W.sum() - 1.0) <= 1e-10
        assert np.array_equal(W, W.T)
        assert np.all(W >= 0)
        assert np.all(np.diag(W) == 0)


class TestKnnSparsify:
    def test_kappa_n_is_identity(self):
        rng = np.random.default_rng(5)
        g = AffinityGraph(random_nonneg_weights(rng, 8))
        assert knn_sparsify(g, 8) is g

    def test_kappa_zero_yields_zero_laplacian(self):
        rng = np.random.default_rng(6)
        g = AffinityGraph(random_nonneg_weights(rng, 8))
        empty = knn_sparsify(g, 0)
        L = graph_laplacian(empty).matrix
        assert_allclose(np.asarray(L), 0.0)

    def test_against_brute_force(self):
        rng = np.random.default_rng(7)
        W = random_nonneg_weights(rng, 20)
        g = AffinityGraph(W)
        out = knn_sparsify(g, 7)
        Wout = out.dense_weights()
        keep = brute_force_knn_union(W, 7)
        assert_allclose(Wout, np.where(keep, W, 0.0))
        nnz_per_row = (Wout > 0).sum(axis=1)
        assert nnz_per_row.min() >= 7
        assert nnz_per_row.max() <= 19
        assert not out.normalized

    def test_weights_are_subset(self):
        rng = np.random.default_rng(8)
        W = random_nonneg_weights(rng, 15)
        out = knn_sparsify(AffinityGraph(W), 3).dense_weights()
        mask = out != 0
        assert np.array_equal(out[mask], W[mask])

    def test_tie_break_is_deterministic(self):
        # node 0 ties between 1, 2, 3; nodes 1-4 prefer each other, so the
        # union cannot reintroduce 0's dropped ties
        W = np.zeros((5, 5))
        W[1:, 1:] = 5.0
        np.fill_diagonal(W, 0.0)
        W[0, 1:4] = W[1:4, 0] = 1.0
        out = knn_sparsify(AffinityGraph(W), 2).dense_weights()
        # row 0 keeps the lowest-index neighbors among the ties
        assert out[0, 1] == 1.0 and out[0, 2] == 1.0 and out[0, 3] == 0.0


class TestGraphLaplacian:
    def test_two_node_graph(self):
        L = graph_laplacian(np.array([[0.0, 2.0], [2.0, 0.0]]))
        assert_allclose(L.matrix, [[2.0, -2.0], [-2.0, 2.0]])
        assert_allclose(L.degrees, [2.0, 2.0])

    def test_path_graph(self):
        W = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        L = graph_laplacian(W).matrix
        assert_allclose(L, [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])

    def test_psd_and_quadratic_form(self):
        rng = np.random.default_rng(9)
        W = random_nonneg_weights(rng, 30)
        L = graph_laplacian(AffinityGraph(W))
        eigs = np.linalg.eigvalsh(L.matrix)
        assert eigs.min() >= -1e-10 * L.degrees.max()
        for _ in range(20):
            u = rng.standard_normal(30)
            qf = u @ L.matrix @ u
            ref = laplacian_quadratic_form(W, u)
            assert abs(qf - ref) <= 1e-10 * max(abs(ref), 1.0)

    def test_signed_weights_rows_sum_to_zero(self):
        rng = np.random.default_rng(10)
        W = rng.standard_normal((6, 6))
        W = 0.5 * (W + W.T)
        np.fill_diagonal(W, 0.0)
        L = graph_laplacian(W).matrix
        assert np.abs(L.sum(axis=1)).max() <= 1e-12 * max(np.abs(W).max(), 1.0)

    def test_sparse_input_stays_sparse(self):
        W = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        L = graph_laplacian(W)
        assert sp.issparse(L.matrix)
        assert_allclose(L.matrix.toarray(), [[1.0, -1.0], [-1.0, 1.0]])


class TestAffinityGraphValidation:
    def test_rejects_asymmetric(self):
        W = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ValueError):
            AffinityGraph(W)

    def test_rejects_negative(self):
        W = np.array([[0.0, -1.0], [-1.0, 0.0]])
        with pytest.raises(ValueError):
            AffinityGraph(W)

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            AffinityGraph(np.eye(2))

    def test_rejects_bad_normalization(self):
        W = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            AffinityGraph(W, normalized=True)
