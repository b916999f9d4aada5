import math

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from latsimplex.cli import cluster_vertices, equal_sizes
from latsimplex.diag import (
    assumption_report,
    check_proximity,
    dist_to_simplex,
    hausdorff_estimate,
    lloyd_kmeans,
    match_vertices,
    measure_alpha,
    measure_sigma,
)
from latsimplex.gen import Instance, gen_adversarial_clustering, gen_lda
from latsimplex.linalg import SparseMatrix


def nnls_simplex_distance(x, M, weight=1e4):
    # the sum-to-one row is enforced as a heavily weighted penalty
    k = M.shape[1]
    Aug = np.vstack([M, weight * np.ones((1, k))])
    w, _ = scipy.optimize.nnls(Aug, np.concatenate([x, [weight]]))
    return np.linalg.norm(x - M @ w)


def copies_instance(M, reps):
    P = np.repeat(M, reps, axis=1)
    k = M.shape[1]
    W = np.repeat(np.eye(k), reps, axis=1)
    return Instance(A=SparseMatrix(P), P=P, M=M, W=W, model="custom")


class TestMeasureAlpha:
    def test_orthonormal(self, rng):
        assert measure_alpha(np.linalg.qr(rng.standard_normal((6, 3)))[0]) == pytest.approx(1.0, abs=1e-12)

    def test_duplicated(self):
        assert measure_alpha([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]) == 0.0

    def test_rank_deficient(self, rng):
        M = rng.standard_normal((5, 2))
        assert measure_alpha(np.column_stack([M, M @ [0.3, -2.0]])) == 0.0

    def test_hand_example(self):
        assert measure_alpha([[1.0, 1.0], [0.0, 1.0]]) == pytest.approx(0.5, abs=1e-14)

    def test_zero_column(self):
        with pytest.raises(ValueError):
            measure_alpha([[1.0, 0.0], [0.0, 0.0]])


class TestMeasureSigma:
    def test_equal(self, rng):
        P = rng.random((4, 6))
        assert measure_sigma(SparseMatrix(P), P) == 0.0

    def test_diag_padded(self):
        P = np.zeros((3, 4))
        A = np.zeros((3, 4))
        A[0, 0] = A[1, 1] = A[2, 2] = 3.0
        assert measure_sigma(SparseMatrix(A), P) == pytest.approx(1.5, abs=1e-12)

    def test_lda_dense_oracle(self):
        inst = gen_lda(120, 200, 3, 30, 1 / 3, seed=8)
        ref = np.linalg.norm(inst.A.toarray() - inst.P, 2) / math.sqrt(200)
        sigma, change = measure_sigma(inst.A, inst.P, return_change=True)
        assert abs(sigma - ref) <= 1e-6 * ref
        assert change < 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            measure_sigma(SparseMatrix(np.eye(3)), np.zeros((3, 2)))


class TestProximity:
    def test_copies_pass(self):
        M = np.eye(3)
        prox = check_proximity(np.repeat(M, 4, axis=1), M, 0.0, 1 / 3)
        assert prox.passed and prox.counts == [4, 4, 4] and prox.delta_realized == pytest.approx(1 / 3)

    def test_radius_zero_misses(self):
        M = np.eye(2)
        P = np.full((2, 6), 0.5)
        prox = check_proximity(P, M, 0.0, 0.5)
        assert not prox.passed and prox.counts == [0, 0] and prox.delta_realized == 0.0

    def test_generated_instance(self):
        M = cluster_vertices(10, 3, 0)
        inst = gen_adversarial_clustering(10, 600, 3, M, equal_sizes(600, 3), 0.1, 0.2, 0.5, seed=0)
        assert check_proximity(inst.P, M, inst.plan.sigma, 0.2).passed

    def test_halving_grid(self):
        M = np.eye(2)
        # 2 of 20 columns sit on each vertex, so delta = 0.4 fails and 0.1 passes
        P = np.full((2, 20), 0.5)
        P[:, :2] = M[:, [0]]
        P[:, 2:4] = M[:, [1]]
        assert check_proximity(P, M, 0.0, 0.4).delta_realized == pytest.approx(0.1)


class TestDistToSimplex:
    def test_vertex(self):
        M = np.array([[1.0, 0.0], [0.0, 1.0]])
        d, w = dist_to_simplex(M[:, 0], M)
        assert d == 0.0 and w.tolist() == [1.0, 0.0]

    def test_segment_midpoint(self):
        d, w = dist_to_simplex([1.0, 1.0], np.eye(2))
        assert d == pytest.approx(math.sqrt(2) / 2, abs=1e-12)
        np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-12)

    def test_one_dimensional(self):
        d, w = dist_to_simplex([2.0], [[0.0, 1.0]])
        assert d == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(w, [0.0, 1.0], atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31))
    def test_inside_hull_is_zero(self, k, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((8, k))
        w0 = rng.dirichlet(np.ones(k))
        d, w = dist_to_simplex(M @ w0, M)
        assert d <= 1e-9
        assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**31))
    def test_matches_nnls_and_permutation_invariant(self, k, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((5, k))
        x = 2 * rng.standard_normal(5)
        d, w = dist_to_simplex(x, M)
        assert np.all(w >= 0) and abs(w.sum() - 1) <= 1e-12
        assert d == pytest.approx(np.linalg.norm(x - M @ w), abs=1e-12)
        assert d <= nnls_simplex_distance(x, M) + 1e-6
        perm = rng.permutation(k)
        assert dist_to_simplex(x, M[:, perm])[0] == pytest.approx(d, abs=1e-9)


class TestHausdorff:
    def test_vertex_copies(self):
        M = np.eye(3)
        A = SparseMatrix(np.repeat(M, 5, axis=1))
        to_k, from_k = hausdorff_estimate(A, M, 1 / 3)
        assert to_k == 0.0 and from_k <= 1e-12

    def test_interior_data(self, rng):
        M = np.eye(3)
        A = SparseMatrix(M @ rng.dirichlet(np.ones(3), size=60).T)
        assert hausdorff_estimate(A, M, 0.1)[1] <= 1e-9

    def test_generated_within_bound(self):
        M = cluster_vertices(20, 3, 5)
        inst = gen_adversarial_clustering(20, 900, 3, M, equal_sizes(900, 3), 0.2, 0.2, 0.5, seed=5)
        noise = inst.plan.sigma / math.sqrt(0.2)
        to_k, from_k = hausdorff_estimate(inst.A, M, 0.2, seed=5)
        assert to_k <= 5 * noise and from_k <= 5 * noise


class TestMatchVertices:
    def test_identity(self, rng):
        M = rng.standard_normal((4, 3))
        m = match_vertices(M, M)
        assert m.max_err == 0.0 and m.permutation == [0, 1, 2] and not m.heuristic

    def test_swap(self, rng):
        M = rng.standard_normal((4, 3))
        m = match_vertices(M[:, [1, 0, 2]], M)
        assert m.max_err == 0.0 and m.permutation == [1, 0, 2]

    def test_shifts(self, rng):
        M = 10 * rng.standard_normal((4, 3))
        shifts = np.zeros((4, 3))
        shifts[0] = [0.1, 0.2, 0.3]
        m = match_vertices(M + shifts, M)
        assert m.max_err == pytest.approx(0.3, abs=1e-12)
        np.testing.assert_allclose(m.errs, [0.1, 0.2, 0.3], atol=1e-12)

    def test_greedy_beyond_eight(self, rng):
        M = 10 * np.eye(10)
        perm = rng.permutation(10)
        m = match_vertices(M[:, perm] + 0.01, M)
        assert m.heuristic
        assert m.max_err == pytest.approx(0.01 * math.sqrt(10), abs=1e-12)
        assert sorted(m.permutation) == list(range(10))


class TestLloyd:
    def test_separated_clusters(self, rng):
        X = np.concatenate([rng.normal(-5, 0.1, 50), rng.normal(5, 0.1, 50)])[None, :]
        centers, labels = lloyd_kmeans(X, 2, seed=1)
        np.testing.assert_allclose(np.sort(centers[0]), [-5, 5], atol=0.1)
        assert len(set(labels[:50])) == 1 and len(set(labels[50:])) == 1


class TestAssumptionReport:
    def test_noiseless_copies(self):
        M = np.eye(3)
        rep = assumption_report(copies_instance(M, 4), 1 / 3, estimates=M)
        assert rep.sigma == 0.0 and rep.spectral_ratio == 0.0
        assert all(rep.passes.values())
        assert rep.max_error == 0.0

    def test_duplicated_vertex(self):
        M = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        rep = assumption_report(copies_instance(M, 3), 1 / 3)
        assert rep.alpha == 0.0 and not rep.passes["well_separated"]

    def test_lda_fields_finite(self):
        inst = gen_lda(100, 1000, 3, 50, 1 / 3, seed=0)
        rep = assumption_report(inst, 0.05)
        for key, value in rep.to_dict().items():
            if isinstance(value, float):
                assert math.isfinite(value), key
        assert 0 <= rep.alpha <= 1
        assert len(rep.proximity_counts) == 3
        assert rep.delta_realized > 0
        assert rep.s_k_M > 0 and rep.s_k_P > 0
        # the literal constant makes the spectral assumption fail at this scale
        assert rep.spectral_ratio > rep.spectral_ratio_free

    def test_subset_average_predicate(self):
        inst = gen_lda(80, 150, 3, 25, 1 / 3, seed=1)
        sigma = np.linalg.norm(inst.A.toarray() - inst.P, 2) / math.sqrt(150)
        rng = np.random.default_rng(0)
        D = inst.A.toarray()
        for _ in range(100):
            size = int(rng.integers(1, 151))
            S = rng.choice(150, size, replace=False)
            gap = np.linalg.norm(D[:, S].mean(axis=1) - inst.P[:, S].mean(axis=1))
            assert gap <= sigma * math.sqrt(150) / math.sqrt(size)
