"""Problem construction, gradients, objectives, optimality, volumes."""

import numpy as np
import pytest
import scipy.sparse as sp

from sparsepr import (
    Graph,
    MQuadratic,
    PageRankInstance,
    build_pagerank_quadratic,
    check_optimality,
    dense_solve_enumerate,
    gradient,
    internal_volume,
    negative_tolerance,
    objective,
    pagerank_upper_bounds,
    validate_m_matrix,
    volume,
)
from sparsepr.oracle import random_m_matrix

from conftest import assert_close, two_node_instance


class TestGraph:
    def test_two_node_path(self):
        g = Graph(2, [(0, 1)])
        assert g.n == 2
        assert g.num_edges == 1
        assert list(g.degrees) == [1, 1]
        assert list(g.neighbors(0)) == [1]

    def test_disconnected_rejected(self):
        with pytest.raises(ValueError, match="connected"):
            Graph(4, [(0, 1), (2, 3)])

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            Graph(2, [(0, 0), (0, 1)])

    def test_duplicate_edge_rejected(self):
        with pytest.raises(ValueError):
            Graph(2, [(0, 1), (1, 0)])

    def test_isolated_node_rejected(self):
        with pytest.raises(ValueError):
            Graph(3, [(0, 1)])


class TestPageRankInstance:
    def test_seed_node_becomes_indicator(self):
        inst = two_node_instance()
        assert inst.s[0] == 1.0 and inst.s[1] == 0.0

    def test_alpha_range_enforced(self):
        with pytest.raises(ValueError):
            PageRankInstance(Graph(2, [(0, 1)]), 1.5, 0.1, 0)
        with pytest.raises(ValueError):
            PageRankInstance(Graph(2, [(0, 1)]), 0.0, 0.1, 0)

    def test_rho_positive(self):
        with pytest.raises(ValueError):
            PageRankInstance(Graph(2, [(0, 1)]), 0.5, 0.0, 0)

    def test_distribution_off_simplex_rejected(self):
        with pytest.raises(ValueError):
            PageRankInstance(Graph(2, [(0, 1)]), 0.5, 0.1, np.array([0.6, 0.5]))
        with pytest.raises(ValueError):
            PageRankInstance(Graph(2, [(0, 1)]), 0.5, 0.1, np.array([1.2, -0.2]))

    def test_distribution_within_tolerance_accepted(self):
        s = np.array([0.7, 0.3 + 1e-13])
        inst = PageRankInstance(Graph(2, [(0, 1)]), 0.5, 0.1, s)
        assert abs(inst.s.sum() - 1.0) <= 1e-12


class TestBuildPageRank:
    def test_two_node_matrix(self, two_node):
        dense = two_node.Q.toarray()
        assert dense[0, 0] == 0.75 and dense[1, 1] == 0.75
        assert dense[0, 1] == -0.25 and dense[1, 0] == -0.25
        assert two_node.alpha == 0.5 and two_node.L == 1.0

    def test_two_node_linear_term(self, two_node):
        # b_i = alpha * (s_i / sqrt(d_i) - rho * sqrt(d_i)), unit degrees here
        assert two_node.b[0] == 0.45
        assert two_node.b[1] == -0.05

    def test_triangle_matrix(self):
        inst = PageRankInstance(Graph(3, [(0, 1), (1, 2), (0, 2)]), 0.5, 0.1, 0)
        q = build_pagerank_quadratic(inst)
        dense = q.Q.toarray()
        assert np.all(np.diag(dense) == 0.75)
        off = dense[~np.eye(3, dtype=bool)]
        assert_close(off, -0.125, 1e-15, "triangle off-diagonals")

    def test_degree_scaling(self):
        # star center has degree 3: off-diagonal -(1-alpha)/(2*sqrt(3))
        g = Graph(4, [(0, 1), (0, 2), (0, 3)])
        q = build_pagerank_quadratic(PageRankInstance(g, 0.5, 0.1, 0))
        assert_close(q.Q.toarray()[0, 1], -0.25 / np.sqrt(3.0), 1e-15, "off-diag")

    def test_passes_matrix_validation(self, two_node):
        result = validate_m_matrix(two_node.Q, two_node.alpha, two_node.L)
        assert result.ok, result.violations


class TestGradient:
    def test_at_zero_is_minus_b(self, two_node):
        g = gradient(two_node, np.zeros(2))
        assert g[0] == -0.45 and g[1] == 0.05

    def test_vanishes_at_optimum(self, two_node):
        assert_close(gradient(two_node, np.array([0.65, 0.15])), 0.0, 1e-15)

    def test_single_coordinate_after_first_stage(self, two_node):
        g = gradient(two_node, np.array([0.6, 0.0]), coords=[1])
        assert g.shape == (1,)
        assert_close(g, [-0.1], 1e-15)

    def test_restricted_matches_full_slice_bitwise(self, small_corpus):
        for item in small_corpus[:6]:
            q = item.q
            rng = np.random.default_rng(item.seed)
            x = rng.uniform(0.0, 1.0, q.n)
            coords = rng.choice(q.n, size=max(1, q.n // 2), replace=False)
            full = gradient(q, x)
            part = gradient(q, x, coords=coords)
            assert np.array_equal(part, full[coords])

    def test_finite_difference_consistency(self, small_corpus):
        h = 1e-5
        for item in small_corpus[:5]:
            q = item.q
            rng = np.random.default_rng(item.seed + 1)
            x = rng.uniform(0.1, 1.0, q.n)
            g = gradient(q, x)
            for i in range(min(q.n, 4)):
                e = np.zeros(q.n)
                e[i] = h
                fd = (objective(q, x + e) - objective(q, x - e)) / (2 * h)
                rel = abs(fd - g[i]) / max(1.0, abs(g[i]))
                assert rel <= 1e-6


class TestObjective:
    def test_zero_at_origin(self, two_node):
        assert objective(two_node, np.zeros(2)) == 0.0

    def test_unit_vector_value(self, two_node):
        # 0.5 * 0.75 - 0.45 = -0.075
        assert_close(objective(two_node, np.array([1.0, 0.0])), -0.075, 1e-15)

    def test_optimum_value(self, two_node):
        # -(b . x*)/2 = -(0.45*0.65 - 0.05*0.15)/2 = -0.1425
        assert_close(objective(two_node, np.array([0.65, 0.15])), -0.1425, 1e-15)


class TestCheckOptimality:
    def test_clean_at_optimum(self, two_node):
        inst = two_node_instance()
        rep = check_optimality(two_node, np.array([0.65, 0.15]),
                               pagerank_box=pagerank_upper_bounds(inst))
        assert rep.max_violation_positive <= 1e-10
        assert rep.max_violation_zero_low == 0.0
        assert rep.upper_box_violations == []
        assert rep.is_stationary(1e-10)

    def test_partial_support_optimum(self, two_node_high_rho):
        # b = (0.1, -0.4); x* = (2/15, 0); grad at node 1 is 11/30 <= cap 0.4
        q = two_node_high_rho
        assert_close(q.b, [0.1, -0.4], 1e-16, "b")
        x = np.array([2.0 / 15.0, 0.0])
        inst = two_node_instance(rho=0.8)
        rep = check_optimality(q, x, pagerank_box=pagerank_upper_bounds(inst))
        assert rep.max_violation_positive <= 1e-15
        assert rep.max_violation_zero_low == 0.0
        assert rep.upper_box_violations == []
        assert_close(gradient(q, x, coords=[1]), [11.0 / 30.0], 1e-15)

    def test_origin_reports_negative_gradient(self, two_node):
        rep = check_optimality(two_node, np.zeros(2))
        assert rep.max_violation_zero_low == 0.45
        assert rep.max_violation_positive == 0.0

    def test_box_violation_flagged(self, two_node):
        # at x=0 the gradient of node 0 is -0.45; with a tiny cap on zero
        # coordinates whose gradient is positive, node 1 (grad +0.05) trips
        rep = check_optimality(two_node, np.zeros(2),
                               pagerank_box=np.array([0.01, 0.01]))
        assert rep.upper_box_violations == [1]

    def test_negative_x_rejected(self, two_node):
        with pytest.raises(ValueError):
            check_optimality(two_node, np.array([-0.1, 0.0]))


class TestVolumes:
    def test_two_node_counts(self, two_node):
        assert volume(two_node, [0]) == 2
        assert internal_volume(two_node, [0]) == 1
        assert volume(two_node, [0, 1]) == 4
        assert internal_volume(two_node, [0, 1]) == 4
        assert volume(two_node, []) == 0
        assert internal_volume(two_node, []) == 0

    def test_graph_volume_identity(self, small_corpus):
        # for PageRank quadratics: vol(S) = sum(deg) + |S|,
        # internal_volume(S) = internal edges + |S|
        pr = [it for it in small_corpus if it.rho is not None]
        for item in pr[:4]:
            q = item.q
            rng = np.random.default_rng(item.seed + 2)
            S = np.flatnonzero(rng.uniform(size=q.n) < 0.5)
            degs = q.Q.indptr[S + 1] - q.Q.indptr[S] - 1
            assert volume(q, S) == int(degs.sum()) + len(S)
            member = np.zeros(q.n, dtype=bool)
            member[S] = True
            directed_internal = sum(
                member[j]
                for i in S
                for j in q.Q.indices[q.Q.indptr[i]:q.Q.indptr[i + 1]]
                if j != i
            )
            assert internal_volume(q, S) == directed_internal + len(S)


class TestValidateMMatrix:
    def test_valid_two_node(self, two_node):
        result = validate_m_matrix(two_node.Q, 0.5, 1.0)
        assert result.ok and result.violations == []

    def test_identity_valid(self):
        result = validate_m_matrix(sp.identity(3, format="csr"), 1.0, 1.0)
        assert result.ok

    def test_positive_off_diagonal_rejected(self):
        Q = sp.csr_matrix(np.array([[1.0, 0.1], [0.1, 1.0]]))
        result = validate_m_matrix(Q, 0.5, 1.5)
        assert not result.ok
        assert any("positive off-diagonal at (0, 1)" in v for v in result.violations)

    def test_asymmetry_rejected(self):
        Q = sp.csr_matrix(np.array([[1.0, -0.2], [-0.1, 1.0]]))
        result = validate_m_matrix(Q, 0.5, 1.5)
        assert not result.ok
        assert any("asymmetric" in v for v in result.violations)

    def test_eigenvalue_bounds_checked_small(self, two_node):
        # eigenvalues are 0.5 and 1.0; alpha=0.75 overclaims
        result = validate_m_matrix(two_node.Q, 0.75, 1.0)
        assert not result.ok
        assert any("below alpha" in v for v in result.violations)

    def test_diagonal_above_L_rejected(self):
        Q = sp.csr_matrix(np.diag([1.0, 2.0]))
        result = validate_m_matrix(Q, 0.5, 1.0)
        assert not result.ok
        assert any("diagonal above L" in v for v in result.violations)


class TestMQuadratic:
    def test_invalid_matrix_rejected_on_construction(self):
        Q = sp.csr_matrix(np.array([[1.0, 0.2], [0.2, 1.0]]))
        with pytest.raises(ValueError):
            MQuadratic(Q, np.zeros(2), 0.5, 1.5)

    def test_kappa(self, two_node):
        assert two_node.kappa == 2.0

    def test_negative_tolerance_scales_with_b(self, two_node):
        assert negative_tolerance(two_node) == 1e-12 * 1.0 * 0.45


class TestStructuralProperties:
    def test_origin_optimal_iff_rho_dominates_seed(self):
        # negative entries of grad at 0 exist iff s_i/d_i > rho
        for rho, expect_empty in ((1.0, True), (1.5, True), (0.99, False)):
            q = build_pagerank_quadratic(two_node_instance(rho=rho))
            ref = dense_solve_enumerate(q)
            grad0_neg = bool((gradient(q, np.zeros(2)) < 0).any())
            assert grad0_neg == (not expect_empty)
            assert (ref.support.size == 0) == expect_empty

    def test_monotone_gradient_under_coordinate_decrease(self, small_corpus):
        # lowering one coordinate never lowers any other coordinate's gradient
        for item in small_corpus[:6]:
            q = item.q
            rng = np.random.default_rng(item.seed + 3)
            x = rng.uniform(0.0, 2.0, q.n)
            g1 = gradient(q, x)
            i = int(rng.integers(q.n))
            eps = float(rng.uniform(0.0, x[i])) if x[i] > 0 else 0.0
            x2 = x.copy()
            x2[i] -= eps
            g2 = gradient(q, x2)
            mask = np.arange(q.n) != i
            assert np.min(g2[mask] - g1[mask]) >= -1e-12

    def test_random_m_matrix_gradient_scale(self):
        q = random_m_matrix(6, 0.5, seed=11)
        assert negative_tolerance(q) > 0
