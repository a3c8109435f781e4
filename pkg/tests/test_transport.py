import itertools
import math

import numpy as np
import pytest

from transinfo.chains import Density, fisher_information, line_metric, trivial_metric
from transinfo.errors import InfeasibleMarginals, ProductTooLarge, UnsortedGrid
from transinfo.transport import (
    CostMatrix,
    RateFunction,
    alpha_conjugate,
    alpha_infconv,
    conditional_fisher_sum,
    infconv_potential,
    kantorovich_dual,
    ot_cost,
    supconv_potential,
    tensor_cost,
    tensor_subadditivity_check,
    w1,
    w1_potential,
    w2,
    w2_potential,
    w2_quantile_1d,
)

from conftest import random_reversible_chain


def transport_vertices(nu, mu):
    """All basic feasible solutions of the transport polytope (brute force).

    A vertex corresponds to a spanning forest of the bipartite support;
    enumerate every edge subset of size n + m - 1 and keep the feasible
    solves.  Oracle only, exponential in the size.
    """
    n, m = len(nu), len(mu)
    cells = list(itertools.product(range(n), range(m)))
    vertices = []
    for subset in itertools.combinations(cells, n + m - 1):
        A = np.zeros((n + m, n + m - 1))
        for k, (i, j) in enumerate(subset):
            A[i, k] = 1.0
            A[n + j, k] = 1.0
        b = np.concatenate([nu, mu])
        x, res, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank < n + m - 1:
            continue
        if np.max(np.abs(A @ x - b)) > 1e-10 or np.any(x < -1e-10):
            continue
        pi = np.zeros((n, m))
        for k, (i, j) in enumerate(subset):
            pi[i, j] = max(x[k], 0.0)
        vertices.append(pi)
    return vertices


class TestOtCost:
    def test_identity_coupling_zero_cost(self, rng):
        c = CostMatrix.validate(rng.uniform(0, 1, (3, 3)) * (1 - np.eye(3)))
        mu = np.array([0.2, 0.5, 0.3])
        val, coup = ot_cost(c, mu, mu)
        assert val == pytest.approx(0.0, abs=1e-12)
        assert coup.marginal_residual() < 1e-10

    def test_trivial_cost_is_half_tv(self, rng):
        for _ in range(10):
            nu = rng.dirichlet(np.ones(4))
            mu = rng.dirichlet(np.ones(4))
            val, _ = ot_cost(CostMatrix.from_metric(trivial_metric(4)), nu, mu)
            assert val == pytest.approx(0.5 * np.abs(nu - mu).sum(), abs=1e-10)

    def test_matches_vertex_enumeration(self, rng):
        for _ in range(5):
            nu = rng.dirichlet(np.ones(3))
            mu = rng.dirichlet(np.ones(3))
            c = rng.uniform(0.0, 2.0, (3, 3))
            np.fill_diagonal(c, 0.0)
            cm = CostMatrix.validate(c)
            val, _ = ot_cost(cm, nu, mu)
            oracle = min(float(np.sum(v * c)) for v in transport_vertices(nu, mu))
            assert val == pytest.approx(oracle, abs=1e-9)

    def test_infeasible_marginals(self):
        c = CostMatrix.validate(np.zeros((2, 2)))
        with pytest.raises(InfeasibleMarginals):
            ot_cost(c, np.array([0.5, 0.6]), np.array([0.5, 0.5]))

    def test_monotone_in_cost(self, rng):
        nu = rng.dirichlet(np.ones(4))
        mu = rng.dirichlet(np.ones(4))
        c = rng.uniform(0.1, 1.0, (4, 4))
        np.fill_diagonal(c, 0.0)
        bigger = c + rng.uniform(0.0, 0.5, (4, 4)) * (1 - np.eye(4))
        v1, _ = ot_cost(CostMatrix.validate(c), nu, mu)
        v2, _ = ot_cost(CostMatrix.validate(bigger), nu, mu)
        assert v1 <= v2 + 1e-10


class TestKantorovichDual:
    def test_same_marginals(self):
        c = CostMatrix.validate(np.ones((3, 3)) - np.eye(3))
        mu = np.array([0.3, 0.3, 0.4])
        val, u, v = kantorovich_dual(c, mu, mu)
        assert val == pytest.approx(0.0, abs=1e-12)

    def test_feasibility_and_gap(self, rng):
        for _ in range(10):
            n = 4
            nu = rng.dirichlet(np.ones(n))
            mu = rng.dirichlet(np.ones(n))
            c = rng.uniform(0.0, 3.0, (n, n))
            np.fill_diagonal(c, 0.0)
            cm = CostMatrix.validate(c)
            primal, _ = ot_cost(cm, nu, mu)
            dual, u, v = kantorovich_dual(cm, nu, mu)
            assert np.all(u[:, None] - v[None, :] <= c + 1e-12)
            assert dual == pytest.approx(primal, abs=1e-9)

    def test_trivial_metric_potential_oscillation(self, rng):
        d = trivial_metric(3)
        nu = rng.dirichlet(np.ones(3))
        mu = rng.dirichlet(np.ones(3))
        _, u, v = kantorovich_dual(CostMatrix.from_metric(d), nu, mu)
        assert np.max(u) - np.min(u) <= 1.0 + 1e-10


class TestWassersteinOps:
    def test_same_measure_zero(self, rng):
        d = trivial_metric(3)
        mu = rng.dirichlet(np.ones(3))
        assert w1(d, mu, mu) == pytest.approx(0.0, abs=1e-12)
        assert w2(d, mu, mu) == pytest.approx(0.0, abs=1e-12)

    def test_two_point_closed_form(self):
        d = trivial_metric(2)
        nu = np.array([0.7, 0.3])
        mu = np.array([0.4, 0.6])
        assert w1(d, nu, mu) == pytest.approx(0.3, abs=1e-12)

    def test_gaussian_shift_w1_w2(self):
        # discretized N(m, 1) vs N(0, 1): both distances converge to |m|
        m = 0.5
        x = np.arange(-8.0, 8.0 + 1e-9, 0.01)
        w = np.exp(-x ** 2 / 2)
        mu = w / w.sum()
        wn = np.exp(-(x - m) ** 2 / 2)
        nu = wn / wn.sum()
        d = line_metric(x)
        assert w1(d, nu, mu) == pytest.approx(m, rel=0.01)
        assert w2(d, nu, mu) == pytest.approx(m, rel=0.01)

    def test_quantile_route_crosses_lp_route(self, rng):
        grid = np.sort(rng.uniform(-2, 2, 5))
        nu = rng.dirichlet(np.ones(5))
        mu = rng.dirichlet(np.ones(5))
        d2 = CostMatrix.validate((grid[:, None] - grid[None, :]) ** 2, aligned=True)
        lp_val, _ = ot_cost(d2, nu, mu)
        assert w2_quantile_1d(grid, nu, mu) == pytest.approx(math.sqrt(lp_val), abs=1e-8)

    def test_quantile_two_point_hand_value(self):
        grid = np.array([0.0, 1.0])
        val = w2_quantile_1d(grid, np.array([0.5, 0.5]), np.array([0.25, 0.75]))
        # 0.25 of mass moves distance 1: W2 = sqrt(0.25)
        assert val == pytest.approx(0.5, abs=1e-12)

    def test_unsorted_grid_rejected(self):
        with pytest.raises(UnsortedGrid):
            w2_quantile_1d(np.array([0.0, 2.0, 1.0]), np.ones(3) / 3, np.ones(3) / 3)

    def test_w1_metric_axioms(self, rng):
        d = line_metric(np.array([0.0, 0.7, 1.1, 2.4]))
        ms = [rng.dirichlet(np.ones(4)) for _ in range(3)]
        d01 = w1(d, ms[0], ms[1])
        d10 = w1(d, ms[1], ms[0])
        assert d01 == pytest.approx(d10, abs=1e-9)
        d02 = w1(d, ms[0], ms[2])
        d12 = w1(d, ms[1], ms[2])
        assert d01 <= d02 + d12 + 1e-9

    def test_potentials_are_subgradients(self, rng):
        # first-order expansion of W1 and W2^2 along a marginal perturbation
        grid = np.array([0.0, 0.9, 1.7, 3.0])
        d = line_metric(grid)
        nu = np.array([0.3, 0.3, 0.2, 0.2])
        mu = np.array([0.25, 0.25, 0.25, 0.25])
        direction = np.array([0.5, -0.5, 0.3, -0.3])
        for dist_fn, pot_fn, square in ((w1, w1_potential, False),
                                        (w2, w2_potential, True)):
            base = dist_fn(d, nu, mu)
            pot = pot_fn(d, nu, mu)
            eps = 1e-6
            bumped = dist_fn(d, nu + eps * direction, mu)
            lhs = (bumped ** 2 - base ** 2) / eps if square else (bumped - base) / eps
            rhs = float(np.dot(pot, direction))
            assert lhs == pytest.approx(rhs, abs=1e-3)


class TestTensorCost:
    def test_two_trivial_metrics_give_hamming(self):
        c1 = CostMatrix.validate(np.ones((2, 2)) - np.eye(2))
        big = tensor_cost([c1, c1])
        # states 00,01,10,11 row-major: cost = number of differing coordinates
        expected = np.array([
            [0, 1, 1, 2],
            [1, 0, 2, 1],
            [1, 2, 0, 1],
            [2, 1, 1, 0],
        ], dtype=float)
        np.testing.assert_allclose(big.c, expected)

    def test_line_metric_squares_to_l1(self):
        line = CostMatrix.validate(np.abs(np.subtract.outer(np.arange(3.0), np.arange(3.0))))
        big = tensor_cost([line, line])
        for x1, x2, y1, y2 in itertools.product(range(3), repeat=4):
            assert big.c[x1 * 3 + x2, y1 * 3 + y2] == abs(x1 - y1) + abs(x2 - y2)

    def test_single_factor_identity(self, rng):
        c = rng.uniform(0, 1, (3, 3)) * (1 - np.eye(3))
        cm = CostMatrix.validate(c)
        np.testing.assert_allclose(tensor_cost([cm]).c, c)

    def test_size_guard(self):
        c = CostMatrix.validate(np.ones((11, 11)) - np.eye(11))
        with pytest.raises(ProductTooLarge):
            tensor_cost([c, c])


class TestRateFunctionCalculus:
    def test_quadratic_conjugate_closed_form(self):
        a = RateFunction.quadratic(2.0)
        assert alpha_conjugate(a, 3.0) == pytest.approx(36.0, abs=1e-12)
        assert alpha_conjugate(a, 0.0) == 0.0

    def test_power_conjugate_hand_value(self):
        # sup_r (3r - (1+r^2) + 1) = 9/4, attained at r = 3/2
        a = RateFunction.power(1.0, 2.0)
        assert alpha_conjugate(a, 3.0) == pytest.approx(2.25, abs=1e-10)

    def test_power_conjugate_matches_grid_search(self):
        a = RateFunction.power(0.7, 3.0)
        for lam in (0.5, 1.0, 4.0):
            rs = np.linspace(0.0, 50.0, 400001)
            grid_val = np.max(lam * rs - np.array([a(r) for r in rs[:2]] +
                                                  [0.7 * ((1 + r * r) ** 1.5 - 1) for r in rs[2:]]))
            assert alpha_conjugate(a, lam) == pytest.approx(float(grid_val), abs=1e-6)

    def test_conjugate_convex_increasing(self):
        a = RateFunction.power(1.2, 2.5)
        lams = np.linspace(0.0, 5.0, 21)
        vals = np.array([alpha_conjugate(a, l) for l in lams])
        assert np.all(np.diff(vals) >= -1e-12)
        assert np.all(np.diff(vals, 2) >= -1e-8)

    def test_tabulated_conjugate_right_endpoint(self):
        a = RateFunction.tabulated([0.0, 1.0, 2.0], [0.0, 0.5, 2.0])
        # alpha = +inf beyond the last knot: conjugate is the knot max
        for lam in (0.1, 1.0, 5.0):
            assert alpha_conjugate(a, lam) == pytest.approx(
                max(lam * 1.0 - 0.5, lam * 2.0 - 2.0, 0.0), abs=1e-12)

    def test_infconv_identical_closed_form(self):
        a = RateFunction.quadratic(1.3)
        for r in np.linspace(0, 4, 100):
            assert alpha_infconv([a, a], float(r)) == pytest.approx(
                2 * a(r / 2), abs=1e-10)

    def test_infconv_single(self):
        a = RateFunction.power(1.0, 2.0)
        assert alpha_infconv([a], 1.7) == a(1.7)

    def test_infconv_two_quadratics_closed_form(self):
        # r^2/(4c1^2) box r^2/(4c2^2) = r^2 / (4(c1^2 + c2^2))
        a1, a2 = RateFunction.quadratic(1.0), RateFunction.quadratic(2.0)
        for r in (0.5, 1.0, 2.0):
            expected = r * r / (4 * (1.0 + 4.0))
            assert alpha_infconv([a1, a2], r) == pytest.approx(expected, abs=1e-8)

    def test_infconv_matches_fine_grid(self):
        a1 = RateFunction.power(1.0, 2.0)
        a2 = RateFunction.quadratic(0.8)
        r = 2.0
        xs = np.linspace(0, r, 20001)
        grid = min(a1(float(x)) + a2(float(r - x)) for x in xs)
        assert alpha_infconv([a1, a2], r) == pytest.approx(grid, abs=1e-8)

    def test_infconv_properties_on_grid(self):
        a1 = RateFunction.quadratic(1.0)
        a2 = RateFunction.power(0.5, 2.0)
        rs = np.linspace(0.0, 3.0, 31)
        vals = np.array([alpha_infconv([a1, a2], float(r)) for r in rs])
        assert vals[0] == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.diff(vals) >= -1e-9)          # increasing
        assert np.all(np.diff(vals, 2) >= -1e-6)       # convex


class TestPotentialConvolutions:
    def test_constant_fixed_point(self):
        d2 = CostMatrix.validate((np.ones((3, 3)) - np.eye(3)) * 4.0)
        v = np.full(3, 1.5)
        np.testing.assert_allclose(infconv_potential(d2, v), v)

    def test_two_point_hand_value(self):
        d2 = CostMatrix.validate(np.array([[0.0, 1.0], [1.0, 0.0]]))
        v = np.array([0.0, 3.0])
        np.testing.assert_allclose(infconv_potential(d2, v), [0.0, 1.0])
        u = np.array([0.0, 3.0])
        np.testing.assert_allclose(supconv_potential(d2, u), [2.0, 3.0])

    def test_order_relations_and_idempotence(self, rng):
        n = 5
        pts = np.sort(rng.uniform(0, 2, n))
        d2 = CostMatrix.validate((pts[:, None] - pts[None, :]) ** 2, aligned=True)
        u = rng.standard_normal(n)
        v = rng.standard_normal(n)
        Su = supconv_potential(d2, u)
        Qv = infconv_potential(d2, v)
        assert np.all(infconv_potential(d2, Su) >= u - 1e-12)   # Q(S(u)) >= u
        assert np.all(supconv_potential(d2, Qv) <= v + 1e-12)   # S(Q(v)) <= v
        # double application stabilizes on c-concave envelopes
        QSu = infconv_potential(d2, Su)
        np.testing.assert_allclose(infconv_potential(d2, supconv_potential(d2, QSu)),
                                   QSu, atol=1e-12)


class TestTensorization:
    def test_product_measure_zero(self):
        c1 = CostMatrix.validate(np.ones((2, 2)) - np.eye(2))
        mu1 = np.array([0.5, 0.5])
        mu2 = np.array([0.4, 0.6])
        nu = np.outer(mu1, mu2)
        lhs, rhs = tensor_subadditivity_check([c1, c1], nu, [mu1, mu2])
        assert lhs == pytest.approx(0.0, abs=1e-10)
        assert rhs == pytest.approx(0.0, abs=1e-10)

    def test_independent_nu_additivity(self, rng):
        # independent nu = nu1 (x) nu2: conditionals constant, lhs = rhs
        c1 = CostMatrix.validate(np.ones((3, 3)) - np.eye(3))
        mu1 = rng.dirichlet(np.ones(3))
        mu2 = rng.dirichlet(np.ones(3))
        nu1 = rng.dirichlet(np.ones(3))
        nu2 = rng.dirichlet(np.ones(3))
        lhs, rhs = tensor_subadditivity_check([c1, c1], np.outer(nu1, nu2), [mu1, mu2])
        assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_perturbed_product_subadditive(self, rng):
        c1 = CostMatrix.validate(np.ones((2, 2)) - np.eye(2))
        mu1 = np.array([0.5, 0.5])
        mu2 = np.array([0.3, 0.7])
        for _ in range(20):
            nu = rng.dirichlet(np.ones(4)).reshape(2, 2)
            lhs, rhs = tensor_subadditivity_check([c1, c1], nu, [mu1, mu2])
            assert lhs <= rhs + 1e-9

    def test_fisher_additivity_on_products(self, rng):
        from transinfo.chains import product_chain
        c1 = random_reversible_chain(3, rng)
        c2 = random_reversible_chain(3, rng)
        prod = product_chain([c1, c2])
        for _ in range(20):
            raw = rng.dirichlet(np.ones(prod.n))
            f = raw / prod.mu
            f /= float(np.dot(prod.mu, f))
            lhs = fisher_information(prod, Density.validate(prod.mu, f))
            rhs = conditional_fisher_sum([c1, c2], prod.mu * f)
            assert lhs == pytest.approx(rhs, abs=1e-8)
