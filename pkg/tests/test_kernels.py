import itertools
import math

import numpy as np
import pytest

from potlab.errors import InputError
from potlab.kernels import (
    as_cloud,
    chain_metric,
    comparability_check,
    eval_kernel,
    kernel_matrix,
    log2d,
    metric_power,
    quasimetric,
    quasimetric_matrix,
    riesz,
    triangle_constant,
    triangle_violations,
)


def brute_triangle_constant(k, pts):
    """Independent triple-loop oracle for the triangle constant."""
    g = kernel_matrix(k, pts, pts)
    n = len(pts)
    best = -np.inf
    arg = None
    for x, y, z in itertools.permutations(range(n), 3):
        ratio = min(g[x, z], g[y, z]) / g[x, y]
        if ratio > best:
            best, arg = ratio, (x, y, z)
    return max(best, 1.0), arg


def brute_shortest_paths(w):
    """Exhaustive path enumeration over all vertex orderings (tiny graphs)."""
    n = w.shape[0]
    d = w.copy()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for length in range(1, n - 1):
                for mids in itertools.permutations(
                        [v for v in range(n) if v not in (i, j)], length):
                    path = [i, *mids, j]
                    total = sum(w[a, b] for a, b in zip(path, path[1:]))
                    d[i, j] = min(d[i, j], total)
    return d


class TestEvalKernel:
    def test_riesz_unit_distance(self):
        k = riesz(alpha=2, n_dim=3)
        assert eval_kernel(k, [0, 0, 0], [1, 0, 0]) == 1.0

    def test_riesz_distance_two(self):
        k = riesz(alpha=2, n_dim=3)
        # direct evaluation of |x-y|^(alpha-N)
        assert eval_kernel(k, [0, 0, 0], [2, 0, 0]) == pytest.approx(2.0 ** (2 - 3))
        assert eval_kernel(k, [0, 0, 0], [2, 0, 0]) == 0.5

    def test_diagonal_is_infinite(self):
        for k in (riesz(2, 3), metric_power(1.0), log2d()):
            x = [0.25] * (3 if k.family == "riesz" else 1)
            assert math.isinf(eval_kernel(k, x, x))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            eval_kernel(riesz(2, 3), [0, 0, 0], [1, 0])

    def test_riesz_parameter_validation(self):
        with pytest.raises(InputError):
            riesz(alpha=3, n_dim=3)
        with pytest.raises(InputError):
            riesz(alpha=0, n_dim=3)

    def test_symmetry_random_pairs(self):
        rng = np.random.default_rng(7)
        kernels = [riesz(2, 3), metric_power(0.7)]
        for k in kernels:
            for _ in range(50):
                x = rng.normal(size=3)
                y = rng.normal(size=3)
                assert eval_kernel(k, x, y) == eval_kernel(k, y, x)


class TestQuasimetric:
    def test_diagonal_zero(self):
        k = riesz(2, 3)
        assert quasimetric(k, [1, 2, 3], [1, 2, 3]) == 0.0

    def test_riesz_unit_distance(self):
        k = riesz(2, 3)
        # 1/G + 1/G = 1/1 + 1/1 by symmetry
        assert quasimetric(k, [0, 0, 0], [1, 0, 0]) == 2.0

    def test_metric_power_r1(self):
        k = metric_power(1.0)
        # rho = d^gamma + d^gamma = 2*3
        assert quasimetric(k, [0.0], [3.0]) == pytest.approx(6.0)

    def test_zero_iff_equal(self):
        k = metric_power(1.5)
        rng = np.random.default_rng(3)
        for _ in range(100):
            x, y = rng.normal(size=2), rng.normal(size=2)
            rho = quasimetric(k, x, y)
            assert (rho == 0.0) == bool(np.linalg.norm(x - y) <= 1e-12)


class TestTriangleConstant:
    def test_three_point_example(self):
        k = metric_power(1.0)
        cloud = [[0.0], [0.5], [1.0]]
        rep = triangle_constant(k, cloud)
        oracle, arg = brute_triangle_constant(k, as_cloud(cloud))
        assert rep.constant_c == pytest.approx(oracle)
        assert rep.constant_c == pytest.approx(2.0)
        # worst triple (0, 1, 0.5): min(2,2)/1 = 2
        x, y, z = rep.worst_triple
        assert {float(x[0]), float(y[0])} == {0.0, 1.0}
        assert float(z[0]) == 0.5
        assert rep.gamma_min == pytest.approx(2.0 * math.log2(2.0))

    def test_collinear_equally_spaced(self):
        rep = triangle_constant(metric_power(1.0), [[0.0], [1.0], [2.0]])
        # triple (0,2,1): min(1,1)/(1/2) = 2
        assert rep.constant_c == pytest.approx(2.0)

    def test_metric_power_bound(self):
        # d(x,z) v d(y,z) >= d(x,y)/2 gives C <= 2^gamma
        rng = np.random.default_rng(11)
        for gamma in (0.5, 1.0, 1.7):
            k = metric_power(gamma)
            cloud = rng.normal(size=(12, 2))
            rep = triangle_constant(k, cloud)
            assert rep.constant_c <= 2.0 ** gamma + 1e-9

    def test_matches_bruteforce_random(self):
        rng = np.random.default_rng(5)
        k = riesz(2, 3)
        cloud = rng.normal(size=(7, 3))
        rep = triangle_constant(k, cloud)
        oracle, _ = brute_triangle_constant(k, cloud)
        assert rep.constant_c == pytest.approx(oracle, rel=1e-12)

    def test_needs_three_points(self):
        with pytest.raises(InputError):
            triangle_constant(metric_power(1.0), [[0.0], [1.0]])


class TestChainMetric:
    @pytest.mark.filterwarnings("ignore:gamma=.*below certified")
    def test_three_point_r1(self):
        k = metric_power(1.0)
        cloud = [[0.0], [1.0], [2.0]]
        d = chain_metric(k, cloud, gamma=1.0)
        # rho(0,2) = 2*2 = 4; via 1: 2+2 = 4 -> shortest path 4
        w = quasimetric_matrix(k, as_cloud(cloud)) ** 1.0
        oracle = brute_shortest_paths(w)
        assert np.allclose(d, oracle, rtol=0, atol=0)
        assert d[0, 2] == pytest.approx(4.0)

    @pytest.mark.filterwarnings("ignore:gamma=.*below certified")
    def test_metric_case_direct_edge(self):
        # rho already a metric and gamma = 1 -> d = rho
        k = metric_power(1.0)
        rng = np.random.default_rng(2)
        cloud = rng.normal(size=(6, 2))
        rho = quasimetric_matrix(k, cloud)
        d = chain_metric(k, cloud, gamma=1.0)
        assert np.allclose(d, rho)

    def test_two_point_cloud(self):
        k = metric_power(0.8)
        cloud = [[0.0], [2.0]]
        gamma = 1.3
        d = chain_metric(k, cloud, gamma=gamma)
        rho = quasimetric(k, [0.0], [2.0])
        assert d[0, 1] == pytest.approx(rho ** (1.0 / gamma))

    def test_triangle_inequality_exact(self):
        rng = np.random.default_rng(9)
        cloud = rng.normal(size=(25, 2))
        k = riesz(1, 2)
        rep = triangle_constant(k, cloud)
        gamma = max(rep.gamma_min, k.gamma)
        d = chain_metric(k, cloud, gamma=gamma)
        assert triangle_violations(d, rel_tol=1e-12) == 0

    def test_warns_below_gamma_min(self):
        k = metric_power(1.0)
        cloud = [[0.0], [0.5], [1.0]]
        rep = triangle_constant(k, cloud)
        with pytest.warns(UserWarning):
            chain_metric(k, cloud, gamma=rep.gamma_min / 2, gamma_min=rep.gamma_min)


class TestComparability:
    def test_two_point_closed_form(self):
        k = metric_power(1.0)
        cloud = as_cloud([[0.0], [3.0]])
        d = chain_metric(k, cloud, gamma=1.0)
        got = comparability_check(k, cloud, d, gamma=1.0)
        g = eval_kernel(k, [0.0], [3.0])
        prod = g * d[0, 1] ** 1.0
        assert got == pytest.approx(max(prod, 1.0 / prod))
        assert got == pytest.approx(2.0)

    def test_finite_on_grid(self):
        # riesz(2,3) on a 4x4x4 unit-cube grid, gamma from the certificate
        axes = np.linspace(0.0, 1.0, 4)
        cloud = np.stack(np.meshgrid(axes, axes, axes, indexing="ij"),
                         axis=-1).reshape(-1, 3)
        k = riesz(2, 3)
        rep = triangle_constant(k, cloud)
        gamma = max(rep.gamma_min, k.gamma)
        d = chain_metric(k, cloud, gamma=gamma)
        c_prime = comparability_check(k, cloud, d, gamma=gamma)
        assert np.isfinite(c_prime) and c_prime >= 1.0

    @pytest.mark.filterwarnings("ignore:gamma=.*below certified")
    def test_metric_power_bounded_constant(self):
        rng = np.random.default_rng(21)
        gamma = 1.0
        k = metric_power(gamma)
        cloud = rng.normal(size=(15, 2))
        d = chain_metric(k, cloud, gamma=gamma)
        c_prime = comparability_check(k, cloud, d, gamma=gamma)
        assert c_prime <= 2.0 ** gamma * 2.0 + 1e-9


class TestMonotoneRefinement:
    def test_adding_points(self):
        rng = np.random.default_rng(4)
        k = metric_power(1.0)
        small = rng.normal(size=(8, 2))
        extra = rng.normal(size=(4, 2))
        big = np.vstack([small, extra])
        rep_small = triangle_constant(k, small)
        rep_big = triangle_constant(k, big)
        assert rep_big.constant_c >= rep_small.constant_c - 1e-12
        gamma = max(rep_big.gamma_min, 1.0)
        d_small = chain_metric(k, small, gamma=gamma)
        d_big = chain_metric(k, big, gamma=gamma)
        assert np.all(d_big[:8, :8] <= d_small + 1e-12)
