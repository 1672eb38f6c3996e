import math

import numpy as np
import pytest

from potlab.errors import InputError
from potlab.kernels import pairwise_distances
from potlab.sets import (
    Ball,
    BallUnion,
    Box,
    Cantor,
    ComplementOfOpen,
    FinitePoints,
    GDeltaSpec,
    Neighborhood,
    OpenBall,
    Segment,
    Union,
    WholeSpace,
    cantor_intervals,
    density_check,
    exterior_probes,
    geometric_exhaustion,
    grid_points,
    shell_index,
    standard_exhaustion,
)


def cantor_intervals_oracle(level):
    """Independent recursive construction of the middle-thirds intervals."""
    def split(lo, hi, depth):
        if depth == 0:
            return [(lo, hi)]
        third = (hi - lo) / 3.0
        return split(lo, lo + third, depth - 1) + split(hi - third, hi, depth - 1)
    return split(0.0, 1.0, level)


class TestDistances:
    def test_member_distance_zero(self):
        s = Ball([0.0, 0.0], 1.0)
        assert s.distance([0.5, 0.0]) == 0.0
        assert s.contains([0.5, 0.0])

    def test_ball_outside(self):
        s = Ball([0.0, 0.0], 1.0)
        assert s.distance([3.0, 0.0]) == pytest.approx(2.0)

    def test_cantor_level2_from_half(self):
        # brute force over the 4 level-2 intervals; nearest endpoint is 1/3
        s = Cantor(2)
        oracle = min(
            max(lo - 0.5, 0.5 - hi, 0.0) for lo, hi in cantor_intervals_oracle(2))
        assert s.distance([0.5]) == pytest.approx(oracle)
        assert s.distance([0.5]) == pytest.approx(1.0 / 6.0)

    def test_cantor_intervals_match_oracle(self):
        for level in range(5):
            got = cantor_intervals(level)
            want = sorted(cantor_intervals_oracle(level))
            assert np.allclose(got, np.array(want))

    def test_segment_distance(self):
        s = Segment([0.0, 0.0], [1.0, 0.0])
        assert s.distance([0.5, 2.0]) == pytest.approx(2.0)
        assert s.distance([2.0, 0.0]) == pytest.approx(1.0)

    def test_union_distance_is_min(self):
        rng = np.random.default_rng(0)
        members = [Ball(rng.normal(size=2), 0.5) for _ in range(3)]
        u = Union(tuple(members))
        for _ in range(50):
            x = rng.normal(size=2) * 3
            want = min(m.distance(x) for m in members)
            assert u.distance(x) == pytest.approx(want)

    def test_complement_of_open_ball(self):
        s = ComplementOfOpen(Ball([0.0], 1.0))
        assert s.distance([0.0]) == pytest.approx(1.0)
        assert s.distance([2.0]) == 0.0

    def test_box_distance(self):
        s = Box([0.0, 0.0], [1.0, 1.0])
        assert s.distance([2.0, 2.0]) == pytest.approx(math.sqrt(2.0))


class TestShellIndex:
    def test_boundary_values(self):
        origin = FinitePoints([[0.0]])
        assert shell_index(origin, [3.0]) == 0    # 3*1 <= 3 < 4
        assert shell_index(origin, [4.0]) == 1    # 3*(4/3) = 4 <= 4 < 16/3
        assert shell_index(origin, [3.5]) == 0

    def test_member_rejected(self):
        with pytest.raises(InputError):
            shell_index(FinitePoints([[0.0]]), [0.0])

    def test_bracketing_unique(self):
        # exactly one k satisfies M q^k <= t < (M+1) q^k; scan-oracle check
        origin = FinitePoints([[0.0, 0.0]])
        rng = np.random.default_rng(1)
        for _ in range(300):
            t = float(10.0 ** rng.uniform(-6, 6))
            y = np.array([t, 0.0])
            k = shell_index(origin, y)
            hits = [
                kk for kk in range(k - 3, k + 4)
                if 3.0 * (4.0 / 3.0) ** kk <= t < 4.0 * (4.0 / 3.0) ** kk
            ]
            assert hits == [k]

    def test_general_base(self):
        origin = FinitePoints([[0.0]])
        m = 5.0
        q = 6.0 / 5.0
        k = shell_index(origin, [7.0], base=m)
        assert m * q ** k <= 7.0 < (m + 1) * q ** k


class TestExhaustion:
    def test_unit_ball_level(self):
        u = OpenBall([0.0, 0.0], 1.0)
        ex = standard_exhaustion(u, 4)
        # margins reindex away empty levels; V with margin 1/2 is ball of radius 1/2
        idx = ex.margins.index(0.5) + 1
        lvl = ex.level(idx)
        assert lvl.contains([0.49, 0.0])
        assert not lvl.contains([0.51, 0.0])

    def test_whole_r1_level(self):
        u = WholeSpace(1)
        ex = standard_exhaustion(u, 3)
        lvl = ex.level(3)
        assert ex.windows[2] == 3.0
        assert lvl.contains([2.99])
        assert not lvl.contains([3.0])

    def test_levels_nested(self):
        u = OpenBall([0.0], 2.0)
        ex = standard_exhaustion(u, 5)
        rng = np.random.default_rng(2)
        pts = rng.uniform(-2, 2, size=(200, 1))
        for n in range(1, ex.depth):
            inside_n = ex.level(n).contains_many(pts)
            inside_next = ex.level(n + 1).contains_many(pts)
            assert np.all(~inside_n | inside_next)

    def test_separation_certified(self):
        u = OpenBall([0.0, 0.0], 1.0)
        ex = geometric_exhaustion(u, 5)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-1.2, 1.2, size=(4000, 2))
        for i, j in [(1, 2), (2, 4), (1, 5)]:
            sep = ex.separation(i, j)
            inside = pts[ex.level(i).contains_many(pts)]
            outside = pts[~ex.level(j).contains_many(pts)]
            if len(inside) and len(outside):
                actual = pairwise_distances(inside, outside).min()
                assert actual >= sep - 1e-12

    def test_annulus_membership(self):
        u = OpenBall([0.0], 1.0)
        ex = geometric_exhaustion(u, 6)
        ann = ex.annulus(3)
        rng = np.random.default_rng(4)
        pts = rng.uniform(-1, 1, size=(500, 1))
        in_ann = ann.contains_many(pts)
        in_outer = ex.level(4).contains_many(pts)
        in_prev = ex.level(2).contains_many(pts)
        # annulus membership implies outer membership and excludes level n-1
        assert np.all(~in_ann | in_outer)
        assert not np.any(in_ann & in_prev)


class TestNeighborhoodAndGDelta:
    def test_neighborhood_oracles(self):
        core = FinitePoints([[0.0], [1.0]])
        nb = Neighborhood(core, 0.25)
        assert nb.contains([0.2])
        assert not nb.contains([0.5])
        assert nb.distance([0.5]) == pytest.approx(0.25)
        assert nb.inner_radius([0.1]) == pytest.approx(0.15)

    def test_gdelta_monotone(self):
        g = GDeltaSpec(Cantor(3), (0.5, 0.25, 0.125))
        rng = np.random.default_rng(5)
        pts = rng.uniform(-0.5, 1.5, size=(300, 1))
        for m in range(1, g.depth):
            inner = g.neighborhood(m + 1).contains_many(pts)
            outer = g.neighborhood(m).contains_many(pts)
            assert np.all(~inner | outer)

    def test_gdelta_membership_is_core(self):
        g = GDeltaSpec(FinitePoints([[0.0]]), (0.5, 0.25))
        assert g.contains_many(np.array([[0.0], [0.1]])).tolist() == [True, False]

    def test_gdelta_requires_decreasing(self):
        with pytest.raises(InputError):
            GDeltaSpec(FinitePoints([[0.0]]), (0.25, 0.5))


class TestSampling:
    def test_ball_union_inner_radius(self):
        bu = BallUnion([[0.0], [1.0]], [0.3, 0.3])
        assert bu.inner_radius([0.0]) == pytest.approx(0.3)
        assert bu.contains([1.2])
        assert not bu.contains([0.5])

    def test_net_is_dense(self):
        for s, res in [
            (Ball([0.0, 0.0], 1.0), 0.3),
            (Box([0.0], [1.0]), 0.1),
            (Segment([0.0, 0.0], [1.0, 1.0]), 0.2),
            (Cantor(3), 0.05),
        ]:
            net = s.net(res)
            assert np.all(s.distance_many(net) <= 1e-9)
            assert density_check(net, s, res) <= res

    def test_grid_points_deterministic(self):
        a = grid_points([0.0, 0.0], [1.0, 1.0], 0.5)
        b = grid_points([0.0, 0.0], [1.0, 1.0], 0.5)
        assert np.array_equal(a, b)

    def test_exterior_probes_respect_separation(self):
        s = Ball([0.0, 0.0], 1.0)
        probes = exterior_probes(s, separation=0.5, resolution=0.4)
        assert len(probes) > 0
        assert np.all(s.distance_many(probes) >= 0.5)


class TestExhaustionReindex:
    def test_leading_empty_levels_skipped(self):
        # a radius-0.2 ball has no points with inner radius > 1/4, so the
        # standard 1/n levels start empty and get reindexed away
        u = OpenBall([0.0], 0.2)
        ex = standard_exhaustion(u, 10)
        assert ex.margins[0] < 0.2
        assert ex.level(1).contains([0.0])
