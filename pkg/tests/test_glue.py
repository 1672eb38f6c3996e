import numpy as np
import pytest

from potlab.choquet import choquet_measure
from potlab.errors import InputError
from potlab.evans import evans_measure
from potlab.glue import (
    assembled_neighborhood_monotone,
    chart_layout_rows,
    glue_choquet,
    glue_evans,
    local_cover,
    nominal_triangle_constant,
)
from potlab.kernels import log2d, metric_power
from potlab.measures import mass, potential_field
from potlab.sets import Box, FinitePoints, FSigmaSpec, GDeltaSpec


def test_single_chart_cover():
    k = metric_power(1.0)
    domain = Box([-0.1], [0.1])
    charts = local_cover(domain, k, chart_radius=1.0, probe_resolution=0.05)
    assert len(charts) == 1
    assert charts[0].neighbors == (1,)


def test_unit_square_cover_finite_neighbors():
    k = metric_power(1.0)
    domain = Box([0.0, 0.0], [1.0, 1.0])
    charts = local_cover(domain, k, chart_radius=0.4, probe_resolution=0.1)
    assert len(charts) > 1
    for ch in charts:
        # every neighbor set is finite and proper; exactness is checked
        # against ball arithmetic in the dedicated test below
        assert 1 <= len(ch.neighbors) <= len(charts)
        assert ch.index in ch.neighbors


def test_neighbor_sets_match_ball_arithmetic():
    k = metric_power(1.0)
    domain = Box([0.0], [1.0])
    charts = local_cover(domain, k, chart_radius=0.3, probe_resolution=0.1)
    for a in charts:
        for b in charts:
            touching = float(np.linalg.norm(a.ball.center - b.ball.center)) \
                < a.ball.radius + b.ball.radius
            assert (b.index in a.neighbors) == touching


def test_log2d_small_chart_certifies():
    k = log2d()
    domain = Box([0.0], [0.4])
    charts = local_cover(domain, k, chart_radius=0.25, probe_resolution=0.02)
    assert all(ch.triangle is None or ch.triangle.constant_c <= 2.0 + 1e-9
               for ch in charts)
    assert nominal_triangle_constant(k) == 2.0


def test_glue_evans_single_chart_identity():
    k = metric_power(1.0, cap=1e6)
    P = FSigmaSpec((FinitePoints([[0.0], [1.0]]),))
    domain = Box([-0.2], [1.2])
    charts = local_cover(domain, k, chart_radius=2.0, probe_resolution=0.3)
    assert len(charts) == 1
    direct, _ = evans_measure(k, P, 1)
    glued, report = glue_evans(k, P, charts, 1)
    assert np.array_equal(direct.points, glued.points)
    assert np.array_equal(direct.weights, glued.weights)
    assert report.passed


def test_glue_evans_two_charts():
    k = metric_power(1.0, cap=1e6)
    P = FSigmaSpec((FinitePoints([[0.0], [1.0]]),))
    domain = Box([-0.2], [1.2])
    charts = local_cover(domain, k, chart_radius=0.9, probe_resolution=0.3)
    assert len(charts) >= 2
    glued, report = glue_evans(k, P, charts, 1)
    assert report.passed
    assert mass(glued) <= 1.0


def test_glue_choquet_single_chart_identity():
    k = metric_power(1.0, cap=1e9)
    core = FinitePoints([[0.0]])
    g = GDeltaSpec(core, (0.25, 0.0625))
    domain = Box([-0.3], [0.3])
    charts = local_cover(domain, k, chart_radius=1.0, probe_resolution=0.1)
    assert len(charts) == 1
    direct, _ = choquet_measure(k, g, [[0.0]], depth=2, probes=np.array([[0.0]]))
    glued, report = glue_choquet(k, g, [[0.0]], charts, 2,
                                 probes=np.array([[0.0]]))
    assert np.array_equal(direct.points, glued.points)
    assert np.array_equal(direct.weights, glued.weights)
    assert report.passed


def test_glue_choquet_two_charts_divergence_only_at_core():
    k = metric_power(1.0, cap=1e9)
    core = FinitePoints([[0.0]])
    g = GDeltaSpec(core, (0.25, 0.0625))
    domain = Box([-0.6], [0.6])
    charts = local_cover(domain, k, chart_radius=0.45, probe_resolution=0.1)
    assert len(charts) >= 2
    glued, report = glue_choquet(k, g, [[0.0]], charts, 2,
                                 probes=np.array([[0.0]]))
    assert report.passed
    vals = potential_field(k, glued, np.array([[0.3], [0.6], [1.0]]))
    assert np.all(np.isfinite(vals))
    assert np.isinf(potential_field(k, glued, np.array([[0.0]]))[0])


def test_assembled_neighborhoods_decrease():
    k = metric_power(1.0)
    core = FinitePoints([[0.0], [0.5]])
    g = GDeltaSpec(core, (0.3, 0.1, 0.05))
    domain = Box([-0.5], [1.0])
    charts = local_cover(domain, k, chart_radius=0.5, probe_resolution=0.1)
    sample = np.linspace(-0.6, 1.1, 50).reshape(-1, 1)
    assert assembled_neighborhood_monotone(g, charts, sample)


def test_chart_layout_rows():
    k = metric_power(1.0)
    charts = local_cover(Box([0.0], [1.0]), k, 0.4, 0.1)
    rows = chart_layout_rows(charts)
    assert len(rows) == len(charts)
    assert rows[0][0] == 1


def test_cover_failure_when_radius_zero():
    with pytest.raises(InputError):
        local_cover(Box([0.0], [1.0]), metric_power(1.0), 0.0)
