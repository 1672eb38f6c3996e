import math

import numpy as np
import pytest

from potlab.errors import BudgetError
from potlab.evans import evans_measure, evans_on_countable
from potlab.kernels import metric_power
from potlab.measures import mass, potential, potential_field
from potlab.sets import Cantor, FinitePoints, FSigmaSpec, Segment


def test_single_point_piece_is_dirac_like():
    k = metric_power(1.0, cap=1e6)
    P = FSigmaSpec((FinitePoints([[0.0]]),))
    nu, report = evans_measure(k, P, depth=1)
    assert nu.n_atoms == 1
    assert nu.points[0, 0] == 0.0
    assert math.isinf(potential(k, nu, [0.0]))
    assert report.passed


def test_two_points_monotone_in_depth():
    k = metric_power(0.5, cap=1e6)
    pieces = tuple(FinitePoints([[0.0], [1.0]]) for _ in range(4))
    P = FSigmaSpec(pieces)
    mins = []
    for depth in (1, 2, 3, 4):
        nu, report = evans_measure(k, P, depth=depth)
        assert report.passed
        assert mass(nu) <= 1.0
        mins.append(report.tables["min_capped_potential"])
    assert all(b > a for a, b in zip(mins, mins[1:]))


def test_support_containment_exact():
    k = metric_power(0.8, cap=1e6)
    pieces = (Cantor(1), Cantor(2))
    P = FSigmaSpec(pieces)
    nu, report = evans_measure(k, P, depth=2)
    assert report.passed
    for m, piece in enumerate(pieces, start=1):
        pass  # per-piece support inequalities are in the report
    names = [i.name for i in report.inequalities]
    assert "piece-1/support" in names and "piece-2/support" in names


def test_cantor_divergence_growth():
    k = metric_power(0.8, cap=1e6)
    levels = [1, 2, 3]
    pieces = tuple(Cantor(lv) for lv in levels)
    P = FSigmaSpec(pieces)
    probes = [Cantor(3).endpoints()] * 3
    mins = []
    for depth in (1, 2, 3):
        nu, report = evans_measure(k, P, depth=depth, probes=probes)
        assert report.passed
        assert mass(nu) <= 1.0
        mins.append(report.tables["min_capped_potential"])
    assert all(b > a for a, b in zip(mins, mins[1:]))


def test_budget_failure_names_piece():
    # at a tiny cap even the first 2^-n series budget fails
    k = metric_power(1.0, cap=2.0)
    P = FSigmaSpec((FinitePoints([[0.0], [1.0], [2.0]]),))
    with pytest.raises(BudgetError) as err:
        evans_measure(k, P, depth=1)
    assert "piece-1" in err.value.stage


def test_countable_carrier_dyadic():
    k = metric_power(0.5, cap=1e4)
    seg = Segment([0.0], [1.0])
    P = FSigmaSpec((seg, seg))
    p0 = np.array([[j / 1024.0] for j in range(1025)])  # dyadics at 2^-10
    probes = [np.array([[j / 256.0] for j in range(257)])] * 2
    nu, report = evans_on_countable(k, P, p0, depth=2, probes=probes)
    assert report.passed
    assert mass(nu) <= 1.0
    # all atoms on dyadic sites
    residue = np.abs(nu.points * 1024.0 - np.round(nu.points * 1024.0))
    assert float(residue.max()) <= 1e-9
    # G nu > 1 on the 257-point probe grid
    vals = potential_field(k, nu, probes[0])
    assert np.all(vals > 1.0)


def test_countable_reduces_when_p0_covers_support():
    k = metric_power(1.0, cap=1e6)
    P = FSigmaSpec((FinitePoints([[0.0], [1.0]]),))
    p0 = np.array([[0.0], [1.0]])
    nu, report = evans_on_countable(k, P, p0, depth=1)
    assert report.passed
    assert np.all(np.isin(nu.points, p0))
    vals = potential_field(k, nu, np.array([[0.0], [1.0]]))
    assert np.all(vals > 2.0)  # level 2^1 certified


def test_two_dimensional_pieces():
    from potlab.sets import Ball, Segment
    k = metric_power(1.0, cap=1e6)
    pieces = (Segment([0.0, 0.0], [1.0, 0.0]), Ball([0.5, 0.5], 0.3))
    P = FSigmaSpec(pieces)
    nu, report = evans_measure(k, P, depth=2,
                               probes=[p.probe_points(0.1) for p in pieces])
    assert report.passed
    assert mass(nu) <= 1.0
    union = P.union(2)
    assert float(np.max(union.distance_many(nu.points))) <= 1e-9
