import math

import numpy as np
import pytest

from potlab.errors import InputError
from potlab.kernels import metric_power, riesz
from potlab.measures import (
    DiscreteMeasure,
    add,
    load_measure_csv,
    mass,
    potential,
    potential_field,
    restrict,
    save_measure_csv,
    scale,
    sum_measures,
)
from potlab.sets import Ball, Box, WholeSpace


def test_single_atom_potential():
    k = riesz(2, 3)
    mu = DiscreteMeasure.dirac([1.0, 0.0, 0.0])
    assert potential(k, mu, [0.0, 0.0, 0.0]) == 1.0


def test_potential_on_own_atom_is_infinite():
    k = riesz(2, 3)
    mu = DiscreteMeasure.dirac([0.5, 0.5, 0.5])
    assert math.isinf(potential(k, mu, [0.5, 0.5, 0.5]))


def test_two_atom_example():
    k = riesz(2, 3)
    mu = DiscreteMeasure.from_atoms([[1, 0, 0], [0, 1, 0]], [0.5, 0.5])
    assert potential(k, mu, [0, 0, 0]) == pytest.approx(1.0)


def test_restrict_whole_space_and_empty():
    mu = DiscreteMeasure.from_atoms([[0.0], [5.0]], [1.0, 2.0])
    assert restrict(mu, WholeSpace(1)).n_atoms == 2
    nothing = restrict(mu, lambda p: False)
    assert nothing.n_atoms == 0


def test_restrict_interval():
    mu = DiscreteMeasure.from_atoms([[0.0], [5.0]], [1.0, 2.0])
    kept = restrict(mu, Box([0.0], [1.0]))
    assert kept.n_atoms == 1
    assert kept.points[0, 0] == 0.0
    assert kept.weights[0] == 1.0


def test_restrict_partition_is_exact():
    rng = np.random.default_rng(0)
    mu = DiscreteMeasure.from_atoms(rng.normal(size=(20, 2)), rng.uniform(size=20))
    s = Ball([0.0, 0.0], 1.0)
    inside = restrict(mu, s)
    outside = restrict(mu, lambda p: not s.contains(p))
    back = add(inside, outside)
    assert back.n_atoms == mu.n_atoms
    assert mass(back) == pytest.approx(mass(mu), rel=1e-15)


def test_scale_zero_and_negative():
    mu = DiscreteMeasure.dirac([1.0])
    assert scale(mu, 0.0).n_atoms == 0
    with pytest.raises(InputError):
        scale(mu, -1.0)


def test_geometric_sum_mass():
    # mass(sum 2^-m nu_m) <= 1 - 2^-M for unit-mass nu_m
    rng = np.random.default_rng(1)
    big_m = 6
    parts = [
        scale(DiscreteMeasure.from_atoms(rng.normal(size=(3, 1)), [0.2, 0.3, 0.5]),
              2.0 ** (-m))
        for m in range(1, big_m + 1)
    ]
    total = sum_measures(parts, dim=1)
    assert mass(total) <= 1.0 - 2.0 ** (-big_m) + 1e-12


def test_disjoint_add_counts():
    a = DiscreteMeasure.from_atoms([[0.0], [1.0]], [1.0, 1.0])
    b = DiscreteMeasure.from_atoms([[2.0], [3.0]], [1.0, 1.0])
    assert add(a, b).n_atoms == 4


def test_merge_close_atoms():
    mu = DiscreteMeasure.from_atoms([[0.0], [1e-13]], [1.0, 2.0])
    assert mu.n_atoms == 1
    assert mu.weights[0] == pytest.approx(3.0)


def test_linearity_of_potential():
    rng = np.random.default_rng(2)
    k = metric_power(0.9)
    mu = DiscreteMeasure.from_atoms(rng.normal(size=(8, 2)), rng.uniform(size=8))
    nu = DiscreteMeasure.from_atoms(rng.normal(size=(5, 2)), rng.uniform(size=5))
    probes = rng.normal(size=(30, 2)) + 5.0
    lhs = potential_field(k, add(mu, nu), probes)
    rhs = potential_field(k, mu, probes) + potential_field(k, nu, probes)
    assert np.allclose(lhs, rhs, rtol=1e-12)


def test_monotonicity_of_potential():
    rng = np.random.default_rng(3)
    k = metric_power(1.2)
    pts = rng.normal(size=(10, 2))
    w_big = rng.uniform(0.5, 1.0, size=10)
    w_small = w_big * rng.uniform(0.0, 1.0, size=10)
    mu = DiscreteMeasure.from_atoms(pts, w_big)
    nu = DiscreteMeasure.from_atoms(pts, w_small)
    probes = rng.normal(size=(40, 2))
    assert np.all(potential_field(k, nu, probes) <= potential_field(k, mu, probes) + 1e-12)


def test_finite_off_support():
    # G mu < inf away from the atoms, for probes separated from all of them
    rng = np.random.default_rng(4)
    k = riesz(2, 3)
    mu = DiscreteMeasure.from_atoms(rng.normal(size=(15, 3)), rng.uniform(size=15))
    probes = rng.normal(size=(20, 3)) + np.array([10.0, 0.0, 0.0])
    vals = potential_field(k, mu, probes)
    assert np.all(np.isfinite(vals))
    # and the quantitative bound mass * sup-kernel-at-separation
    from potlab.measures import min_distance_to_atoms
    sep = min_distance_to_atoms(mu, probes)
    bound = mass(mu) * sep ** (-k.gamma)
    assert np.all(vals <= bound + 1e-12)


def test_capped_potential_is_finite_and_below_raw():
    k = metric_power(1.0, cap=100.0)
    mu = DiscreteMeasure.dirac([0.0], 2.0)
    raw = potential(k, mu, [0.0])
    capped = potential(k, mu, [0.0], cap=k.cap)
    assert math.isinf(raw)
    assert capped == pytest.approx(200.0)


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    mu = DiscreteMeasure.from_atoms(rng.normal(size=(7, 2)), rng.uniform(size=7))
    path = tmp_path / "mu.csv"
    save_measure_csv(mu, path)
    back = load_measure_csv(path)
    assert np.array_equal(back.points, mu.points)
    assert np.array_equal(back.weights, mu.weights)
    header = path.read_text().splitlines()[0]
    assert header == "x1,x2,weight"


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(InputError):
        load_measure_csv(path)
