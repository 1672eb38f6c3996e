import numpy as np
import pytest

from potlab.errors import BudgetError, InputError
from potlab.simplex import solve_packing_lp


def test_simple_bounded_lp():
    # max x + y s.t. x <= 2, y <= 3, x + y <= 4: optimum 4 at a vertex
    a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = np.array([2.0, 3.0, 4.0])
    c = np.array([1.0, 1.0])
    sol = solve_packing_lp(a, b, c)
    assert sol.value == pytest.approx(4.0)
    assert sol.x.sum() == pytest.approx(4.0)
    assert np.all(a @ sol.x <= b + 1e-12)


def test_beale_cycling_instance_terminates():
    # Beale's classic example cycles under the largest-coefficient rule;
    # Bland's rule must terminate at the optimum 0.05, attained at
    # x = (1/25, 0, 1, 0): objective 0.75/25 + 0.02 = 0.05, constraints
    # (0.01 - 0.04, 0.02 - 0.02, 1) <= (0, 0, 1).
    a = np.array([
        [0.25, -60.0, -1.0 / 25.0, 9.0],
        [0.50, -90.0, -1.0 / 50.0, 3.0],
        [0.00, 0.0, 1.0, 0.0],
    ])
    b = np.array([0.0, 0.0, 1.0])
    c = np.array([0.75, -150.0, 0.02, -6.0])
    sol = solve_packing_lp(a, b, c)
    assert sol.value == pytest.approx(0.05, abs=1e-12)
    assert np.all(a @ sol.x <= b + 1e-12)


def test_unbounded_detected():
    a = np.array([[-1.0]])
    b = np.array([1.0])
    c = np.array([1.0])
    with pytest.raises(BudgetError, match="unbounded"):
        solve_packing_lp(a, b, c)


def test_negative_rhs_rejected():
    with pytest.raises(InputError):
        solve_packing_lp(np.eye(2), np.array([1.0, -1.0]), np.ones(2))


def test_nonfinite_rejected():
    a = np.array([[np.inf]])
    with pytest.raises(InputError):
        solve_packing_lp(a, np.ones(1), np.ones(1))


def test_slack_costs_are_dual_optimal():
    # covering duality: min 1.w, K w >= 1 equals max 1.l, K^T l <= 1, and the
    # slack reduced costs of the dual tableau solve the covering problem
    rng = np.random.default_rng(0)
    kmat = rng.uniform(0.5, 2.0, size=(3, 4))
    sol = solve_packing_lp(kmat.T, np.ones(4), np.ones(3))
    w = sol.slack_costs
    assert np.all(w >= -1e-12)
    assert np.min(kmat @ w) >= 1.0 - 1e-9
    assert np.sum(w) == pytest.approx(sol.value, abs=1e-9)
