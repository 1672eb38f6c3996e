"""Capacity estimation as a finite covering LP, and small-mass witnesses.

The estimate of c*(A) discretizes "inf ||mu|| with G mu >= 1 on A" over a
target sample of A (constraints) and candidate atom sites (variables);
kernel values are capped at KernelSpec.cap so the LP is finite. The LP is
solved through its packing dual (see simplex.py); an exact vertex-
enumeration oracle is provided for the dual-route cross-check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, InputError
from .kernels import KernelSpec, capped_kernel_matrix
from .measures import DiscreteMeasure, mass
from .simplex import solve_packing_lp

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    optimal_measure: DiscreteMeasure
    constraint_gap: float  # min over constraint points of G mu - 1
    iterations: int


def capacity_matrix(k: KernelSpec, target, support) -> np.ndarray:
    """Capped kernel matrix G(x_i, y_j) wedge cap; rows targets, cols sites."""
    target = np.atleast_2d(np.asarray(target, dtype=float))
    support = np.atleast_2d(np.asarray(support, dtype=float))
    if target.shape[0] == 0 or support.shape[0] == 0:
        raise InputError("capacity needs nonempty target and support")
    return capped_kernel_matrix(k, target, support)


_LP_MEMO: dict = {}


def _memo_key(k: KernelSpec, target: np.ndarray, support: np.ndarray):
    if k.profile is not None:
        return None  # custom profiles are not hashable by value
    return (k.family, k.gamma, k.cap, k.scale, k.alpha, k.n_dim,
            target.shape, target.tobytes(), support.shape, support.tobytes())


def capacity_lp(k: KernelSpec, target, support,
                tol: float = DEFAULT_TOL) -> CapacityEstimate:
    """min sum w_j  s.t.  sum_j w_j G(x_i,y_j) >= 1 for every target x_i, w >= 0.

    All capped kernel values are > 0, so the LP is always feasible; the
    packing dual max 1.l, K^T l <= 1, l >= 0 starts from its slack basis and
    the optimal weights are the reduced costs of the dual slack columns.
    Identical instances are memoized (solves are deterministic).
    """
    target = np.atleast_2d(np.asarray(target, dtype=float))
    support = np.atleast_2d(np.asarray(support, dtype=float))
    key = _memo_key(k, target, support)
    if key is not None and key in _LP_MEMO:
        return _LP_MEMO[key]
    est = _capacity_lp_uncached(k, target, support, tol)
    if key is not None:
        if len(_LP_MEMO) > 256:
            _LP_MEMO.clear()
        _LP_MEMO[key] = est
    return est


def _capacity_lp_uncached(k: KernelSpec, target: np.ndarray, support: np.ndarray,
                          tol: float) -> CapacityEstimate:
    kmat = capacity_matrix(k, target, support)
    sol = solve_packing_lp(kmat.T, np.ones(kmat.shape[1]), np.ones(kmat.shape[0]))
    w = np.maximum(sol.slack_costs, 0.0)
    gap = float(np.min(kmat @ w) - 1.0)
    if gap < -1e-6:
        raise BudgetError(
            f"LP certificate violated: min G mu - 1 = {gap}", stage="capacity_lp")
    measure = DiscreteMeasure.from_atoms(support, w)
    return CapacityEstimate(
        value=float(sol.value),
        optimal_measure=measure,
        constraint_gap=gap,
        iterations=sol.iterations,
    )


def brute_force_capacity(kmat: np.ndarray, tol: float = 1e-9) -> float:
    """Exact oracle by basic-solution enumeration (small instances only).

    Every vertex of {w >= 0 : K w >= 1} solves K[I,J] w_J = 1 for some
    row/column subsets of equal size; enumerate them all and keep the
    feasible minimum-mass one. Independent of the simplex path.
    """
    kmat = np.asarray(kmat, dtype=float)
    m, n = kmat.shape
    if max(m, n) > 10:
        raise InputError("brute-force oracle is for instances with <= 10 rows/cols")
    best = np.inf
    for size in range(1, min(m, n) + 1):
        for cols in itertools.combinations(range(n), size):
            sub = kmat[:, cols]
            for rows in itertools.combinations(range(m), size):
                square = sub[list(rows), :]
                try:
                    w_sub = np.linalg.solve(square, np.ones(size))
                except np.linalg.LinAlgError:
                    continue
                if np.any(w_sub < -tol):
                    continue
                w = np.zeros(n)
                w[list(cols)] = np.maximum(w_sub, 0.0)
                if np.min(kmat @ w) >= 1.0 - 1e-7:
                    best = min(best, float(np.sum(w)))
    return best


def witness_from_capacity(k: KernelSpec, target, support, t_level: float,
                          tol: float = DEFAULT_TOL) -> tuple[DiscreteMeasure, CapacityEstimate]:
    """T times the optimal capacity measure: G mu >= T(1 - tol) on the target,
    mass exactly T * c_est."""
    if t_level <= 0:
        raise InputError(f"witness level must be > 0, got {t_level}")
    est = capacity_lp(k, target, support, tol=tol)
    scaled = DiscreteMeasure.from_atoms(
        est.optimal_measure.points, est.optimal_measure.weights * t_level)
    return scaled, est


@dataclass(frozen=True)
class SeriesLevel:
    level: int
    t_level: float
    level_mass: float
    budget: float


def null_capacity_series(k: KernelSpec, target, support, depth: int,
                         tol: float = DEFAULT_TOL) -> tuple[DiscreteMeasure, list[SeriesLevel]]:
    """Sum of per-level witnesses mu_n (level n targets potential n, mass < 2^-n).

    Returns mu^(M) = sum_{n<=M} mu_n with capped potential >= sum_{n<=M} n*(1-tol)
    on the target and mass <= 1 - 2^-M, or raises BudgetError naming the first
    level whose 2^-n budget fails (the target is not capacity-null at this
    cap/resolution).
    """
    if depth < 0:
        raise InputError("series depth must be >= 0")
    target = np.atleast_2d(np.asarray(target, dtype=float))
    support = np.atleast_2d(np.asarray(support, dtype=float))
    if depth == 0:
        return DiscreteMeasure.zero(target.shape[1]), []
    est = capacity_lp(k, target, support, tol=tol)
    levels = []
    total_factor = 0.0
    for n in range(1, depth + 1):
        level_mass = n * est.value
        budget = 2.0 ** (-n)
        if level_mass >= budget:
            raise BudgetError(
                f"target not capacity-null at cap/resolution: level {n} needs "
                f"mass {level_mass} >= budget {budget}",
                stage="null_capacity_series",
                detail={"level": n, "achieved_mass": level_mass, "budget": budget},
            )
        levels.append(SeriesLevel(n, float(n), level_mass, budget))
        total_factor += n
    series = DiscreteMeasure.from_atoms(
        est.optimal_measure.points, est.optimal_measure.weights * total_factor)
    return series, levels
