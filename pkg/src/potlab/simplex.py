"""Self-contained dense simplex for packing LPs.

Solves max c.x subject to A x <= b, x >= 0 with b >= 0, so the slack basis
is immediately feasible and no Phase-1 is needed. Bland's rule (smallest
eligible index for both entering and leaving choices) makes the pivot
sequence deterministic and cycle-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, InputError

PIVOT_TOL = 1e-11


@dataclass(frozen=True)
class LpSolution:
    value: float
    x: np.ndarray          # primal variables of the packing LP
    slack_costs: np.ndarray  # reduced costs of the slack columns at optimum
    iterations: int


def solve_packing_lp(a: np.ndarray, b: np.ndarray, c: np.ndarray,
                     max_iter: int = 200_000) -> LpSolution:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    m, n = a.shape
    if b.shape[0] != m or c.shape[0] != n:
        raise InputError("LP dimensions inconsistent")
    if np.any(b < 0):
        raise InputError("packing form needs b >= 0")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise InputError("LP data must be finite (cap kernel values first)")

    # tableau: [A | I | b] over rows, objective row [-c | 0 | 0]
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n:n + m] = np.eye(m)
    t[:m, -1] = b
    t[m, :n] = -c
    basis = list(range(n, n + m))
    trace: list[tuple[int, int]] = []

    for it in range(1, max_iter + 1):
        obj = t[m, :-1]
        entering = -1
        for j in range(n + m):  # Bland: first improving column
            if obj[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            x = np.zeros(n + m)
            for i, bv in enumerate(basis):
                x[bv] = t[i, -1]
            return LpSolution(
                value=float(t[m, -1]),
                x=x[:n],
                slack_costs=t[m, n:n + m].copy(),
                iterations=it - 1,
            )
        col = t[:m, entering]
        pos = col > PIVOT_TOL
        if not np.any(pos):
            raise BudgetError("LP unbounded (no admissible pivot row)",
                              stage="simplex")
        ratios = np.where(pos, t[:m, -1] / np.where(pos, col, 1.0), np.inf)
        best = ratios.min()
        leaving = -1
        for i in range(m):  # Bland: among ties, smallest basis variable
            if pos[i] and ratios[i] <= best + PIVOT_TOL * max(1.0, best):
                if leaving < 0 or basis[i] < basis[leaving]:
                    leaving = i
        trace.append((entering, basis[leaving]))
        piv = t[leaving, entering]
        t[leaving, :] /= piv
        for i in range(m + 1):
            if i != leaving and t[i, entering] != 0.0:
                t[i, :] -= t[i, entering] * t[leaving, :]
        basis[leaving] = entering

    raise BudgetError(
        f"simplex did not converge in {max_iter} iterations; "
        f"last pivots (entering, leaving): {trace[-20:]}",
        stage="simplex",
        detail={"iterations": max_iter, "trace_tail": trace[-20:]},
    )
