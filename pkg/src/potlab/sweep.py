"""Shell sweeping: move mass onto a closed set at a controlled potential loss.

An off-set measure is split over shells S(A,r) = {M r <= dist(A,y) < (M+1) r},
r = ((M+1)/M)^k; within a shell every atom is assigned to a nearby sample
point of A and its mass relocated there. For any x in A and atom y assigned
to center c, |x - c| <= |x - y| + |y - c| < (1 + (M+2)/M) |x - y|, which for
the default M = 3 gives the factor (8/3) < 3 and hence the guarantee
G nu >= 3^-gamma G mu on A for kernels comparable to d^-gamma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, InputError
from .kernels import MERGE_TOL, KernelSpec, pairwise_distances
from .measures import DiscreteMeasure, potential_field, restrict, sum_measures
from .sets import SetSpec, density_check, shell_index


@dataclass(frozen=True)
class Assignment:
    atom: np.ndarray
    weight: float
    center: np.ndarray
    shell_k: int
    shell_r: float


@dataclass(frozen=True)
class ShellBlock:
    center: np.ndarray
    measure: DiscreteMeasure


@dataclass(frozen=True)
class ShellPartition:
    shell_radius: float
    base: float
    blocks: tuple[ShellBlock, ...]


def guaranteed_factor(base: float, gamma: float) -> float:
    """Certified sweep factor ((2M+2)/M)^-gamma from the assignment chain."""
    return ((2.0 * base + 2.0) / base) ** (-gamma)


def _first_cover_assignment(atoms: np.ndarray, centers: np.ndarray,
                            radius: float, what: str) -> np.ndarray:
    """Index of the first (lexicographic) center within radius of each atom."""
    order = np.lexsort(tuple(centers[:, c] for c in range(centers.shape[1] - 1, -1, -1)))
    centers_sorted = centers[order]
    close = pairwise_distances(atoms, centers_sorted) < radius
    covered = close.any(axis=1)
    if not covered.all():
        bad = atoms[int(np.argmin(covered))]
        raise InputError(
            f"{what}: no admissible center within {radius} of atom "
            f"{bad.tolist()} (density violated)")
    return order[np.argmax(close, axis=1)]


def shell_partition(k: KernelSpec, a_set: SetSpec, a0_points, mu: DiscreteMeasure,
                    r: float, base: float = 3.0) -> ShellPartition:
    """Partition a measure supported in S(A,r) into blocks near A0 centers.

    Each atom goes to the first center in lexicographic order within
    (M+2) r; one exists whenever A0 is r-dense in A, since dist(A,y) < (M+1)r.
    """
    a0 = np.atleast_2d(np.asarray(a0_points, dtype=float))
    if mu.n_atoms == 0:
        return ShellPartition(shell_radius=r, base=base, blocks=())
    dist = a_set.distance_many(mu.points)
    lo, hi = base * r, (base + 1.0) * r
    slack = 1e-9 * r
    ok = (dist >= lo - slack) & (dist < hi + slack)
    if not ok.all():
        bad = mu.points[int(np.argmin(ok))]
        raise InputError(
            f"shell_partition: atom {bad.tolist()} outside shell "
            f"[{lo}, {hi}) of radius {r}")
    idx = _first_cover_assignment(mu.points, a0, (base + 2.0) * r, "shell_partition")
    blocks = []
    for j in sorted(set(int(i) for i in idx)):
        sel = idx == j
        blocks.append(ShellBlock(
            center=a0[j],
            measure=DiscreteMeasure.from_atoms(mu.points[sel], mu.weights[sel])))
    return ShellPartition(shell_radius=r, base=base, blocks=tuple(blocks))


@dataclass(frozen=True)
class SweepResult:
    measure: DiscreteMeasure
    assignments: tuple[Assignment, ...]
    factor_bound: float  # certified ((2M+2)/M)^-gamma


def sweep_off_set(k: KernelSpec, a_set: SetSpec, a0_points, mu: DiscreteMeasure,
                  shell_base: float = 3.0,
                  verify_density: bool = True) -> SweepResult:
    """Shell-by-shell relocation: each block collapses to its center's Dirac.

    Mass is preserved exactly; on A-probes the swept potential dominates
    guaranteed_factor(M, gamma) * G mu, and in particular 3^-gamma * G mu
    for the paper geometry M = 3. With a0_points None, the set's own net at
    the finest shell radius is used (dense by construction).
    """
    if mu.n_atoms == 0:
        return SweepResult(mu, (), guaranteed_factor(shell_base, k.gamma))
    dist = a_set.distance_many(mu.points)
    if np.any(dist <= MERGE_TOL):
        bad = mu.points[int(np.argmax(dist <= MERGE_TOL))]
        raise InputError(
            f"sweep_off_set: atom {bad.tolist()} lies on A (use sweep_to_closed)")
    shells: dict[int, list[int]] = {}
    for i in range(mu.n_atoms):
        kk = shell_index(a_set, mu.points[i], base=shell_base)
        shells.setdefault(kk, []).append(i)
    q = (shell_base + 1.0) / shell_base
    r_min = q ** min(shells)
    if a0_points is None:
        a0_points = a_set.net(r_min)
        verify_density = False
    a0 = np.atleast_2d(np.asarray(a0_points, dtype=float))
    if verify_density:
        coverage = density_check(a0, a_set, r_min)
        bad_shells = [kk for kk in shells if coverage > q ** kk + 1e-12]
        if bad_shells:
            raise InputError(
                f"sweep_off_set: A0 coverage radius {coverage} too coarse for "
                f"shells {sorted(bad_shells)} (finest radius {r_min})")
    assignments: list[Assignment] = []
    parts: list[DiscreteMeasure] = []
    for kk in sorted(shells):
        r = q ** kk
        sel = np.array(shells[kk], dtype=int)
        sub = DiscreteMeasure(mu.points[sel], mu.weights[sel])
        part = shell_partition(k, a_set, a0, sub, r, base=shell_base)
        for block in part.blocks:
            parts.append(DiscreteMeasure.from_atoms(
                block.center.reshape(1, -1),
                [float(np.sum(block.measure.weights))]))
            for p, w in block.measure:
                assignments.append(Assignment(p, float(w), block.center, kk, r))
    nu = sum_measures(parts, dim=mu.dim)
    return SweepResult(nu, tuple(assignments), guaranteed_factor(shell_base, k.gamma))


def sweep_to_closed(k: KernelSpec, a_set: SetSpec, mu: DiscreteMeasure,
                    a0_points=None, shell_base: float = 3.0) -> SweepResult:
    """Keep on-A atoms verbatim and sweep the rest onto A (or its A0 sample)."""
    on_a = restrict(mu, a_set)
    off_sel = ~np.asarray(a_set.contains_many(mu.points), dtype=bool) \
        if mu.n_atoms else np.zeros(0, dtype=bool)
    off_a = DiscreteMeasure(mu.points[off_sel], mu.weights[off_sel]) \
        if mu.n_atoms else mu
    if off_a.n_atoms == 0:
        return SweepResult(mu, (), guaranteed_factor(shell_base, k.gamma))
    if a0_points is None:
        q = (shell_base + 1.0) / shell_base
        ks = [shell_index(a_set, p, base=shell_base) for p in off_a.points]
        a0_points = a_set.net(q ** min(ks))
        verify = False  # a resolution-r net covers the set within r by construction
    else:
        verify = True
    swept = sweep_off_set(k, a_set, a0_points, off_a,
                          shell_base=shell_base, verify_density=verify)
    out = sum_measures([on_a, swept.measure], dim=mu.dim)
    return SweepResult(out, swept.assignments, swept.factor_bound)


def geometric_core_violations(assignments, a_probes) -> int:
    """Count (probe, assignment) pairs violating |x - c| < 3 |x - y|."""
    if not assignments:
        return 0
    probes = np.atleast_2d(np.asarray(a_probes, dtype=float))
    atoms = np.stack([a.atom for a in assignments])
    centers = np.stack([a.center for a in assignments])
    d_atom = pairwise_distances(probes, atoms)
    d_center = pairwise_distances(probes, centers)
    return int(np.sum(d_center >= 3.0 * d_atom))


def sweep_inequality_table(k: KernelSpec, mu: DiscreteMeasure, nu: DiscreteMeasure,
                           a_probes, factor: float) -> dict:
    """Per-probe audit of G nu >= factor * G mu (extended arithmetic)."""
    probes = np.atleast_2d(np.asarray(a_probes, dtype=float))
    g_mu = potential_field(k, mu, probes)
    g_nu = potential_field(k, nu, probes)
    bound = factor * g_mu
    ok = (g_nu >= bound) | np.isinf(g_nu)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(g_mu > 0, g_nu / g_mu, np.inf)
    return {
        "probes": probes,
        "g_mu": g_mu,
        "g_nu": g_nu,
        "ratio": ratio,
        "bound": np.full(len(probes), factor),
        "violations": int(np.sum(~ok)),
    }


# --- approximating measures (Eq.-approx surrogate) -------------------------

def discrete_approximation(k: KernelSpec, mu: DiscreteMeasure, a0_points,
                           n: int) -> DiscreteMeasure:
    """First-cover mass splitting over balls B(x_j, 1/n) with centers in A0.

    Mass is preserved exactly; the approximant is supported on A0.
    """
    if n < 1:
        raise InputError(f"approximation index must be >= 1, got {n}")
    if mu.n_atoms == 0:
        return mu
    a0 = np.atleast_2d(np.asarray(a0_points, dtype=float))
    idx = _first_cover_assignment(mu.points, a0, 1.0 / n, "discrete_approximation")
    parts = []
    for j in sorted(set(int(i) for i in idx)):
        sel = idx == j
        parts.append(DiscreteMeasure.from_atoms(
            a0[j].reshape(1, -1), [float(np.sum(mu.weights[sel]))]))
    return sum_measures(parts, dim=mu.dim)


def refine_until(k: KernelSpec, mu: DiscreteMeasure, phi, probes, a0_points,
                 n_start: int = 1, n_max: int = 4096) -> tuple[int, DiscreteMeasure]:
    """Smallest tested n >= n_start whose approximant keeps G mu^(n) > phi.

    Tests n_start, then doubles; a strict margin over the probe list is the
    finite stand-in for weak*-closeness of the approximants.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    target = phi(probes) if callable(phi) else np.asarray(phi, dtype=float)
    target = np.broadcast_to(np.asarray(target, dtype=float), (probes.shape[0],))
    if n_start < 1 or n_max < n_start:
        raise InputError("need 1 <= n_start <= n_max")
    n = n_start
    worst = -np.inf
    while True:
        approx = discrete_approximation(k, mu, a0_points, n)
        vals = potential_field(k, approx, probes)
        margins = vals - target
        if np.all(margins > 0):
            return n, approx
        worst = float(np.min(margins))
        if n >= n_max:
            break
        n = min(n * 2, n_max)
    raise BudgetError(
        f"refine_until exhausted n_max={n_max}; worst probe margin {worst}",
        stage="refine_until", detail={"worst_margin": worst, "n_max": n_max})
