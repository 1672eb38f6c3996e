"""Finite discrete measures, their potentials, and measure algebra.

Every measure in the package is a finite list of (point, weight >= 0) atoms.
Atoms are kept in canonical lexicographic order and merged below MERGE_TOL,
so floating-point reductions always run in a fixed order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .kernels import MERGE_TOL, KernelSpec, kernel_matrix, pairwise_distances


def _canonical(points: np.ndarray, weights: np.ndarray):
    """Sort atoms lexicographically, merge near-duplicates, drop zero weights."""
    if points.shape[0] == 0:
        return points, weights
    order = np.lexsort(tuple(points[:, c] for c in range(points.shape[1] - 1, -1, -1)))
    points, weights = points[order], weights[order]
    keep_pts, keep_wts = [points[0]], [weights[0]]
    for p, w in zip(points[1:], weights[1:]):
        if np.linalg.norm(p - keep_pts[-1]) <= MERGE_TOL:
            keep_wts[-1] = keep_wts[-1] + w
        else:
            keep_pts.append(p)
            keep_wts.append(w)
    pts = np.array(keep_pts, dtype=float)
    wts = np.array(keep_wts, dtype=float)
    nz = wts > 0.0
    return pts[nz], wts[nz]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms (point, weight); immutable value."""

    points: np.ndarray  # (n_atoms, dim)
    weights: np.ndarray  # (n_atoms,)

    @staticmethod
    def from_atoms(points, weights, dim: int | None = None) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        wts = np.asarray(weights, dtype=float).reshape(-1)
        if pts.shape[0] != wts.shape[0]:
            raise InputError("points and weights length mismatch")
        if pts.size and not np.all(np.isfinite(pts)):
            raise InputError("atom coordinates must be finite")
        if np.any(wts < 0):
            raise InputError("atom weights must be >= 0")
        if dim is not None and pts.size and pts.shape[1] != dim:
            raise InputError(f"atom dimension {pts.shape[1]} != {dim}")
        pts, wts = _canonical(pts, wts)
        return DiscreteMeasure(pts, wts)

    @staticmethod
    def zero(dim: int) -> "DiscreteMeasure":
        return DiscreteMeasure(np.zeros((0, dim)), np.zeros(0))

    @staticmethod
    def dirac(point, weight: float = 1.0) -> "DiscreteMeasure":
        p = np.asarray(point, dtype=float).reshape(1, -1)
        return DiscreteMeasure.from_atoms(p, [weight])

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __iter__(self):
        return zip(self.points, self.weights)


def mass(mu: DiscreteMeasure) -> float:
    return float(np.sum(mu.weights))


def scale(mu: DiscreteMeasure, c: float) -> DiscreteMeasure:
    if c < 0:
        raise InputError(f"scale factor must be >= 0, got {c}")
    if c == 0 or mu.n_atoms == 0:
        return DiscreteMeasure.zero(mu.points.shape[1])
    return DiscreteMeasure.from_atoms(mu.points, mu.weights * c)


def add(mu: DiscreteMeasure, nu: DiscreteMeasure) -> DiscreteMeasure:
    if mu.n_atoms == 0:
        return nu
    if nu.n_atoms == 0:
        return mu
    if mu.dim != nu.dim:
        raise InputError("cannot add measures of different dimensions")
    pts = np.vstack([mu.points, nu.points])
    wts = np.concatenate([mu.weights, nu.weights])
    return DiscreteMeasure.from_atoms(pts, wts)


def sum_measures(measures, dim: int) -> DiscreteMeasure:
    live = [m for m in measures if m.n_atoms]
    if not live:
        return DiscreteMeasure.zero(dim)
    pts = np.vstack([m.points for m in live])
    wts = np.concatenate([m.weights for m in live])
    return DiscreteMeasure.from_atoms(pts, wts)


def restrict(mu: DiscreteMeasure, member) -> DiscreteMeasure:
    """Keep atoms whose points satisfy the membership oracle.

    `member` is a SetSpec-like object with contains_many(points) -> bool array,
    or a callable point -> bool.
    """
    if mu.n_atoms == 0:
        return mu
    if hasattr(member, "contains_many"):
        keep = np.asarray(member.contains_many(mu.points), dtype=bool)
    else:
        keep = np.array([bool(member(p)) for p in mu.points])
    return DiscreteMeasure(mu.points[keep], mu.weights[keep])


def potential_field(k: KernelSpec, mu: DiscreteMeasure, probes,
                    cap: float | None = None) -> np.ndarray:
    """G mu at each probe, extended arithmetic (inf on atoms of positive weight).

    With cap set, every kernel value is truncated at cap first (the finite
    surrogate used in reports and LP-side checks).
    """
    pts = np.asarray(probes, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if mu.n_atoms == 0:
        return np.zeros(pts.shape[0])
    g = kernel_matrix(k, pts, mu.points)
    if cap is not None:
        g = np.minimum(g, cap)
    return np.sum(g * mu.weights[None, :], axis=1)


def potential(k: KernelSpec, mu: DiscreteMeasure, x, cap: float | None = None) -> float:
    """G mu(x) = sum_i w_i G(x, y_i); +inf iff x is an atom with positive weight."""
    p = np.asarray(x, dtype=float).reshape(1, -1)
    return float(potential_field(k, mu, p, cap=cap)[0])


def min_distance_to_atoms(mu: DiscreteMeasure, probes) -> np.ndarray:
    pts = np.asarray(probes, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if mu.n_atoms == 0:
        return np.full(pts.shape[0], np.inf)
    return pairwise_distances(pts, mu.points).min(axis=1)


def atomwise_leq(nu: DiscreteMeasure, mu: DiscreteMeasure, tol: float = 0.0) -> bool:
    """True if nu <= mu atomwise (every nu-atom matched by a mu-atom of >= weight)."""
    for p, w in nu:
        if mu.n_atoms == 0:
            return False
        d = np.linalg.norm(mu.points - p[None, :], axis=1)
        j = int(np.argmin(d))
        if d[j] > MERGE_TOL or mu.weights[j] < w - tol:
            return False
    return True


# --- CSV interfaces -------------------------------------------------------

def save_measure_csv(mu: DiscreteMeasure, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"x{i + 1}" for i in range(mu.dim)] + ["weight"])
        for p, wt in mu:
            w.writerow([repr(float(c)) for c in p] + [repr(float(wt))])


def load_measure_csv(path) -> DiscreteMeasure:
    path = Path(path)
    with path.open() as f:
        rows = list(csv.reader(f))
    if not rows or not rows[0] or rows[0][-1] != "weight":
        raise InputError(f"{path}: expected header x1,...,xN,weight")
    dim = len(rows[0]) - 1
    pts, wts = [], []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise InputError(f"{path}:{i}: expected {dim + 1} fields")
        try:
            pts.append([float(v) for v in row[:dim]])
            wts.append(float(row[dim]))
        except ValueError as e:
            raise InputError(f"{path}:{i}: {e}") from e
    if not pts:
        return DiscreteMeasure.zero(dim)
    return DiscreteMeasure.from_atoms(pts, wts)


def save_potential_csv(probes: np.ndarray, values: np.ndarray, path) -> None:
    probes = np.atleast_2d(probes)
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"x{i + 1}" for i in range(probes.shape[1])] + ["value"])
        for p, v in zip(probes, values):
            sval = "inf" if np.isinf(v) else repr(float(v))
            w.writerow([repr(float(c)) for c in p] + [sval])
