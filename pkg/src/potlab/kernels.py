"""Kernel families, the quasi-metric they induce, and finite metrization.

A kernel G(x,y) is positive, symmetric, and +inf exactly on the diagonal.
The quasi-metric is rho = 1/G + 1/G~; fixing gamma >= 2*log2(C) for the
empirical triangle constant C, the chain construction (all-pairs shortest
paths over edge weights rho^(1/gamma)) produces a genuine metric d with
G comparable to d^(-gamma) on the sampled cloud.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import InputError

# Points closer than this are treated as identical (kernel value +inf).
MERGE_TOL = 1e-12


def as_point(x, dim: int | None = None) -> np.ndarray:
    p = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(p)):
        raise InputError(f"point has non-finite coordinates: {x!r}")
    if dim is not None and p.shape[0] != dim:
        raise InputError(f"point dimension {p.shape[0]} != scenario dimension {dim}")
    return p


def as_cloud(points, dim: int | None = None) -> np.ndarray:
    """Validate a finite point cloud: shape (n, N), pairwise distinct."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if not np.all(np.isfinite(arr)):
        raise InputError("cloud has non-finite coordinates")
    if dim is not None and arr.shape[1] != dim:
        raise InputError(f"cloud dimension {arr.shape[1]} != scenario dimension {dim}")
    d = pairwise_distances(arr, arr)
    np.fill_diagonal(d, np.inf)
    if d.min(initial=np.inf) <= MERGE_TOL:
        i, j = np.unravel_index(int(np.argmin(d)), d.shape)
        raise InputError(f"duplicate points in cloud at indices {i}, {j}")
    return arr


def pairwise_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix, shape (len(x), len(y))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its comparability exponent and LP cap.

    gamma is the exponent for which G ~ d^(-gamma); cap is the finite value
    substituted for G(x,x)=inf in linear programs only. scale multiplies G
    (used by the capacity scaling-law checks).
    """

    family: str
    gamma: float
    cap: float = 1e6
    scale: float = 1.0
    alpha: float = 0.0
    n_dim: int = 0
    profile: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.gamma <= 0:
            raise InputError(f"gamma must be > 0, got {self.gamma}")
        if self.cap <= 0:
            raise InputError(f"cap must be > 0, got {self.cap}")
        if self.scale <= 0:
            raise InputError(f"scale must be > 0, got {self.scale}")

    def scaled(self, c: float) -> "KernelSpec":
        return replace(self, scale=self.scale * c)


def riesz(alpha: float, n_dim: int, cap: float = 1e6) -> KernelSpec:
    """Riesz kernel |x-y|^(alpha-N) on R^N; requires 0 < alpha < N."""
    if not 0 < alpha < n_dim:
        raise InputError(f"riesz requires 0 < alpha < N, got alpha={alpha}, N={n_dim}")
    return KernelSpec(family="riesz", gamma=float(n_dim - alpha), cap=cap,
                      alpha=float(alpha), n_dim=int(n_dim))


def metric_power(gamma: float, cap: float = 1e6) -> KernelSpec:
    """G = |x-y|^(-gamma)."""
    return KernelSpec(family="metric_power", gamma=float(gamma), cap=cap)


def log2d(cap: float = 1e6, gamma: float = 2.0) -> KernelSpec:
    """G = log(2/|x-y|); valid on clouds of diameter <= 1/2."""
    return KernelSpec(family="log2d", gamma=float(gamma), cap=cap)


def custom(profile: Callable[[np.ndarray], np.ndarray], gamma: float,
           cap: float = 1e6, name: str = "custom") -> KernelSpec:
    """Kernel g(d0) from a decreasing radial profile g of Euclidean distance."""
    return KernelSpec(family=name, gamma=float(gamma), cap=cap, profile=profile)


def kernel_profile(k: KernelSpec, r: np.ndarray) -> np.ndarray:
    """Evaluate G on an array of Euclidean distances; +inf below MERGE_TOL."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    tiny = r <= MERGE_TOL
    safe = np.where(tiny, 1.0, r)
    if k.family in ("riesz", "metric_power"):
        out = safe ** (-k.gamma)
    elif k.family == "log2d":
        out = np.log(2.0 / safe)
    elif k.profile is not None:
        out = np.asarray(k.profile(safe), dtype=float)
    else:
        raise InputError(f"unknown kernel family {k.family!r}")
    out = out * k.scale
    out = np.where(tiny, np.inf, out)
    return out


def eval_kernel(k: KernelSpec, x, y, dim: int | None = None) -> float:
    """G(x,y) in extended arithmetic: +inf iff x == y (within MERGE_TOL)."""
    px, py = as_point(x, dim), as_point(y, dim)
    if px.shape != py.shape:
        raise InputError(f"dimension mismatch: {px.shape[0]} vs {py.shape[0]}")
    r = float(np.linalg.norm(px - py))
    return float(kernel_profile(k, np.array([r]))[0])


def kernel_matrix(k: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """G(x_i, y_j) matrix in extended arithmetic."""
    return kernel_profile(k, pairwise_distances(x, y))


def capped_kernel_matrix(k: KernelSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """G wedge cap: the finite surrogate used for LP rows and report tables."""
    return np.minimum(kernel_matrix(k, x, y), k.cap)


def quasimetric(k: KernelSpec, x, y) -> float:
    """rho(x,y) = 1/G(x,y) + 1/G(y,x); zero exactly on the diagonal."""
    g_xy = eval_kernel(k, x, y)
    g_yx = eval_kernel(k, y, x)
    return (0.0 if math.isinf(g_xy) else 1.0 / g_xy) + (
        0.0 if math.isinf(g_yx) else 1.0 / g_yx
    )


def quasimetric_matrix(k: KernelSpec, cloud: np.ndarray) -> np.ndarray:
    g = kernel_matrix(k, cloud, cloud)
    inv = np.where(np.isinf(g), 0.0, 1.0 / g)
    return inv + inv.T


@dataclass(frozen=True)
class TriangleReport:
    """Empirical triangle-property certificate on a sampled cloud."""

    constant_c: float
    worst_triple: tuple[np.ndarray, np.ndarray, np.ndarray]
    gamma_min: float
    n_points: int
    worst_indices: tuple[int, int, int] = (0, 1, 2)


def triangle_constant(k: KernelSpec, cloud) -> TriangleReport:
    """Exhaustive scan of min(G(x,z), G(y,z)) / G(x,y) over ordered distinct triples.

    The certificate holds for the sampled cloud only; nothing is claimed
    for the ambient space.
    """
    pts = as_cloud(cloud)
    n = pts.shape[0]
    if n < 3:
        raise InputError(f"triangle_constant needs >= 3 points, got {n}")
    g = kernel_matrix(k, pts, pts)
    best = -np.inf
    best_idx = (0, 1, 2)
    for z in range(n):
        col = g[:, z]
        m = np.minimum(col[:, None], col[None, :])  # min(G(x,z), G(y,z))
        with np.errstate(invalid="ignore"):
            ratio = m / g
        ratio[np.arange(n), np.arange(n)] = -np.inf  # x == y
        ratio[z, :] = -np.inf  # x == z
        ratio[:, z] = -np.inf  # y == z
        flat = int(np.argmax(ratio))
        val = float(ratio.flat[flat])
        if val > best:
            best = val
            i, j = np.unravel_index(flat, ratio.shape)
            best_idx = (int(i), int(j), z)
    const = max(best, 1.0)
    return TriangleReport(
        constant_c=const,
        worst_triple=(pts[best_idx[0]], pts[best_idx[1]], pts[best_idx[2]]),
        gamma_min=2.0 * math.log2(const),
        n_points=n,
        worst_indices=best_idx,
    )


def chain_metric(k: KernelSpec, cloud, gamma: float,
                 gamma_min: float | None = None) -> np.ndarray:
    """Shortest-path metrization of rho^(1/gamma) on the complete cloud graph.

    On a finite cloud the chain infimum over in-cloud chains is exactly the
    all-pairs shortest path, so the output satisfies the triangle inequality
    by construction. Warns (does not fail) if gamma < 2*log2(C); pass the
    cloud's certified gamma_min to skip the internal triangle scan.
    """
    import warnings

    pts = as_cloud(cloud)
    if gamma <= 0:
        raise InputError(f"gamma must be > 0, got {gamma}")
    if gamma_min is None and pts.shape[0] >= 3:
        gamma_min = triangle_constant(k, pts).gamma_min
    if gamma_min is not None and gamma < gamma_min - 1e-12:
        warnings.warn(
            f"gamma={gamma} below certified 2*log2(C)={gamma_min}; "
            "comparability may fail", stacklevel=2)
    rho = quasimetric_matrix(k, pts)
    d = rho ** (1.0 / gamma)
    np.fill_diagonal(d, 0.0)
    n = pts.shape[0]
    for via in range(n):  # Floyd-Warshall
        d = np.minimum(d, d[:, via][:, None] + d[via, :][None, :])
    return d


def comparability_check(k: KernelSpec, cloud, d: np.ndarray, gamma: float) -> float:
    """Smallest C' >= 1 with C'^-1 d^-gamma <= G <= C' d^-gamma over all pairs."""
    pts = as_cloud(cloud)
    n = pts.shape[0]
    g = kernel_matrix(k, pts, pts)
    iu = np.triu_indices(n, k=1)
    prod = g[iu] * d[iu] ** gamma  # G / d^-gamma
    if not np.all(np.isfinite(prod)) or np.any(prod <= 0):
        raise InputError("non-finite comparability ratio; duplicate points?")
    return float(max(prod.max(), (1.0 / prod).max(), 1.0))


def triangle_violations(d: np.ndarray, rel_tol: float = 1e-12) -> int:
    """Count ordered triples violating d(i,j) <= d(i,k) + d(k,j) beyond rel_tol."""
    via = np.min(d[:, :, None] + d[None, :, :], axis=1)  # min_k d[i,k]+d[k,j]
    slack = rel_tol * np.maximum(d, 1.0)
    return int(np.sum(d > via + slack))
