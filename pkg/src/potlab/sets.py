"""Closed-set, F_sigma, G_delta and exhaustion specs with exact oracles.

Closed primitives carry an exact Euclidean distance oracle; membership is
distance == 0 (within 1e-12). Open specs additionally expose inner_radius,
a 1-Lipschitz certified lower bound on the distance to the complement,
positive exactly on the set. Exhaustion levels are *defined* through
inner_radius margins, which yields exact closed-form separation bounds
between levels (used by the thinning and scattering budgets).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .kernels import pairwise_distances

MEMBER_TOL = 1e-12
MAX_SAMPLE_POINTS = 200_000


def _pts2d(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    return pts


class SetSpec:
    """Base class: a nonempty subset of R^dim with a distance oracle."""

    dim: int
    closed: bool = True

    def distance_many(self, points) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x) -> float:
        return float(self.distance_many(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def contains_many(self, points) -> np.ndarray:
        return self.distance_many(points) <= MEMBER_TOL

    def contains(self, x) -> bool:
        return bool(self.contains_many(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def net(self, resolution: float) -> np.ndarray:
        """A deterministic sample of the set that is resolution-dense in it."""
        raise NotImplementedError(f"{type(self).__name__} has no net sampler")

    def probe_points(self, resolution: float) -> np.ndarray:
        """Canonical deterministic probe set (primitive-specific)."""
        return self.net(resolution)

    def bounding_box(self):
        """(lo, hi) arrays enclosing the set, or None if unbounded."""
        raise NotImplementedError


def distance_to_set(s: SetSpec, x) -> float:
    return s.distance(x)


# --- closed primitives ----------------------------------------------------

@dataclass(frozen=True)
class FinitePoints(SetSpec):
    points: np.ndarray

    def __post_init__(self):
        pts = _pts2d(self.points)
        if pts.shape[0] == 0:
            raise InputError("finite_points set must be nonempty")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dim", pts.shape[1])

    def distance_many(self, points):
        return pairwise_distances(_pts2d(points), self.points).min(axis=1)

    def net(self, resolution):
        return self.points.copy()

    def bounding_box(self):
        return self.points.min(axis=0), self.points.max(axis=0)


@dataclass(frozen=True)
class Ball(SetSpec):
    center: np.ndarray
    radius: float
    closed: bool = True

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if self.radius <= 0:
            raise InputError(f"ball radius must be > 0, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dim", c.shape[0])

    def distance_many(self, points):
        r = np.linalg.norm(_pts2d(points) - self.center[None, :], axis=1)
        return np.maximum(r - self.radius, 0.0)

    def contains_many(self, points):
        r = np.linalg.norm(_pts2d(points) - self.center[None, :], axis=1)
        if self.closed:
            return r <= self.radius + MEMBER_TOL
        return r < self.radius

    def inner_radius_many(self, points):
        # distance to the complement of the open ball (exact)
        r = np.linalg.norm(_pts2d(points) - self.center[None, :], axis=1)
        return self.radius - r

    def net(self, resolution):
        pts = [self.center.reshape(1, -1), self._boundary(resolution)]
        grid = grid_points(*self.bounding_box(), resolution / math.sqrt(self.dim))
        inside = np.linalg.norm(grid - self.center[None, :], axis=1) <= self.radius
        pts.append(grid[inside])
        return np.unique(np.vstack(pts), axis=0)

    def _boundary(self, resolution):
        c, r = self.center, self.radius
        if self.dim == 1:
            return np.array([c - r, c + r]).reshape(2, 1)
        if self.dim == 2:
            m = max(8, int(math.ceil(2 * math.pi * r / resolution)))
            _guard_count(m)
            th = 2 * math.pi * np.arange(m) / m
            return c[None, :] + r * np.stack([np.cos(th), np.sin(th)], axis=1)
        # Fibonacci sphere for dim >= 3 (first 3 coords; rest pinned to center)
        m = max(16, int(math.ceil(4 * math.pi * r * r / resolution ** 2)))
        _guard_count(m)
        i = np.arange(m) + 0.5
        phi = math.pi * (3.0 - math.sqrt(5.0)) * i
        z = 1.0 - 2.0 * i / m
        rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        sph = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
        out = np.tile(c, (m, 1))
        out[:, :3] = c[None, :3] + r * sph
        return out

    def probe_points(self, resolution):
        return np.unique(np.vstack([self.center.reshape(1, -1),
                                    self._boundary(resolution)]), axis=0)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class Box(SetSpec):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise InputError("box requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dim", lo.shape[0])

    def distance_many(self, points):
        pts = _pts2d(points)
        gap = np.maximum(np.maximum(self.lo[None, :] - pts, pts - self.hi[None, :]), 0.0)
        return np.linalg.norm(gap, axis=1)

    def net(self, resolution):
        return grid_points(self.lo, self.hi, resolution / math.sqrt(self.dim),
                           include_ends=True)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()


@dataclass(frozen=True)
class Segment(SetSpec):
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if a.shape != b.shape:
            raise InputError("segment endpoints must share a dimension")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "dim", a.shape[0])

    def distance_many(self, points):
        pts = _pts2d(points)
        ab = self.b - self.a
        denom = float(ab @ ab)
        if denom == 0.0:
            return np.linalg.norm(pts - self.a[None, :], axis=1)
        t = np.clip((pts - self.a[None, :]) @ ab / denom, 0.0, 1.0)
        proj = self.a[None, :] + t[:, None] * ab[None, :]
        return np.linalg.norm(pts - proj, axis=1)

    def net(self, resolution):
        length = float(np.linalg.norm(self.b - self.a))
        m = max(2, int(math.ceil(length / resolution)) + 1)
        _guard_count(m)
        t = np.linspace(0.0, 1.0, m)
        return self.a[None, :] + t[:, None] * (self.b - self.a)[None, :]

    def bounding_box(self):
        lo = np.minimum(self.a, self.b)
        hi = np.maximum(self.a, self.b)
        return lo, hi


def cantor_intervals(level: int) -> np.ndarray:
    """(n, 2) array of the middle-thirds intervals at the given level."""
    if level < 0:
        raise InputError("cantor level must be >= 0")
    iv = np.array([[0.0, 1.0]])
    for _ in range(level):
        third = (iv[:, 1] - iv[:, 0]) / 3.0
        left = np.stack([iv[:, 0], iv[:, 0] + third], axis=1)
        right = np.stack([iv[:, 1] - third, iv[:, 1]], axis=1)
        iv = np.vstack([left, right])
        iv = iv[np.argsort(iv[:, 0])]
    return iv


@dataclass(frozen=True)
class Cantor(SetSpec):
    """Level-L middle-thirds approximant of the Cantor set on [0,1] (dim 1)."""

    level: int
    intervals: np.ndarray = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "intervals", cantor_intervals(self.level))
        object.__setattr__(self, "dim", 1)

    def distance_many(self, points):
        x = _pts2d(points)[:, 0]
        lo, hi = self.intervals[:, 0], self.intervals[:, 1]
        gap = np.maximum(np.maximum(lo[None, :] - x[:, None],
                                    x[:, None] - hi[None, :]), 0.0)
        return gap.min(axis=1)

    def endpoints(self) -> np.ndarray:
        return np.unique(self.intervals.reshape(-1)).reshape(-1, 1)

    def net(self, resolution):
        pts = []
        for lo, hi in self.intervals:
            m = max(2, int(math.ceil((hi - lo) / resolution)) + 1)
            _guard_count(m * len(self.intervals))
            pts.append(np.linspace(lo, hi, m))
        return np.unique(np.concatenate(pts)).reshape(-1, 1)

    def probe_points(self, resolution):
        return self.endpoints()

    def bounding_box(self):
        return np.array([0.0]), np.array([1.0])


@dataclass(frozen=True)
class Union(SetSpec):
    members: tuple

    def __post_init__(self):
        if not self.members:
            raise InputError("union must have at least one member")
        dims = {m.dim for m in self.members}
        if len(dims) != 1:
            raise InputError("union members must share a dimension")
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "dim", dims.pop())

    def distance_many(self, points):
        return np.stack([m.distance_many(points) for m in self.members]).min(axis=0)

    def contains_many(self, points):
        out = np.zeros(_pts2d(points).shape[0], dtype=bool)
        for m in self.members:
            out |= np.asarray(m.contains_many(points), dtype=bool)
        return out

    def net(self, resolution):
        return np.unique(np.vstack([m.net(resolution) for m in self.members]), axis=0)

    def probe_points(self, resolution):
        return np.unique(
            np.vstack([m.probe_points(resolution) for m in self.members]), axis=0)

    def bounding_box(self):
        boxes = [m.bounding_box() for m in self.members]
        return (np.stack([b[0] for b in boxes]).min(axis=0),
                np.stack([b[1] for b in boxes]).max(axis=0))


@dataclass(frozen=True)
class ComplementOfOpen(SetSpec):
    """Closed complement of an open ball or open box (exact oracles)."""

    inner: SetSpec

    def __post_init__(self):
        if not isinstance(self.inner, (Ball, Box)):
            raise InputError("complement_of_open supports balls and boxes only")
        object.__setattr__(self, "dim", self.inner.dim)

    def distance_many(self, points):
        if isinstance(self.inner, Ball):
            r = np.linalg.norm(_pts2d(points) - self.inner.center[None, :], axis=1)
            return np.maximum(self.inner.radius - r, 0.0)
        pts = _pts2d(points)
        inside_gap = np.minimum(pts - self.inner.lo[None, :],
                                self.inner.hi[None, :] - pts)
        depth = inside_gap.min(axis=1)  # negative outside the box
        return np.maximum(depth, 0.0)

    def net(self, resolution):
        raise InputError("complement sets are unbounded; no net sampler")

    def bounding_box(self):
        raise InputError("complement sets are unbounded")


# --- open specs -----------------------------------------------------------

class OpenSet(SetSpec):
    """Open set with a certified 1-Lipschitz inner radius."""

    closed = False

    def inner_radius_many(self, points) -> np.ndarray:
        raise NotImplementedError

    def inner_radius(self, x) -> float:
        return float(self.inner_radius_many(
            np.asarray(x, dtype=float).reshape(1, -1))[0])

    def contains_many(self, points):
        return self.inner_radius_many(points) > 0.0

    def distance_many(self, points):
        # distance to the open set == distance to its closure for these specs
        return np.maximum(-self.inner_radius_many(points), 0.0)


@dataclass(frozen=True)
class OpenBall(OpenSet):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if self.radius <= 0:
            raise InputError("open ball radius must be > 0")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dim", c.shape[0])

    def inner_radius_many(self, points):
        r = np.linalg.norm(_pts2d(points) - self.center[None, :], axis=1)
        return self.radius - r

    def closure(self) -> Ball:
        return Ball(self.center, self.radius, closed=True)

    def net(self, resolution):
        return self.closure().net(resolution)

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class OpenBox(OpenSet):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise InputError("open box requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dim", lo.shape[0])

    def inner_radius_many(self, points):
        pts = _pts2d(points)
        return np.minimum(pts - self.lo[None, :], self.hi[None, :] - pts).min(axis=1)

    def net(self, resolution):
        return Box(self.lo, self.hi).net(resolution)

    def bounding_box(self):
        return self.lo.copy(), self.hi.copy()


@dataclass(frozen=True)
class Neighborhood(OpenSet):
    """Open eps-neighborhood {x : dist(core, x) < eps} of a closed core."""

    core: SetSpec
    eps: float

    def __post_init__(self):
        if self.eps <= 0:
            raise InputError("neighborhood radius must be > 0")
        object.__setattr__(self, "dim", self.core.dim)

    def inner_radius_many(self, points):
        return self.eps - self.core.distance_many(points)

    def net(self, resolution):
        return self.core.net(resolution)

    def bounding_box(self):
        lo, hi = self.core.bounding_box()
        return lo - self.eps, hi + self.eps


@dataclass(frozen=True)
class BallUnion(OpenSet):
    """Finite union of open balls; inner radius is the max of ball depths."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = _pts2d(self.centers)
        r = np.asarray(self.radii, dtype=float).reshape(-1)
        if c.shape[0] != r.shape[0] or c.shape[0] == 0:
            raise InputError("ball union needs matching nonempty centers/radii")
        if np.any(r <= 0):
            raise InputError("ball union radii must be > 0")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "dim", c.shape[1])

    def inner_radius_many(self, points):
        d = pairwise_distances(_pts2d(points), self.centers)
        return (self.radii[None, :] - d).max(axis=1)

    def net(self, resolution):
        return np.unique(np.vstack(
            [Ball(c, r).net(resolution) for c, r in zip(self.centers, self.radii)]
        ), axis=0)

    def bounding_box(self):
        lo = (self.centers - self.radii[:, None]).min(axis=0)
        hi = (self.centers + self.radii[:, None]).max(axis=0)
        return lo, hi


@dataclass(frozen=True)
class WholeSpace(OpenSet):
    dim: int

    def inner_radius_many(self, points):
        return np.full(_pts2d(points).shape[0], np.inf)

    def distance_many(self, points):
        return np.zeros(_pts2d(points).shape[0])

    def bounding_box(self):
        return None


@dataclass(frozen=True)
class OpenIntersection(OpenSet):
    """Intersection of two open specs (inner radius: min of the two bounds)."""

    a: OpenSet
    b: OpenSet

    def __post_init__(self):
        if self.a.dim != self.b.dim:
            raise InputError("intersection members must share a dimension")
        object.__setattr__(self, "dim", self.a.dim)

    def inner_radius_many(self, points):
        return np.minimum(self.a.inner_radius_many(points),
                          self.b.inner_radius_many(points))

    def bounding_box(self):
        box_a, box_b = self.a.bounding_box(), self.b.bounding_box()
        if box_a is None:
            return box_b
        if box_b is None:
            return box_a
        return np.maximum(box_a[0], box_b[0]), np.minimum(box_a[1], box_b[1])


# --- shells ---------------------------------------------------------------

def shell_index(s: SetSpec, y, base: float = 3.0) -> int:
    """Unique k with M*q^k <= dist(s,y) < (M+1)*q^k, q = (M+1)/M, M = base."""
    t = s.distance(y)
    if t <= 0.0:
        raise InputError(f"shell_index: point {np.asarray(y).tolist()} lies in the set")
    m = float(base)
    q = (m + 1.0) / m
    k = math.floor(math.log(t / m) / math.log(q))
    # float-boundary repair: enforce the bracketing exactly
    for _ in range(3):
        if t < m * q ** k:
            k -= 1
        elif t >= (m + 1.0) * q ** k:
            k += 1
        else:
            break
    if not (m * q ** k <= t < (m + 1.0) * q ** k):
        raise InputError(f"shell bracketing failed for distance {t}")
    return int(k)


# --- exhaustions ----------------------------------------------------------

@dataclass(frozen=True)
class MarginLevel(OpenSet):
    """{x in base : inner_radius(x) > margin and |x| < window} (open)."""

    base: OpenSet
    margin: float
    window: float

    def __post_init__(self):
        object.__setattr__(self, "dim", self.base.dim)

    def inner_radius_many(self, points):
        pts = _pts2d(points)
        vals = self.base.inner_radius_many(pts) - self.margin
        if np.isfinite(self.window):
            vals = np.minimum(vals, self.window - np.linalg.norm(pts, axis=1))
        return vals

    def bounding_box(self):
        box = self.base.bounding_box()
        if box is not None:
            return box
        if np.isfinite(self.window):
            w = np.full(self.dim, self.window)
            return -w, w
        return None


@dataclass(frozen=True)
class ExhaustionSpec:
    """Increasing open margin levels V_n with compact closures inside V_{n+1}."""

    base: OpenSet
    margins: tuple  # strictly decreasing, > 0
    windows: tuple  # nondecreasing, may be inf

    def __post_init__(self):
        if len(self.margins) != len(self.windows) or not self.margins:
            raise InputError("exhaustion needs matching nonempty margins/windows")
        m = np.asarray(self.margins)
        w = np.asarray(self.windows)
        if np.any(np.diff(m) >= 0) or np.any(m <= 0):
            raise InputError("exhaustion margins must be strictly decreasing and > 0")
        if np.any(np.diff(w) < 0):
            raise InputError("exhaustion windows must be nondecreasing")

    @property
    def depth(self) -> int:
        return len(self.margins)

    def level(self, n: int) -> MarginLevel:
        """1-indexed level V_n."""
        if not 1 <= n <= self.depth:
            raise InputError(f"exhaustion level {n} out of range 1..{self.depth}")
        return MarginLevel(self.base, self.margins[n - 1], self.windows[n - 1])

    def separation(self, i: int, j: int) -> float:
        """Certified lower bound on d(V_i, complement of V_j), i < j.

        From the 1-Lipschitz inner radius: points of V_i have inner > m_i and
        |x| < w_i; points outside V_j have inner <= m_j or |x| >= w_j.
        """
        if not 1 <= i < j <= self.depth:
            raise InputError(f"separation needs 1 <= i < j <= depth, got {i},{j}")
        m_gap = self.margins[i - 1] - self.margins[j - 1]
        w_i, w_j = self.windows[i - 1], self.windows[j - 1]
        w_gap = np.inf if np.isinf(w_j) else w_j - w_i
        return float(min(m_gap, w_gap)) if w_gap > 0 else float(m_gap)

    def annulus(self, n: int) -> OpenSet:
        """U_n = V_{n+1} minus the closure of V_{n-1} (V_0 empty)."""
        outer = self.level(min(n + 1, self.depth))
        if n <= 1:
            return outer
        return _Annulus(self, n)

    def annulus_separation(self, n: int) -> float:
        """Lower bound on d(U_n, V_{n-2} union complement(V_{n+2}))."""
        seps = []
        if n - 2 >= 1:
            seps.append(self.separation(n - 2, n - 1))
        if n + 2 <= self.depth:
            seps.append(self.separation(n + 1, n + 2))
        return float(min(seps)) if seps else np.inf


@dataclass(frozen=True)
class _Annulus(OpenSet):
    """V_{n+1} minus closure(V_{n-1}) with a certified inner radius."""

    parent: ExhaustionSpec
    n: int

    def __post_init__(self):
        object.__setattr__(self, "dim", self.parent.base.dim)

    def inner_radius_many(self, points):
        pts = _pts2d(points)
        outer = self.parent.level(min(self.n + 1, self.parent.depth))
        vals = outer.inner_radius_many(pts)
        m_prev = self.parent.margins[self.n - 2]
        w_prev = self.parent.windows[self.n - 2]
        gap_margin = m_prev - self.parent.base.inner_radius_many(pts)
        if np.isfinite(w_prev):
            gap_window = np.linalg.norm(pts, axis=1) - w_prev
            gap = np.maximum(gap_margin, gap_window)
        else:
            gap = gap_margin
        return np.minimum(vals, gap)

    def bounding_box(self):
        return self.parent.level(min(self.n + 1, self.parent.depth)).bounding_box()


def standard_exhaustion(u: OpenSet, n_max: int, sample: np.ndarray | None = None) -> ExhaustionSpec:
    """Margins 1/n and windows |x| < n; leading empty levels skipped, reindexed.

    Emptiness is decided on a probe sample of u (the set's net, or the one
    supplied); the compact-inclusion invariant holds by the margin formulas.
    """
    if n_max < 1:
        raise InputError("n_max must be >= 1")
    if sample is None:
        box = u.bounding_box()
        if box is None:
            sample = np.zeros((1, u.dim))
        else:
            sample = grid_points(box[0], box[1], _box_pitch(box, 33))
    inner = u.inner_radius_many(sample)
    norms = np.linalg.norm(_pts2d(sample), axis=1)
    margins, windows = [], []
    for n in range(1, n_max + 1):
        nonempty = bool(np.any((inner > 1.0 / n) & (norms < n)))
        if not margins and not nonempty:
            continue  # skip leading empties, reindex
        margins.append(1.0 / n)
        windows.append(float(n))
    if not margins:
        raise InputError("standard_exhaustion: every level is empty on the sample")
    return ExhaustionSpec(u, tuple(margins), tuple(windows))


def geometric_exhaustion(u: OpenSet, depth: int,
                         sample: np.ndarray | None = None,
                         ratio: float = 0.5) -> ExhaustionSpec:
    """Margins tau*ratio^n with tau from the sampled inner-radius scale.

    Suits small sets (e.g. eps-neighborhood G_delta levels) where 1/n margins
    would push every nonempty level to index ~1/eps.
    """
    if depth < 1:
        raise InputError("depth must be >= 1")
    if not 0 < ratio < 1:
        raise InputError("ratio must be in (0,1)")
    if sample is None:
        box = u.bounding_box()
        if box is None:
            raise InputError("geometric_exhaustion needs a bounded set or a sample")
        sample = grid_points(box[0], box[1], _box_pitch(box, 33))
    inner = u.inner_radius_many(sample)
    top = float(np.max(inner, initial=-np.inf))
    if not np.isfinite(top) or top <= 0:
        raise InputError("geometric_exhaustion: no sample point inside the set")
    tau = top / 2.0
    box = u.bounding_box()
    if box is None:
        windows = tuple(float(2 ** n) for n in range(1, depth + 1))
    else:
        w = float(np.max(np.linalg.norm(
            np.stack([box[0], box[1]]), axis=1))) + 1.0
        windows = tuple(w for _ in range(depth))
    margins = tuple(tau * ratio ** n for n in range(1, depth + 1))
    return ExhaustionSpec(u, margins, windows)


# --- F_sigma / G_delta ----------------------------------------------------

@dataclass(frozen=True)
class FSigmaSpec:
    """Countable union of closed pieces, truncatable at depth m."""

    pieces: tuple

    def __post_init__(self):
        if not self.pieces:
            raise InputError("F_sigma needs at least one piece")
        if any(not p.closed for p in self.pieces):
            raise InputError("F_sigma pieces must be closed")
        dims = {p.dim for p in self.pieces}
        if len(dims) != 1:
            raise InputError("F_sigma pieces must share a dimension")

    @property
    def dim(self):
        return self.pieces[0].dim

    @property
    def depth(self):
        return len(self.pieces)

    def truncate(self, m: int):
        if not 1 <= m <= self.depth:
            raise InputError(f"truncation depth {m} out of range 1..{self.depth}")
        return self.pieces[:m]

    def union(self, m: int | None = None) -> SetSpec:
        pieces = self.pieces if m is None else self.truncate(m)
        return pieces[0] if len(pieces) == 1 else Union(tuple(pieces))


@dataclass(frozen=True)
class GDeltaSpec:
    """Decreasing open eps_m-neighborhoods U_m of a closed core, eps_m -> 0."""

    core: SetSpec
    epsilons: tuple

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise InputError("G_delta epsilons must be strictly decreasing and > 0")
        if not self.core.closed:
            raise InputError("G_delta core must be closed")

    @property
    def dim(self):
        return self.core.dim

    @property
    def depth(self):
        return len(self.epsilons)

    def neighborhood(self, m: int) -> Neighborhood:
        if not 1 <= m <= self.depth:
            raise InputError(f"G_delta level {m} out of range 1..{self.depth}")
        return Neighborhood(self.core, float(self.epsilons[m - 1]))

    def contains_many(self, points):
        return self.core.contains_many(points)


# --- sampling helpers -----------------------------------------------------

def _guard_count(n: int) -> None:
    if n > MAX_SAMPLE_POINTS:
        raise InputError(
            f"sample of {n} points exceeds the desk-scale cap {MAX_SAMPLE_POINTS}")


def _box_pitch(box, target_per_axis: int) -> float:
    span = float(np.max(box[1] - box[0]))
    return max(span / max(target_per_axis - 1, 1), 1e-9)


def grid_points(lo, hi, pitch: float, include_ends: bool = True) -> np.ndarray:
    """Deterministic rectangular grid with spacing <= pitch."""
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    axes = []
    total = 1
    for a, b in zip(lo, hi):
        if b <= a:
            axes.append(np.array([a]))
            continue
        m = max(2, int(math.ceil((b - a) / pitch)) + 1)
        total *= m
        _guard_count(total)
        axes.append(np.linspace(a, b, m))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def exterior_probes(s: SetSpec, separation: float, resolution: float,
                    window: tuple | None = None) -> np.ndarray:
    """Deterministic grid probes at distance >= separation from the set."""
    if window is None:
        box = s.bounding_box()
        if box is None:
            raise InputError("exterior_probes needs a bounded set or a window")
        pad = max(4 * separation, 1.0)
        window = (box[0] - pad, box[1] + pad)
    grid = grid_points(window[0], window[1], resolution)
    far = s.distance_many(grid) >= separation
    return grid[far]


def density_check(points: np.ndarray, target: SetSpec, resolution: float,
                  probe_resolution: float | None = None) -> float:
    """Max over target probes of the distance to the sample; must be <= resolution."""
    probes = target.probe_points(probe_resolution or resolution)
    if probes.shape[0] == 0:
        return 0.0
    d = pairwise_distances(probes, _pts2d(points)).min(axis=1)
    return float(d.max())
