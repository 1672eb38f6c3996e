"""Gluing: reduce a global construction to overlapping relatively compact
charts where the kernel certifies the triangle property, then recombine
with geometric weights.

Charts are open balls on a regular grid with 60% overlap; neighbor index
sets I_n come from exact ball-intersection tests. Weights are normalized so
a single-chart cover reproduces the single-chart pipeline atom for atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .choquet import ChoquetConfig, choquet_measure
from .errors import InputError
from .evans import WitnessConfig, evans_measure
from .kernels import KernelSpec, TriangleReport, pairwise_distances, triangle_constant
from .measures import DiscreteMeasure, mass, potential_field, scale, sum_measures
from .report import ConstructionReport, merge_reports
from .sets import FinitePoints, FSigmaSpec, GDeltaSpec, OpenBall, SetSpec


@dataclass(frozen=True)
class Chart:
    index: int
    ball: OpenBall
    neighbors: tuple[int, ...]
    triangle: TriangleReport | None


def nominal_triangle_constant(k: KernelSpec) -> float | None:
    """The family's a-priori triangle constant on an admissible chart."""
    if k.family in ("riesz", "metric_power"):
        return 2.0 ** k.gamma
    if k.family == "log2d":
        return 2.0  # valid on charts of diameter <= 1/2
    return None


def local_cover(domain: SetSpec, k: KernelSpec, chart_radius: float,
                probe_resolution: float = 0.05,
                cert_tolerance: float = 1e-9) -> list[Chart]:
    """Overlapping ball charts covering the domain, with neighbor sets and a
    per-chart empirical triangle certificate against the family constant."""
    if chart_radius <= 0:
        raise InputError("chart radius must be > 0")
    lo, hi = domain.bounding_box()
    pitch = 0.8 * chart_radius  # 60% overlap between neighboring charts
    centers = _chart_grid(lo, hi, pitch)
    keep = domain.distance_many(centers) < chart_radius
    centers = centers[keep]
    if centers.shape[0] == 0:
        raise InputError("no chart intersects the domain")
    probes = domain.probe_points(probe_resolution)
    covered = (pairwise_distances(probes, centers) < chart_radius).any(axis=1)
    if not covered.all():
        bad = probes[int(np.argmin(covered))]
        raise InputError(f"cover misses the domain probe {bad.tolist()}")
    bound = nominal_triangle_constant(k)
    charts = []
    for i, c in enumerate(centers, start=1):
        ball = OpenBall(c, chart_radius)
        sample = probes[np.linalg.norm(probes - c[None, :], axis=1) < chart_radius]
        cert = None
        if sample.shape[0] >= 3:
            cert = triangle_constant(k, sample)
            if bound is not None and cert.constant_c > bound * (1 + cert_tolerance):
                raise InputError(
                    f"chart {i} at {c.tolist()} fails the triangle certification: "
                    f"C = {cert.constant_c} > {bound}")
        charts.append(Chart(i, ball, (), cert))
    # neighbor sets by exact open-ball intersection
    out = []
    for chart in charts:
        nbrs = tuple(
            other.index for other in charts
            if float(np.linalg.norm(chart.ball.center - other.ball.center))
            < chart.ball.radius + other.ball.radius)
        out.append(Chart(chart.index, chart.ball, nbrs, chart.triangle))
    return out


def _chart_grid(lo: np.ndarray, hi: np.ndarray, pitch: float) -> np.ndarray:
    """Regular grid of chart centers; an axis spanned by one chart collapses
    to its midpoint (a small domain yields a genuine single-chart cover)."""
    axes = []
    for a, b in zip(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)):
        span = b - a
        if span <= pitch:
            axes.append(np.array([(a + b) / 2.0]))
        else:
            m = int(math.ceil(span / pitch)) + 1
            axes.append(np.linspace(a, b, m))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def chart_layout_rows(charts: list[Chart]) -> list[list]:
    rows = []
    for ch in charts:
        rows.append([ch.index, *[float(v) for v in ch.ball.center],
                     ch.ball.radius,
                     " ".join(str(n) for n in ch.neighbors)])
    return rows


def _chart_weights(live: list[int]) -> dict[int, float]:
    """Geometric weights normalized over the live charts (single chart -> 1)."""
    total = sum(2.0 ** (-n) for n in live)
    return {n: 2.0 ** (-n) / total for n in live}


def glue_evans(k: KernelSpec, fsigma: FSigmaSpec, charts: list[Chart], depth: int,
               cfg: WitnessConfig | None = None,
               probes=None) -> tuple[DiscreteMeasure, ConstructionReport]:
    """Per-chart Evans measures on P ∩ U_n, combined with normalized weights."""
    cfg = cfg or WitnessConfig()
    from .evans import piece_probe_sets

    probe_sets = piece_probe_sets(fsigma, depth, cfg.probe_resolution, probes)
    live: list[int] = []
    chart_inputs: dict[int, list[np.ndarray]] = {}
    for ch in charts:
        local = [p[np.asarray(ch.ball.contains_many(p), dtype=bool)]
                 for p in probe_sets]
        if all(lp.shape[0] == 0 for lp in local):
            continue
        # pieces with no probes in this chart are represented by the nearest
        # in-chart probe set being empty; drop them for the local run
        chart_inputs[ch.index] = local
        live.append(ch.index)
    if not live:
        raise InputError("no chart contains any piece probe")
    weights = _chart_weights(live)
    parts: list[DiscreteMeasure] = []
    reports: list[ConstructionReport] = []
    labels: list[str] = []
    for n in live:
        local = chart_inputs[n]
        keep = [i for i, lp in enumerate(local) if lp.shape[0] > 0]
        local_fsigma = FSigmaSpec(tuple(fsigma.pieces[i] for i in keep))
        local_probes = [local[i] for i in keep]
        nu_n, rep = evans_measure(k, local_fsigma, len(keep), cfg,
                                  probes=local_probes)
        parts.append(scale(nu_n, weights[n]))
        reports.append(rep)
        labels.append(f"chart-{n}")
    glued = sum_measures(parts, dim=fsigma.dim)
    report = merge_reports("glue-evans", reports, labels)
    report.depth = depth
    report.require("mass", mass(glued), "le", 1.0)
    union = fsigma.union(depth)
    gap = float(np.max(union.distance_many(glued.points))) if glued.n_atoms else 0.0
    report.require("support", gap, "le", 1e-9)
    mins = []
    for probes_m in probe_sets:
        vals = potential_field(k, glued, probes_m, cap=k.cap)
        mins.append(float(np.min(vals)))
    report.tables["piece_min_capped"] = mins
    report.tables["chart_weights"] = {str(n): weights[n] for n in live}
    report.tables["mass"] = mass(glued)
    return glued, report


def glue_choquet(k: KernelSpec, gdelta: GDeltaSpec, p0_points, charts: list[Chart],
                 depth: int, cfg: ChoquetConfig | None = None,
                 probes: np.ndarray | None = None,
                 exterior: np.ndarray | None = None
                 ) -> tuple[DiscreteMeasure, ConstructionReport]:
    """Per-chart G_delta pipelines on the core slices, recombined; exterior
    finiteness is audited chartwise (near charts by their certificates, far
    charts by atom separation)."""
    cfg = cfg or ChoquetConfig()
    core_probes = probes if probes is not None \
        else gdelta.core.probe_points(cfg.probe_resolution)
    core_probes = np.atleast_2d(np.asarray(core_probes, dtype=float))
    p0 = np.atleast_2d(np.asarray(p0_points, dtype=float))
    live = []
    slices: dict[int, np.ndarray] = {}
    for ch in charts:
        inside = np.asarray(ch.ball.contains_many(core_probes), dtype=bool)
        if inside.any():
            live.append(ch.index)
            slices[ch.index] = core_probes[inside]
    if not live:
        raise InputError("no chart contains any core probe")
    weights = _chart_weights(live)
    parts: dict[int, DiscreteMeasure] = {}
    reports, labels = [], []
    for n in live:
        local_core = FinitePoints(slices[n])
        local_g = GDeltaSpec(local_core, gdelta.epsilons)
        local_p0 = p0[np.asarray(ch_ball_contains(charts, n, p0), dtype=bool)]
        if local_p0.shape[0] == 0:
            raise InputError(f"P0 does not meet chart {n}")
        nu_n, rep = choquet_measure(k, local_g, local_p0, depth, cfg,
                                    probes=slices[n], exterior=exterior)
        parts[n] = scale(nu_n, weights[n])
        reports.append(rep)
        labels.append(f"chart-{n}")
    glued = sum_measures(list(parts.values()), dim=core_probes.shape[1])
    report = merge_reports("glue-choquet", reports, labels)
    report.depth = depth
    report.require("mass", mass(glued), "le", 1.0)
    # chartwise exterior finiteness: near charts contribute their certified
    # bounds, far charts only bounded atom-separated mass
    chart_by_index = {ch.index: ch for ch in charts}
    far_rows = []
    for n in live:
        ch = chart_by_index[n]
        far = [m for m in live if m not in ch.neighbors]
        if not far:
            continue
        rho_n = sum_measures([parts[m] for m in far], dim=core_probes.shape[1])
        vals = potential_field(k, rho_n, slices[n])
        far_rows.append({"chart": n, "max_far_potential": float(np.max(vals))})
        report.require(f"chart-{n}/far-finite", float(np.max(vals)), "lt",
                       math.inf)
    report.tables["far_field"] = far_rows
    report.tables["chart_weights"] = {str(n): weights[n] for n in live}
    report.tables["mass"] = mass(glued)
    return glued, report


def ch_ball_contains(charts: list[Chart], index: int, points: np.ndarray):
    for ch in charts:
        if ch.index == index:
            return ch.ball.contains_many(points)
    raise InputError(f"no chart with index {index}")


def assembled_neighborhood_monotone(gdelta: GDeltaSpec, charts: list[Chart],
                                    sample: np.ndarray) -> bool:
    """W_m = union over charts of the chart-local neighborhoods decreases in m
    on the sample (the finite form of the G_delta-necessity assembly)."""
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    prev = None
    for m in range(1, gdelta.depth + 1):
        u_m = gdelta.neighborhood(m)
        inside = np.zeros(sample.shape[0], dtype=bool)
        for ch in charts:
            inside |= (np.asarray(ch.ball.contains_many(sample), dtype=bool)
                       & np.asarray(u_m.contains_many(sample), dtype=bool))
        if prev is not None and np.any(inside & ~prev):
            return False
        prev = inside
    return True
