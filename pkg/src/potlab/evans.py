"""Evans measures: one finite measure on a truncated F_sigma set whose
potential exceeds any prescribed level uniformly on the set's probe sample.

Per piece A_m the capacity series supplies a witness with large potential
and small mass; sweeping puts it on A_m; the 2^-m weighted sum stays in the
unit mass ball while the per-piece certified levels grow with the depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capacity import null_capacity_series, witness_from_capacity
from .errors import BudgetError, InputError
from .kernels import KernelSpec, pairwise_distances
from .measures import DiscreteMeasure, mass, potential_field, scale, sum_measures
from .report import ConstructionReport
from .sets import MEMBER_TOL, FSigmaSpec, SetSpec
from .sweep import guaranteed_factor, refine_until, sweep_to_closed


@dataclass(frozen=True)
class WitnessConfig:
    """How per-piece capacity witnesses are built."""

    support: np.ndarray | None = None   # atom sites; default: the piece probes
    probe_resolution: float = 0.05
    margin_factor: float = 1.1          # headroom above the certified level


def piece_probe_sets(fsigma: FSigmaSpec, depth: int, resolution: float,
                     explicit=None) -> list[np.ndarray]:
    if explicit is not None:
        if len(explicit) < depth:
            raise InputError("need one explicit probe list per piece")
        return [np.atleast_2d(np.asarray(p, dtype=float)) for p in explicit[:depth]]
    return [fsigma.pieces[m].probe_points(resolution) for m in range(depth)]


def _support_for(cfg: WitnessConfig, probes: np.ndarray) -> np.ndarray:
    if cfg.support is not None:
        return np.atleast_2d(np.asarray(cfg.support, dtype=float))
    return probes


def _containment_gap(piece: SetSpec, measure: DiscreteMeasure) -> float:
    if measure.n_atoms == 0:
        return 0.0
    return float(np.max(piece.distance_many(measure.points)))


def _build_piece(k: KernelSpec, piece: SetSpec, probes_m: np.ndarray,
                 support: np.ndarray, level: int, m: int):
    try:
        series, levels = null_capacity_series(k, probes_m, support, depth=level)
    except BudgetError as err:
        raise BudgetError(str(err), stage=f"evans/piece-{m}",
                          detail=err.detail) from err
    swept = sweep_to_closed(k, piece, series)
    return series, swept


def evans_measure(k: KernelSpec, fsigma: FSigmaSpec, depth: int,
                  cfg: WitnessConfig | None = None,
                  probes=None, threads: int = 1
                  ) -> tuple[DiscreteMeasure, ConstructionReport]:
    """Sum over pieces m <= depth of 2^-m * (swept capacity series at level depth).

    The report certifies, per piece, support containment, the unit mass
    budget, and the capped probe minimum against 2^-m * 3^-gamma * L_m.
    Pieces are independent; with threads > 1 they are built concurrently and
    assembled in index order, so the output is identical either way.
    """
    cfg = cfg or WitnessConfig()
    if depth < 1 or depth > fsigma.depth:
        raise InputError(f"depth must be in 1..{fsigma.depth}, got {depth}")
    probe_sets = piece_probe_sets(fsigma, depth, cfg.probe_resolution, probes)
    report = ConstructionReport(command="evans", depth=depth)
    factor = guaranteed_factor(3.0, k.gamma)
    level = depth  # uniform schedule L_m = M
    jobs = [(fsigma.pieces[m - 1], probe_sets[m - 1],
             _support_for(cfg, probe_sets[m - 1]), m)
            for m in range(1, depth + 1)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            built = list(pool.map(
                lambda j: _build_piece(k, j[0], j[1], j[2], level, j[3]), jobs))
    else:
        built = [_build_piece(k, piece, pm, sup, level, m)
                 for piece, pm, sup, m in jobs]
    pieces_nu = []
    for (piece, probes_m, _, m), (series, swept) in zip(jobs, built):
        nu_m = swept.measure
        pieces_nu.append(scale(nu_m, 2.0 ** (-m)))
        capped = potential_field(k, nu_m, probes_m, cap=k.cap)
        raw = potential_field(k, nu_m, probes_m)
        series_capped = potential_field(k, series, probes_m, cap=k.cap)
        report.add_stage(
            f"piece-{m}",
            level=level,
            witness_mass=mass(series),
            swept_mass=mass(nu_m),
            probe_count=len(probes_m),
            min_capped_potential=float(np.min(capped)),
            min_raw_potential=float(np.min(raw)),
            assignments=len(swept.assignments),
        )
        report.require(f"piece-{m}/support", _containment_gap(piece, nu_m),
                       "le", MEMBER_TOL)
        report.require(f"piece-{m}/mass", mass(nu_m), "le", 1.0 + 1e-12)
        report.require(f"piece-{m}/mass-preserved",
                       abs(mass(nu_m) - mass(series)),
                       "le", 1e-12 * max(mass(series), 1.0))
        # sweep loses at most the certified factor against the witness
        report.require(f"piece-{m}/sweep-factor",
                       float(np.min(capped - factor * series_capped)), "ge",
                       -1e-9 * float(np.max(series_capped)))
    nu = sum_measures(pieces_nu, dim=fsigma.dim)
    total_capped = [potential_field(k, nu, p, cap=k.cap) for p in probe_sets]
    for m in range(1, depth + 1):
        bound = 2.0 ** (-m) * 3.0 ** (-k.gamma) * depth
        report.require(f"piece-{m}/divergence",
                       float(np.min(total_capped[m - 1])), "ge", bound)
    report.require("mass", mass(nu), "le", 1.0)
    report.tables["piece_min_capped"] = [float(np.min(v)) for v in total_capped]
    report.tables["min_capped_potential"] = float(
        min(np.min(v) for v in total_capped))
    report.tables["mass"] = mass(nu)
    return nu, report


def evans_on_countable(k: KernelSpec, fsigma: FSigmaSpec, p0_points, depth: int,
                       cfg: WitnessConfig | None = None, probes=None,
                       n_max: int = 65536) -> tuple[DiscreteMeasure, ConstructionReport]:
    """Evans measure carried by a countable set P0 with P0 ∩ A_m dense in A_m.

    Per piece the witness is built with G >= margin_factor * 2^m on the probe
    set, then refined onto P0 ∩ A_m until the approximant still clears 2^m.
    """
    cfg = cfg or WitnessConfig()
    if depth < 1 or depth > fsigma.depth:
        raise InputError(f"depth must be in 1..{fsigma.depth}, got {depth}")
    p0 = np.atleast_2d(np.asarray(p0_points, dtype=float))
    probe_sets = piece_probe_sets(fsigma, depth, cfg.probe_resolution, probes)
    report = ConstructionReport(command="evans-countable", depth=depth)
    pieces_nu = []
    for m in range(1, depth + 1):
        piece = fsigma.pieces[m - 1]
        probes_m = probe_sets[m - 1]
        on_piece = np.asarray(piece.contains_many(p0), dtype=bool)
        p0_m = p0[on_piece]
        if p0_m.shape[0] == 0:
            raise InputError(f"P0 does not meet piece {m}")
        support = _support_for(cfg, probes_m)
        support_gap = float(np.max(piece.distance_many(support)))
        level = cfg.margin_factor * 2.0 ** m
        t_level = level if support_gap <= MEMBER_TOL else level / guaranteed_factor(3.0, k.gamma)
        witness, est = witness_from_capacity(k, probes_m, support, t_level)
        if mass(witness) > 1.0:
            raise BudgetError(
                f"piece {m}: witness mass {mass(witness)} exceeds the unit budget "
                f"(capacity estimate {est.value} too large at this cap/resolution)",
                stage=f"evans-countable/piece-{m}")
        swept = sweep_to_closed(k, piece, witness)
        n_used, nu_m = refine_until(
            k, swept.measure, 2.0 ** m, probes_m, p0_m, n_start=1, n_max=n_max)
        pieces_nu.append(scale(nu_m, 2.0 ** (-m)))
        capped = potential_field(k, nu_m, probes_m, cap=k.cap)
        p0_gap = float(np.max(pairwise_distances(nu_m.points, p0).min(axis=1))) \
            if nu_m.n_atoms else 0.0
        report.add_stage(
            f"piece-{m}",
            witness_mass=mass(witness),
            capacity_estimate=est.value,
            refine_n=n_used,
            min_capped_potential=float(np.min(capped)),
            p0_sites=int(p0_m.shape[0]),
        )
        report.require(f"piece-{m}/carrier", p0_gap, "le", MEMBER_TOL)
        report.require(f"piece-{m}/level",
                       float(np.min(potential_field(k, nu_m, probes_m))),
                       "gt", 2.0 ** m)
        report.require(f"piece-{m}/mass", mass(nu_m), "le", 1.0 + 1e-12)
    nu = sum_measures(pieces_nu, dim=fsigma.dim)
    report.require("mass", mass(nu), "le", 1.0)
    # per-probe certificate: every piece containing the probe contributes > 1
    per_piece_min = []
    for m in range(1, depth + 1):
        vals = potential_field(k, nu, probe_sets[m - 1], cap=k.cap)
        per_piece_min.append(float(np.min(vals)))
        report.require(f"piece-{m}/total-on-piece", float(np.min(vals)), "gt", 1.0)
    report.tables["piece_min_capped"] = per_piece_min
    report.tables["mass"] = mass(nu)
    return nu, report
