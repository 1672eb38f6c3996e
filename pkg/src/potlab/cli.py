"""Scenario-driven command line front end.

Each subcommand reads one scenario file, runs its pipeline, and writes the
canonical report JSON plus delimited artifacts (and PNG figures unless
--no-plots) into the output directory. Exit codes: 0 all certified
inequalities pass, 1 an inequality fails, 2 input error, 3 budget or
convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import report as rep
from .capacity import capacity_lp, null_capacity_series
from .choquet import ChoquetConfig, choquet_measure
from .errors import BudgetError, InputError, PotlabError
from .evans import WitnessConfig, evans_measure, evans_on_countable
from .glue import chart_layout_rows, glue_choquet, glue_evans, local_cover
from .kernels import (
    chain_metric,
    comparability_check,
    kernel_matrix,
    quasimetric_matrix,
    triangle_constant,
    triangle_violations,
)
from .measures import (
    DiscreteMeasure,
    load_measure_csv,
    mass,
    potential_field,
    save_measure_csv,
    save_potential_csv,
)
from .report import ConstructionReport, scenario_hash
from .scenario import (
    Scenario,
    exterior_probe_grid,
    load_scenario,
    probe_list,
    scenario_points,
)
from .sets import FSigmaSpec, GDeltaSpec
from .sweep import sweep_inequality_table, sweep_to_closed


def _cloud_from(scn: Scenario, obj, where: str) -> np.ndarray:
    if isinstance(obj, dict) and obj.get("type") == "random":
        count = int(obj.get("count", 100))
        low = float(obj.get("low", -1.0))
        high = float(obj.get("high", 1.0))
        rng = np.random.default_rng(scn.seed)
        return rng.uniform(low, high, size=(count, scn.dimension))
    return scenario_points(scn, obj, where)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _fmt(x) -> str:
    if isinstance(x, float):
        return "inf" if np.isinf(x) else repr(x)
    return str(x)


# --- subcommand implementations --------------------------------------------

def cmd_check_triangle(scn: Scenario, out: Path, args) -> ConstructionReport:
    sec = scn.section("check-triangle")
    cloud = _cloud_from(scn, sec["cloud"], "check-triangle.cloud")
    tri = triangle_constant(scn.kernel, cloud)
    report = ConstructionReport(command="check-triangle", seed=scn.seed)
    report.add_stage("scan", n_points=tri.n_points, constant_c=tri.constant_c,
                     gamma_min=tri.gamma_min,
                     worst_triple=[p.tolist() for p in tri.worst_triple])
    report.require("constant-at-least-one", tri.constant_c, "ge", 1.0)
    report.tables["constant_c"] = tri.constant_c
    report.tables["gamma_min"] = tri.gamma_min
    _write_csv(out / "cloud.csv",
               [f"x{i + 1}" for i in range(cloud.shape[1])],
               [[repr(float(v)) for v in p] for p in cloud])
    if not args.no_plots:
        from .kernels import pairwise_distances
        d = pairwise_distances(cloud, cloud)
        iu = np.triu_indices(len(cloud), k=1)
        rep.plot_histogram(d[iu], out / "figure_pair_distances.png",
                           "pairwise distances of the sampled cloud", "distance")
    return report


def cmd_metric(scn: Scenario, out: Path, args) -> ConstructionReport:
    sec = scn.section("metric")
    cloud = _cloud_from(scn, sec["cloud"], "metric.cloud")
    tri = triangle_constant(scn.kernel, cloud)
    gamma_req = sec.get("gamma", "auto")
    gamma = max(tri.gamma_min, scn.kernel.gamma) if gamma_req == "auto" \
        else float(gamma_req)
    d = chain_metric(scn.kernel, cloud, gamma, gamma_min=tri.gamma_min)
    c_prime = comparability_check(scn.kernel, cloud, d, gamma)
    violations = triangle_violations(d, rel_tol=1e-12)
    report = ConstructionReport(command="metric", seed=scn.seed)
    report.add_stage("metrize", gamma=gamma, constant_c=tri.constant_c,
                     c_prime=c_prime)
    report.require("triangle-violations", violations, "le", 0)
    report.require("comparability-finite", c_prime, "lt", float("inf"))
    report.tables["gamma"] = gamma
    report.tables["c_prime"] = c_prime
    rho = quasimetric_matrix(scn.kernel, cloud)
    g = kernel_matrix(scn.kernel, cloud, cloud)
    iu = np.triu_indices(len(cloud), k=1)
    _write_csv(out / "metric.csv", ["i", "j", "rho", "d", "G"],
               [[int(i), int(j), _fmt(float(rho[i, j])), _fmt(float(d[i, j])),
                 _fmt(float(g[i, j]))] for i, j in zip(*iu)])
    if not args.no_plots:
        rep.plot_scatter(d[iu] ** (-gamma), g[iu], out / "figure_comparability.png",
                         "kernel vs chain-metric power", "d^-gamma", "G",
                         diagonal=True)
    return report


def cmd_capacity(scn: Scenario, out: Path, args) -> ConstructionReport:
    sec = scn.section("capacity")
    if "target_set" in sec:
        spec = scn.set_spec(sec["target_set"])
        target = probe_list(scn, sec["target_set"], spec)
    else:
        target = scenario_points(scn, sec["target"], "capacity.target")
    if "support_set" in sec:
        spec = scn.set_spec(sec["support_set"])
        support = probe_list(scn, sec["support_set"], spec)
    elif "support" in sec:
        support = scenario_points(scn, sec["support"], "capacity.support")
    else:
        support = target
    est = capacity_lp(scn.kernel, target, support)
    report = ConstructionReport(command="capacity", seed=scn.seed)
    report.add_stage("lp", value=est.value, iterations=est.iterations,
                     constraint_gap=est.constraint_gap,
                     atoms=est.optimal_measure.n_atoms)
    report.require("constraint-gap", est.constraint_gap, "ge", -1e-9)
    report.tables["value"] = est.value
    depth = args.depth or sec.get("series_depth")
    if depth:
        series, levels = null_capacity_series(scn.kernel, target, support,
                                              int(depth))
        report.add_stage("series", depth=int(depth), mass=mass(series),
                         levels=[{"level": lv.level, "mass": lv.level_mass,
                                  "budget": lv.budget} for lv in levels])
        report.require("series-mass", mass(series), "le", 1.0)
        save_measure_csv(series, out / "series_measure.csv")
    save_measure_csv(est.optimal_measure, out / "measure.csv")
    kmat = np.minimum(
        kernel_matrix(scn.kernel, target, est.optimal_measure.points),
        scn.kernel.cap)
    gaps = kmat @ est.optimal_measure.weights - 1.0 if est.optimal_measure.n_atoms \
        else np.full(len(target), -1.0)
    _write_csv(out / "gaps.csv",
               [f"x{i + 1}" for i in range(target.shape[1])] + ["gap"],
               [[repr(float(c)) for c in p] + [repr(float(gv))]
                for p, gv in zip(target, gaps)])
    finite = gaps[np.isfinite(gaps)]
    bins = min(20, max(3, finite.size))
    counts, edges = np.histogram(finite, bins=bins) if finite.size \
        else (np.zeros(0, dtype=int), np.zeros(1))
    _write_csv(out / "gap_histogram.csv", ["bin_lo", "bin_hi", "count"],
               [[repr(float(edges[i])), repr(float(edges[i + 1])), int(c)]
                for i, c in enumerate(counts)])
    if not args.no_plots:
        rep.plot_histogram(gaps, out / "figure_gaps.png",
                           "constraint gap G mu - 1 over the target sample", "gap")
    return report


def cmd_sweep(scn: Scenario, out: Path, args) -> ConstructionReport:
    sec = scn.section("sweep")
    spec = scn.set_spec(sec["set"])
    if isinstance(sec.get("measure"), str):
        mu = load_measure_csv(Path(sec["measure"]))
    else:
        rows = np.asarray(sec["measure"], dtype=float)
        mu = DiscreteMeasure.from_atoms(rows[:, :-1], rows[:, -1])
    base = float(sec.get("shell_base", 3.0))
    a0 = scenario_points(scn, sec["a0"], "sweep.a0") if "a0" in sec else None
    res = sweep_to_closed(scn.kernel, spec, mu, a0_points=a0, shell_base=base)
    probes = probe_list(scn, sec["set"], spec)
    factor = 3.0 ** (-scn.kernel.gamma) if base == 3.0 else res.factor_bound
    table = sweep_inequality_table(scn.kernel, mu, res.measure, probes, factor)
    report = ConstructionReport(command="sweep", seed=scn.seed)
    report.add_stage("sweep", base=base, factor_bound=res.factor_bound,
                     assignments=len(res.assignments),
                     atoms_in=mu.n_atoms, atoms_out=res.measure.n_atoms)
    report.require("mass-conservation",
                   abs(mass(res.measure) - mass(mu)), "le",
                   1e-12 * max(mass(mu), 1.0))
    report.require("sweep-inequality-violations", table["violations"], "le", 0)
    from .sweep import geometric_core_violations
    report.require("geometric-core-violations",
                   geometric_core_violations(res.assignments, probes), "le", 0)
    report.tables["factor"] = factor
    report.tables["mass"] = mass(res.measure)
    save_measure_csv(res.measure, out / "swept.csv")
    _write_csv(out / "audit.csv",
               [f"x{i + 1}" for i in range(probes.shape[1])]
               + ["G_mu", "G_nu", "ratio", "bound"],
               [[repr(float(c)) for c in p]
                + [_fmt(float(table["g_mu"][i])), _fmt(float(table["g_nu"][i])),
                   _fmt(float(table["ratio"][i])), repr(float(factor))]
                for i, p in enumerate(probes)])
    if not args.no_plots:
        finite = np.isfinite(table["ratio"])
        rep.plot_profile(np.arange(int(np.sum(finite))),
                         {"G_nu / G_mu": table["ratio"][finite],
                          "bound": np.full(int(np.sum(finite)), factor)},
                         out / "figure_sweep_audit.png",
                         "sweep potential ratio against the certified factor",
                         "probe index", "ratio", logy=True)
    return report


def _fsigma_probes(scn: Scenario, sec: dict, fsigma: FSigmaSpec, depth: int):
    if "probes" not in sec:
        return None
    cfg = sec["probes"]
    if isinstance(cfg, dict) and "shared" in cfg:
        shared = scenario_points(scn, cfg["shared"], "evans.probes.shared")
        return [shared] * depth
    if isinstance(cfg, list):
        return [scenario_points(scn, c, f"evans.probes[{i}]")
                for i, c in enumerate(cfg)]
    raise InputError("evans.probes must be a list of point lists or {shared: ...}")


def cmd_evans(scn: Scenario, out: Path, args) -> ConstructionReport:
    sec = scn.section("evans")
    fsigma = scn.set_spec(sec["fsigma"])
    if not isinstance(fsigma, FSigmaSpec):
        raise InputError(f"set {sec['fsigma']!r} is not an F_sigma spec")
    depth = int(args.depth or sec.get("depth") or scn.budget("depth"))
    cfg = WitnessConfig(
        probe_resolution=float(scn.probes.get("resolution", 0.05)),
        margin_factor=float(sec.get("witness", {}).get("margin_factor", 1.1)))
    probes = _fsigma_probes(scn, sec, fsigma, depth)
    if "p0" in sec and sec["p0"] is not None:
        p0 = scenario_points(scn, sec["p0"], "evans.p0")
        nu, report = evans_on_countable(scn.kernel, fsigma, p0, depth, cfg,
                                        probes=probes)
    else:
        nu, report = evans_measure(scn.kernel, fsigma, depth, cfg, probes=probes,
                                   threads=args.threads)
    report.seed = scn.seed
    save_measure_csv(nu, out / "measure.csv")
    from .evans import piece_probe_sets
    probe_sets = probes or piece_probe_sets(fsigma, depth, cfg.probe_resolution)
    all_probes = np.unique(np.vstack(probe_sets), axis=0)
    vals = potential_field(scn.kernel, nu, all_probes)
    capped = potential_field(scn.kernel, nu, all_probes, cap=scn.kernel.cap)
    save_potential_csv(all_probes, vals, out / "probe_potentials.csv")
    save_potential_csv(all_probes, capped, out / "probe_potentials_capped.csv")
    if not args.no_plots:
        rep.plot_profile(range(1, len(report.tables["piece_min_capped"]) + 1),
                         {"min capped potential": report.tables["piece_min_capped"]},
                         out / "figure_divergence.png",
                         "per-piece minimum capped potential", "piece m",
                         "potential", logy=True)
    return report


def cmd_choquet(scn: Scenario, out: Path, args) -> ConstructionReport:
    sec = scn.section("choquet")
    gdelta = scn.set_spec(sec["gdelta"])
    if not isinstance(gdelta, GDeltaSpec):
        raise InputError(f"set {sec['gdelta']!r} is not a G_delta spec")
    depth = int(args.depth or sec.get("depth") or scn.budget("depth"))
    p0 = scenario_points(scn, sec["p0"], "choquet.p0")
    probes = scenario_points(scn, sec["probes"], "choquet.probes") \
        if "probes" in sec else None
    knobs = sec.get("config", {})
    cfg = ChoquetConfig(
        probe_resolution=float(scn.probes.get("resolution", 0.05)),
        exhaustion_depth=int(knobs.get("exhaustion_depth", 12)),
        blocks_max=int(knobs.get("blocks_max", 24)),
        n_max=int(scn.budgets.get("n_max", 65536)))
    exterior = exterior_probe_grid(scn, gdelta.core)
    nu, report = choquet_measure(scn.kernel, gdelta, p0, depth, cfg,
                                 probes=probes, exterior=exterior,
                                 threads=args.threads)
    report.seed = scn.seed
    save_measure_csv(nu, out / "measure.csv")
    core_probes = probes if probes is not None \
        else gdelta.core.probe_points(cfg.probe_resolution)
    vals = potential_field(scn.kernel, nu, core_probes)
    save_potential_csv(core_probes, vals, out / "interior_potentials.csv")
    trace = {"stages": report.stages,
             "core_min_capped_by_depth": report.tables["core_min_capped_by_depth"]}
    (out / "trace.json").write_text(json.dumps(trace, sort_keys=True, indent=2) + "\n")
    if exterior is not None and exterior.shape[0]:
        ext_vals = potential_field(scn.kernel, nu, exterior)
        save_potential_csv(exterior, ext_vals, out / "exterior_potentials.csv")
    if not args.no_plots:
        mins = report.tables["core_min_capped_by_depth"]
        rep.plot_profile(range(1, len(mins) + 1),
                         {"interior min (capped)": mins},
                         out / "figure_interior.png",
                         "interior probe minima by series depth", "depth M",
                         "potential", logy=True)
        if exterior is not None and exterior.shape[0]:
            rep.plot_histogram(ext_vals, out / "figure_exterior.png",
                               "exterior probe potentials", "G nu")
    return report


def cmd_glue(scn: Scenario, out: Path, args) -> ConstructionReport:
    sec = scn.section("glue")
    domain = scn.set_spec(sec["domain"])
    radius = float(sec["chart_radius"])
    res = float(scn.probes.get("resolution", 0.05))
    charts = local_cover(domain, scn.kernel, radius, probe_resolution=res)
    _write_csv(out / "charts.csv",
               ["n"] + [f"c{i + 1}" for i in range(scn.dimension)]
               + ["radius", "I_n"],
               chart_layout_rows(charts))
    mode = sec.get("mode", "evans")
    depth = int(args.depth or sec.get("depth") or scn.budget("depth"))
    if mode == "evans":
        fsigma = scn.set_spec(sec["fsigma"])
        nu, report = glue_evans(scn.kernel, fsigma, charts, depth)
    elif mode == "choquet":
        gdelta = scn.set_spec(sec["gdelta"])
        p0 = scenario_points(scn, sec["p0"], "glue.p0")
        probes = scenario_points(scn, sec["probes"], "glue.probes") \
            if "probes" in sec else None
        nu, report = glue_choquet(scn.kernel, gdelta, p0, charts, depth,
                                  probes=probes)
    else:
        raise InputError(f"glue.mode must be 'evans' or 'choquet', got {mode!r}")
    report.seed = scn.seed
    report.tables["charts"] = len(charts)
    save_measure_csv(nu, out / "measure.csv")
    if not args.no_plots and scn.dimension == 2:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5.5, 5.5))
        for ch in charts:
            ax.add_patch(plt.Circle(ch.ball.center, ch.ball.radius,
                                    fill=False, lw=0.8))
        ax.scatter(nu.points[:, 0], nu.points[:, 1], s=10, c="tab:red")
        ax.set_aspect("equal")
        ax.set_title("chart layout and glued atoms")
        fig.savefig(out / "figure_charts.png", dpi=120)
        plt.close(fig)
    return report


def cmd_audit(scn: Scenario, out: Path, args) -> ConstructionReport:
    """Re-verify a saved measure against its report without trusting ledgers."""
    if not args.measure or not args.report:
        raise InputError("audit needs --measure and --report paths")
    nu = load_measure_csv(Path(args.measure))
    saved = json.loads(Path(args.report).read_text())
    report = ConstructionReport(command="audit", seed=scn.seed)
    report.add_stage("inputs", measure=str(args.measure),
                     source_command=saved.get("command"))
    tables = saved.get("tables", {})
    if "mass" in tables:
        report.require("mass-matches-report",
                       abs(mass(nu) - float(tables["mass"])), "le",
                       1e-12 * max(1.0, float(tables["mass"])))
    # recompute every certified inequality derivable from the raw atoms and
    # the scenario's probe sets (per-stage rows that need intermediate
    # measures are re-certified at the final-sum level)
    recomputed = 0
    for row in saved.get("inequalities", []):
        name = row.get("name", "")
        if name == "mass" or name.endswith("/mass"):
            report.require(f"recheck/{name}", mass(nu), row["relation"],
                           float(row["rhs"]))
            recomputed += 1
    sec = scn.raw.get("audit", {})
    if "probe_set" in sec:
        probes = scenario_points(scn, sec["probe_set"], "audit.probe_set")
        capped = potential_field(scn.kernel, nu, probes, cap=scn.kernel.cap)
        for row in saved.get("inequalities", []):
            if "/divergence" in row["name"] or row["name"].startswith("divergence"):
                report.require(f"recheck/{row['name']}",
                               float(np.min(capped)), row["relation"],
                               float(row["rhs"]))
                recomputed += 1
    depth = saved.get("depth")
    if "evans" in scn.raw and nu.n_atoms:
        fsigma = scn.set_spec(scn.section("evans")["fsigma"])
        if isinstance(fsigma, FSigmaSpec):
            union = fsigma.union(min(depth or fsigma.depth, fsigma.depth))
            gap = float(np.max(union.distance_many(nu.points)))
            report.require("recheck/support", gap, "le", 1e-9)
            recomputed += 1
    if "choquet" in scn.raw and nu.n_atoms:
        from .kernels import pairwise_distances
        p0 = scenario_points(scn, scn.section("choquet")["p0"], "choquet.p0")
        gap = float(np.max(pairwise_distances(nu.points, p0).min(axis=1)))
        report.require("recheck/carrier", gap, "le", 1e-9)
        recomputed += 1
    report.add_stage("recomputed", count=recomputed)
    return report


COMMANDS = {
    "check-triangle": cmd_check_triangle,
    "metric": cmd_metric,
    "capacity": cmd_capacity,
    "sweep": cmd_sweep,
    "evans": cmd_evans,
    "choquet": cmd_choquet,
    "glue": cmd_glue,
    "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="potlab",
        description="Constructive potential theory at desk scale: kernel "
                    "metrization, capacity LPs, sweeping, Evans and Choquet "
                    "measures.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--scenario", required=True, help="scenario JSON path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--depth", type=int, default=None,
                        help="override the scenario truncation depth M")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent pieces")
    parser.add_argument("--no-plots", action="store_true",
                        help="skip PNG figure rendering")
    parser.add_argument("--measure", default=None, help="measure CSV (audit)")
    parser.add_argument("--report", default=None, help="report JSON (audit)")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.time()
    try:
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        scn = load_scenario(args.scenario)
        if args.seed is not None:
            scn.seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = COMMANDS[args.command](scn, out, args)
        report.scenario_hash = scenario_hash(args.scenario)
        report.write(out / "report.json")
        (out / "timing.json").write_text(json.dumps(
            {"wall_time_s": time.time() - t0}) + "\n")
        for ineq in report.inequalities:
            status = "PASS" if ineq.passed else "FAIL"
            print(f"[{status}] {ineq.name}: {ineq.lhs} {ineq.relation} "
                  f"{ineq.rhs} (margin {ineq.margin})")
        if not report.passed:
            print("result: FAIL (certified inequality violated)", file=sys.stderr)
            return 1
        print(f"result: PASS ({len(report.inequalities)} certified inequalities)")
        return 0
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except BudgetError as e:
        print(f"budget/convergence failure: {e}", file=sys.stderr)
        return 3
    except PotlabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except (KeyError, ValueError, TypeError) as e:
        print(f"input error: malformed scenario field ({e!r})", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
