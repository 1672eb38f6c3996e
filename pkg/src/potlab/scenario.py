"""Scenario files: a JSON config with tagged set records, probes, budgets.

Every run is driven by one scenario; the version field is mandatory and the
file's SHA-256 goes into the report so results are reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .kernels import KernelSpec, log2d, metric_power, riesz
from .sets import (
    Ball,
    Box,
    Cantor,
    ComplementOfOpen,
    FSigmaSpec,
    FinitePoints,
    GDeltaSpec,
    Neighborhood,
    OpenBall,
    OpenBox,
    Segment,
    Union,
    WholeSpace,
)

SCENARIO_VERSION = 1


@dataclass
class Scenario:
    dimension: int
    kernel: KernelSpec
    sets: dict = field(default_factory=dict)
    probes: dict = field(default_factory=dict)
    budgets: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict)
    path: Path | None = None

    def section(self, name: str) -> dict:
        sec = self.raw.get(name)
        if sec is None:
            raise InputError(f"scenario has no '{name}' section")
        if not isinstance(sec, dict):
            raise InputError(f"scenario field '{name}' must be an object")
        return sec

    def set_spec(self, name: str):
        if name not in self.sets:
            raise InputError(f"unknown set name {name!r} (have {sorted(self.sets)})")
        return self.sets[name]

    def budget(self, key: str, default=None):
        val = self.budgets.get(key, default)
        if val is None:
            raise InputError(f"missing budget field 'budgets.{key}'")
        return val


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise InputError(f"missing field '{where}.{key}'")
    return obj[key]


def _positive(value, where: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InputError(f"field '{where}' must be a number, got {value!r}") from None
    if v <= 0:
        raise InputError(f"field '{where}' must be > 0, got {v}")
    return v


def parse_kernel(obj: dict, dimension: int) -> KernelSpec:
    family = _need(obj, "family", "kernel")
    cap = _positive(obj.get("cap", 1e6), "kernel.cap")
    if family == "riesz":
        alpha = _positive(_need(obj, "alpha", "kernel"), "kernel.alpha")
        return riesz(alpha, dimension, cap=cap)
    if family == "metric_power":
        gamma = _positive(_need(obj, "gamma", "kernel"), "kernel.gamma")
        return metric_power(gamma, cap=cap)
    if family == "log2d":
        gamma = _positive(obj.get("gamma", 2.0), "kernel.gamma")
        return log2d(cap=cap, gamma=gamma)
    raise InputError(f"unknown kernel family {family!r}")


def _parse_points(obj, where: str, dimension: int) -> np.ndarray:
    """A point source: an explicit list, or a tagged generator record."""
    if isinstance(obj, list):
        pts = np.asarray(obj, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.shape[1] != dimension:
            raise InputError(f"{where}: points have dimension {pts.shape[1]}, "
                             f"scenario dimension is {dimension}")
        return pts
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected a point list or a tagged record")
    tag = _need(obj, "type", where)
    if tag == "cantor_endpoints":
        return Cantor(int(_need(obj, "level", where))).endpoints()
    if tag == "linspace":
        lo, hi = float(_need(obj, "lo", where)), float(_need(obj, "hi", where))
        count = int(_need(obj, "count", where))
        return np.linspace(lo, hi, count).reshape(-1, 1)
    if tag == "grid":
        from .sets import grid_points
        lo = np.asarray(_need(obj, "lo", where), dtype=float)
        hi = np.asarray(_need(obj, "hi", where), dtype=float)
        return grid_points(lo, hi, _positive(_need(obj, "pitch", where), where))
    raise InputError(f"{where}: unknown point source type {tag!r}")


def parse_set(obj, sets: dict, where: str, dimension: int):
    """Nested tagged set records; strings refer to named sets."""
    if isinstance(obj, str):
        if obj not in sets:
            raise InputError(f"{where}: unknown set reference {obj!r}")
        return sets[obj]
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected a set record or a name")
    tag = _need(obj, "type", where)
    if tag == "finite_points":
        return FinitePoints(_parse_points(_need(obj, "points", where), where, dimension))
    if tag == "ball":
        return Ball(np.asarray(_need(obj, "center", where), dtype=float),
                    _positive(_need(obj, "radius", where), f"{where}.radius"),
                    closed=bool(obj.get("closed", True)))
    if tag == "open_ball":
        return OpenBall(np.asarray(_need(obj, "center", where), dtype=float),
                        _positive(_need(obj, "radius", where), f"{where}.radius"))
    if tag == "box":
        return Box(np.asarray(_need(obj, "lo", where), dtype=float),
                   np.asarray(_need(obj, "hi", where), dtype=float))
    if tag == "open_box":
        return OpenBox(np.asarray(_need(obj, "lo", where), dtype=float),
                       np.asarray(_need(obj, "hi", where), dtype=float))
    if tag == "segment":
        return Segment(np.asarray(_need(obj, "a", where), dtype=float),
                       np.asarray(_need(obj, "b", where), dtype=float))
    if tag == "cantor":
        return Cantor(int(_need(obj, "level", where)))
    if tag == "union":
        members = tuple(parse_set(m, sets, f"{where}.members[{i}]", dimension)
                        for i, m in enumerate(_need(obj, "members", where)))
        return Union(members)
    if tag == "complement_of_open":
        inner = parse_set(_need(obj, "inner", where), sets, f"{where}.inner", dimension)
        return ComplementOfOpen(inner)
    if tag == "neighborhood":
        core = parse_set(_need(obj, "core", where), sets, f"{where}.core", dimension)
        return Neighborhood(core, _positive(_need(obj, "radius", where),
                                            f"{where}.radius"))
    if tag == "whole_space":
        return WholeSpace(dimension)
    if tag == "fsigma":
        pieces = tuple(parse_set(p, sets, f"{where}.pieces[{i}]", dimension)
                       for i, p in enumerate(_need(obj, "pieces", where)))
        return FSigmaSpec(pieces)
    if tag == "gdelta":
        core = parse_set(_need(obj, "core", where), sets, f"{where}.core", dimension)
        if "epsilons" in obj:
            eps = tuple(float(e) for e in obj["epsilons"])
        else:
            sched = _need(obj, "schedule", where)
            base = _positive(sched.get("base", 2.0), f"{where}.schedule.base")
            depth = int(_need(sched, "depth", f"{where}.schedule"))
            eps = tuple(base ** (-m) for m in range(1, depth + 1))
        return GDeltaSpec(core, eps)
    raise InputError(f"{where}: unknown set type {tag!r}")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno}, "
                         f"column {e.colno}: {e.msg}") from e
    if not isinstance(raw, dict):
        raise InputError(f"{path}: scenario must be a JSON object")
    version = raw.get("version")
    if version != SCENARIO_VERSION:
        raise InputError(
            f"{path}: field 'version' must be {SCENARIO_VERSION}, got {version!r}")
    dimension = raw.get("dimension")
    if not isinstance(dimension, int) or dimension < 1:
        raise InputError(f"{path}: field 'dimension' must be a positive integer")
    kernel = parse_kernel(_need(raw, "kernel", "scenario"), dimension)
    budgets_raw = raw.get("budgets", {})
    if "cap" in budgets_raw:  # budgets.cap overrides the kernel cap
        from dataclasses import replace
        kernel = replace(kernel, cap=_positive(budgets_raw["cap"], "budgets.cap"))
    sets: dict = {}
    for name, rec in raw.get("sets", {}).items():
        sets[name] = parse_set(rec, sets, f"sets.{name}", dimension)
    budgets = dict(raw.get("budgets", {}))
    for key in ("eps", "cap", "tol"):
        if key in budgets:
            _positive(budgets[key], f"budgets.{key}")
    for key in ("depth", "n_max"):
        if key in budgets and (not isinstance(budgets[key], int) or budgets[key] < 1):
            raise InputError(f"budgets.{key} must be a positive integer")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise InputError("field 'seed' must be an integer")
    probes = dict(raw.get("probes", {}))
    return Scenario(dimension=dimension, kernel=kernel, sets=sets, probes=probes,
                    budgets=budgets, seed=seed, raw=raw, path=path)


def scenario_points(scn: Scenario, obj, where: str) -> np.ndarray:
    return _parse_points(obj, where, scn.dimension)


def probe_list(scn: Scenario, set_name: str, spec) -> np.ndarray:
    """Probe points for a named set: the explicit list if configured, else
    the primitive's canonical probes at the configured resolution."""
    explicit = scn.probes.get("explicit", {})
    if set_name in explicit:
        return scenario_points(scn, explicit[set_name], f"probes.explicit.{set_name}")
    res = float(scn.probes.get("resolution", 0.05))
    return spec.probe_points(res)


def exterior_probe_grid(scn: Scenario, spec) -> np.ndarray | None:
    cfg = scn.probes.get("exterior")
    if cfg is None:
        return None
    from .sets import exterior_probes
    sep = _positive(_need(cfg, "separation", "probes.exterior"),
                    "probes.exterior.separation")
    res = _positive(_need(cfg, "resolution", "probes.exterior"),
                    "probes.exterior.resolution")
    window = None
    if "window" in cfg:
        lo = np.asarray(cfg["window"][0], dtype=float)
        hi = np.asarray(cfg["window"][1], dtype=float)
        window = (lo, hi)
    return exterior_probes(spec, sep, res, window)
