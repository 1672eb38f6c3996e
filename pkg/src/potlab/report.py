"""Construction reports: stage ledgers, certified inequalities, canonical JSON.

Reports are the byte-reproducible artifact of every pipeline: no timing data
lives here (wall time goes to a sidecar), floats are serialized with Python's
shortest round-trip repr, and keys are sorted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _plain(value):
    """Recursively convert numpy scalars/arrays to JSON-friendly builtins."""
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
        return repr(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class Inequality:
    """One certified inequality with its numeric margin."""

    name: str
    lhs: float
    relation: str  # one of ge, gt, le, lt
    rhs: float
    passed: bool
    margin: float

    @staticmethod
    def check(name: str, lhs: float, relation: str, rhs: float) -> "Inequality":
        lhs, rhs = float(lhs), float(rhs)
        if relation in ("ge", "gt"):
            margin = lhs - rhs
        elif relation in ("le", "lt"):
            margin = rhs - lhs
        else:
            raise ValueError(f"unknown relation {relation!r}")
        if relation == "ge":
            ok = lhs >= rhs
        elif relation == "gt":
            ok = lhs > rhs
        elif relation == "le":
            ok = lhs <= rhs
        else:
            ok = lhs < rhs
        # inf >= inf counts as satisfied in extended arithmetic
        if np.isinf(lhs) and lhs > 0 and relation in ("ge", "gt"):
            ok, margin = True, float("inf")
        return Inequality(name, lhs, relation, rhs, bool(ok), float(margin))


@dataclass
class ConstructionReport:
    command: str
    scenario_hash: str = ""
    seed: int | None = None
    depth: int | None = None
    stages: list = field(default_factory=list)      # (stage, dict) ledger entries
    inequalities: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)      # probe minima/maxima etc.

    def add_stage(self, stage: str, **data) -> None:
        self.stages.append({"stage": stage, **{k: _plain(v) for k, v in data.items()}})

    def require(self, name: str, lhs: float, relation: str, rhs: float) -> Inequality:
        ineq = Inequality.check(name, lhs, relation, rhs)
        self.inequalities.append(ineq)
        return ineq

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.inequalities)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "scenario_hash": self.scenario_hash,
            "seed": self.seed,
            "depth": self.depth,
            "stages": _plain(self.stages),
            "inequalities": [
                {
                    "name": i.name,
                    "lhs": _plain(i.lhs),
                    "relation": i.relation,
                    "rhs": _plain(i.rhs),
                    "margin": _plain(i.margin),
                    "passed": i.passed,
                }
                for i in self.inequalities
            ],
            "tables": _plain(self.tables),
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())


def scenario_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def merge_reports(command: str, parts: list[ConstructionReport],
                  labels: list[str]) -> ConstructionReport:
    out = ConstructionReport(command=command)
    for label, part in zip(labels, parts):
        for st in part.stages:
            out.stages.append({**st, "stage": f"{label}/{st['stage']}"})
        for ineq in part.inequalities:
            out.inequalities.append(
                Inequality(f"{label}/{ineq.name}", ineq.lhs, ineq.relation,
                           ineq.rhs, ineq.passed, ineq.margin))
        if part.tables:
            out.tables[label] = part.tables
    return out


# --- figure rendering (report path renders PNGs next to the CSV output) ----

def _axes(title: str, xlabel: str, ylabel: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    import matplotlib.pyplot as plt

    plt.close(fig)


def plot_histogram(values, path, title: str, xlabel: str) -> None:
    vals = np.asarray(values, dtype=float)
    vals = vals[np.isfinite(vals)]
    fig, ax = _axes(title, xlabel, "count")
    if vals.size:
        ax.hist(vals, bins=min(40, max(5, vals.size // 3)))
    _save(fig, path)


def plot_profile(x, series: dict, path, title: str, xlabel: str, ylabel: str,
                 logy: bool = False) -> None:
    fig, ax = _axes(title, xlabel, ylabel)
    for label, ys in series.items():
        ys = np.asarray(ys, dtype=float)
        finite = np.isfinite(ys)
        ax.plot(np.asarray(x)[finite], ys[finite], marker="o", ms=3, lw=1,
                label=label)
    if logy:
        ax.set_yscale("log")
    if len(series) > 1:
        ax.legend()
    _save(fig, path)


def plot_scatter(x, y, path, title: str, xlabel: str, ylabel: str,
                 diagonal: bool = False) -> None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y)
    fig, ax = _axes(title, xlabel, ylabel)
    ax.scatter(x[keep], y[keep], s=8, alpha=0.7)
    if diagonal and keep.any():
        lo = float(min(x[keep].min(), y[keep].min()))
        hi = float(max(x[keep].max(), y[keep].max()))
        ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    _save(fig, path)
