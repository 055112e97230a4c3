"""Compare generated plans against the input activity distributions."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .model import ScenarioInputs, TimeGrid
from .schedule import occupancy_at

DEFAULT_TOLERANCE = 5.5   # percentage points


class ActivityMismatch(ValueError):
    """A plan mentions an activity the config does not know."""


@dataclass
class ErrorMatrix:
    subgroup: str
    values: np.ndarray      # K x N, (output - input) * 100
    agents: int = 0

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def argmax(self) -> tuple[int, int]:
        k, n = np.unravel_index(np.abs(self.values).argmax(), self.values.shape)
        return int(k), int(n)


@dataclass
class ReportSummary:
    max_error: float
    subgroup: str | None
    activity: str | None
    step: int | None         # 1-based
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = ""
        if self.subgroup is not None:
            where = f" at ({self.subgroup}, {self.activity}, step {self.step})"
        return f"{status} max |error| {self.max_error:.2f} pp{where}, tolerance {self.tolerance:g} pp"


def person_occupancy(person: io.Person, activities, grid: TimeGrid) -> np.ndarray:
    """Activity index per step for one plan, sampled at step midpoints."""
    acts = person.activities
    starts, kinds = [0.0], []
    for i, a in enumerate(acts):
        try:
            kinds.append(activities.index(a.type))
        except KeyError:
            raise ActivityMismatch(f"person {person.id}: unknown activity {a.type!r}") from None
        if i + 1 < len(acts):
            starts.append(float(a.end_time))
    return occupancy_at(starts, kinds, grid.midpoints())


def occupancy_matrix(doc: io.PopulationDocument, inputs: ScenarioInputs) -> dict:
    """Per-subgroup K x N occupancy proportions and agent counts.

    The subgroup of a person is recovered from its agent-type attribute.
    """
    by_type = {s.bdi_agent_type: s.name for s in inputs.subgroups}
    K, N = len(inputs.activities), inputs.grid.steps
    counts = {s.name: np.zeros((K, N)) for s in inputs.subgroups}
    agents = {s.name: 0 for s in inputs.subgroups}
    cols = np.arange(N)
    for p in doc.persons:
        t = p.attribute(io.BDI_AGENT_TYPE)
        if t not in by_type:
            raise ActivityMismatch(f"person {p.id}: agent type {t!r} matches no subgroup")
        name = by_type[t]
        occ = person_occupancy(p, inputs.activities, inputs.grid)
        counts[name][occ, cols] += 1
        agents[name] += 1
    out = {}
    for name, c in counts.items():
        n = agents[name]
        out[name] = (c / n if n else c, n)
    return out


def distribution_error(occupancy: np.ndarray, dist: np.ndarray, subgroup: str = "", agents: int = 0) -> ErrorMatrix:
    occupancy = np.asarray(occupancy, dtype=float)
    dist = np.asarray(getattr(dist, "values", dist), dtype=float)
    if occupancy.shape != dist.shape:
        raise ValueError(f"shape mismatch: occupancy {occupancy.shape} vs distribution {dist.shape}")
    return ErrorMatrix(subgroup, (occupancy - dist) * 100.0, agents)


def population_errors(doc: io.PopulationDocument, inputs: ScenarioInputs) -> list[ErrorMatrix]:
    occ = occupancy_matrix(doc, inputs)
    out = []
    for s in inputs.subgroups:
        o, n = occ[s.name]
        if n:
            out.append(distribution_error(o, s.distribution.values, s.name, n))
    return out


def summarize(errors: list[ErrorMatrix], activities, tolerance: float = DEFAULT_TOLERANCE) -> ReportSummary:
    worst = None
    for e in errors:
        if worst is None or e.max_abs() > worst.max_abs():
            worst = e
    if worst is None:
        return ReportSummary(0.0, None, None, None, tolerance)
    k, n = worst.argmax()
    names = getattr(activities, "names", activities)
    return ReportSummary(worst.max_abs(), worst.subgroup, names[k], n + 1, tolerance)


def write_error_report(errors: list[ErrorMatrix], activities, out_dir,
                       tolerance: float = DEFAULT_TOLERANCE) -> ReportSummary:
    """One ``error_<subgroup>.csv`` per subgroup plus ``summary.txt``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = getattr(activities, "names", activities)
    for e in errors:
        with (out_dir / f"error_{e.subgroup}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["activity"] + [f"step{n + 1}" for n in range(e.values.shape[1])])
            for name, row in zip(names, e.values):
                w.writerow([name] + [f"{v:.2f}" for v in row])
    summary = summarize(errors, activities, tolerance)
    (out_dir / "summary.txt").write_text(summary.line() + "\n")
    return summary
