"""Scenario configuration, domain types and input loading.

A scenario is described by one JSON file.  Location and refuge tables live in
separate CSV files referenced from the JSON (relative to the JSON file) or
passed explicitly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io import LocationTable, RefugeSet, read_locations, read_refuges, write_locations, write_refuges

DEFAULT_BDI_PREFIX = "io.github.agentsoz.ees.agents.bushfire."
COLUMN_TOL = 1e-9


class ConfigError(ValueError):
    """Raised when scenario inputs are malformed or contradict each other."""


@dataclass(frozen=True)
class TimeGrid:
    period_hours: float = 24.0
    steps: int = 12

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError(f"steps must be a positive integer, got {self.steps!r}")
        if not self.period_hours > 0:
            raise ConfigError(f"period must be positive, got {self.period_hours!r}")

    @property
    def period(self) -> float:
        """Period length in seconds."""
        return self.period_hours * 3600.0

    @property
    def step_length(self) -> float:
        """Step length in seconds."""
        return self.period / self.steps

    def step_start(self, n: int) -> float:
        """Start of 1-based step ``n`` in seconds."""
        return (n - 1) * self.step_length

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.steps) + 0.5) * self.step_length


@dataclass(frozen=True)
class ActivitySet:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise ConfigError("at least one activity (home) is required")
        if len(set(self.names)) != len(self.names):
            raise ConfigError(f"activity names must be unique: {self.names}")

    @property
    def home(self) -> str:
        return self.names[0]

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown activity {name!r}") from None


@dataclass(frozen=True)
class BehaviourParams:
    prob_of_dependant: float = 0.0
    stay: bool = False
    prob_of_go_home: float = 0.0
    threshold_min: float = 0.0
    threshold_max: float = 1.0
    dependant_radius: float = 2000.0

    def __post_init__(self):
        for name in ("prob_of_dependant", "prob_of_go_home", "threshold_min", "threshold_max"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.threshold_min > self.threshold_max:
            raise ConfigError(
                f"threshold_min {self.threshold_min} exceeds threshold_max {self.threshold_max}")
        if not self.dependant_radius > 0:
            raise ConfigError("dependant_radius must be positive")


@dataclass(eq=False)
class DistributionTable:
    """Proportions of a subgroup engaged in each activity (rows) per step (columns)."""

    subgroup: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ConfigError(f"{self.subgroup}: distribution must be K x N")
        if np.any(self.values < -COLUMN_TOL) or np.any(self.values > 1 + COLUMN_TOL):
            raise ConfigError(f"{self.subgroup}: distribution entries must lie in [0, 1]")
        sums = self.values.sum(axis=0)
        for n, s in enumerate(sums, start=1):
            if abs(s - 1.0) > COLUMN_TOL:
                raise ConfigError(f"{self.subgroup}: column {n} sums to {s:.6g}")

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, DistributionTable):
            return NotImplemented
        return self.subgroup == other.subgroup and np.array_equal(self.values, other.values)


@dataclass(eq=False)
class SubgroupSpec:
    name: str
    count: int
    travel_factor: float
    durations: np.ndarray          # duration weight per activity, in steps
    distribution: DistributionTable
    location_tags: tuple[frozenset, ...]   # allowed type tags per activity
    behaviour: BehaviourParams = field(default_factory=BehaviourParams)
    bdi_agent_type: str = ""

    def __eq__(self, other):
        if not isinstance(other, SubgroupSpec):
            return NotImplemented
        return (self.name == other.name and self.count == other.count
                and self.travel_factor == other.travel_factor
                and np.array_equal(self.durations, other.durations)
                and self.distribution == other.distribution
                and self.location_tags == other.location_tags
                and self.behaviour == other.behaviour
                and self.bdi_agent_type == other.bdi_agent_type)


@dataclass(eq=False)
class ScenarioInputs:
    name: str
    grid: TimeGrid
    activities: ActivitySet
    subgroups: list[SubgroupSpec]
    locations: LocationTable
    refuges: RefugeSet | None = None
    location_choice: str = "weighted"
    dependant_tag: str = "dependant"
    travel_mode: str = "car"

    @property
    def population(self) -> int:
        return sum(s.count for s in self.subgroups)

    def subgroup(self, name: str) -> SubgroupSpec:
        for s in self.subgroups:
            if s.name == name:
                return s
        raise KeyError(f"unknown subgroup {name!r}")

    def allowed_mask(self, subgroup: SubgroupSpec, k: int) -> np.ndarray:
        """Boolean mask over locations for M_{s, activity k}."""
        return self.locations.has_any_tag(subgroup.location_tags[k])

    def __eq__(self, other):
        if not isinstance(other, ScenarioInputs):
            return NotImplemented
        return (self.name == other.name and self.grid == other.grid
                and self.activities == other.activities
                and self.subgroups == other.subgroups
                and self.locations == other.locations
                and self.refuges == other.refuges
                and self.location_choice == other.location_choice
                and self.dependant_tag == other.dependant_tag
                and self.travel_mode == other.travel_mode)


# --------------------------------------------------------------------------
# loading


def _as_fraction_matrix(name, dist, activities, steps):
    rows = []
    for act in activities.names:
        col = dist.get(act)
        if col is None:
            col = [0.0] * steps
        if len(col) != steps:
            raise ConfigError(f"{name}: distribution for {act!r} has {len(col)} entries, expected {steps}")
        rows.append([float(v) for v in col])
    unknown = set(dist) - set(activities.names)
    if unknown:
        raise ConfigError(f"{name}: distribution names unknown activities {sorted(unknown)}")
    values = np.array(rows, dtype=float)
    # percentages are recognised by their column scale
    if values.sum(axis=0).max() > 1.5:
        values = values / 100.0
    return values


def _parse_subgroup(raw, activities, grid, prefix):
    try:
        name = str(raw["name"])
        count = raw["count"]
        g = float(raw["travel_factor"])
    except KeyError as exc:
        raise ConfigError(f"subgroup missing field {exc}") from None
    if int(count) != count or count < 0:
        raise ConfigError(f"{name}: count must be a non-negative integer")
    if not 0.0 <= g < 1.0:
        raise ConfigError(f"{name}: travel_factor must lie in [0, 1), got {g}")

    raw_dur = raw.get("durations", {})
    durations = []
    for act in activities.names:
        if act not in raw_dur:
            raise ConfigError(f"{name}: no duration weight for activity {act!r}")
        d = raw_dur[act]
        if int(d) != d or not 1 <= d <= grid.steps:
            raise ConfigError(f"{name}: duration weight for {act!r} must be an integer in 1..{grid.steps}")
        durations.append(int(d))

    values = _as_fraction_matrix(name, raw.get("distribution", {}), activities, grid.steps)
    dist = DistributionTable(name, values)

    raw_tags = raw.get("locations", {})
    unknown = set(raw_tags) - set(activities.names)
    if unknown:
        raise ConfigError(f"{name}: location map names unknown activities {sorted(unknown)}")
    tags = []
    for act in activities.names:
        t = raw_tags.get(act, [])
        if isinstance(t, str):
            t = [t]
        tags.append(frozenset(t))

    try:
        behaviour = BehaviourParams(**raw.get("behaviour", {}))
    except TypeError as exc:
        raise ConfigError(f"{name}: bad behaviour block: {exc}") from None

    return SubgroupSpec(
        name=name, count=int(count), travel_factor=g,
        durations=np.array(durations, dtype=int), distribution=dist,
        location_tags=tuple(tags), behaviour=behaviour,
        bdi_agent_type=raw.get("bdi_agent_type", prefix + name),
    )


def parse_config(raw: dict, locations: LocationTable, refuges: RefugeSet | None = None,
                 check_maps: bool = True) -> ScenarioInputs:
    """Build validated inputs from an already-parsed config mapping.

    ``check_maps=False`` skips the location-map cross check, for callers that
    only need the distributions.
    """
    grid = TimeGrid(float(raw.get("period_hours", 24.0)), raw.get("steps", 12))
    activities = ActivitySet(tuple(raw.get("activities", ())))
    prefix = raw.get("bdi_agent_type_prefix", DEFAULT_BDI_PREFIX)
    subgroups = [_parse_subgroup(s, activities, grid, prefix) for s in raw.get("subgroups", [])]
    names = [s.name for s in subgroups]
    if len(set(names)) != len(names):
        raise ConfigError(f"subgroup names must be unique: {names}")
    choice = raw.get("location_choice", "weighted")
    if choice not in ("weighted", "uniform"):
        raise ConfigError(f"location_choice must be 'weighted' or 'uniform', got {choice!r}")
    inputs = ScenarioInputs(
        name=raw.get("name", "scenario"), grid=grid, activities=activities,
        subgroups=subgroups, locations=locations, refuges=refuges,
        location_choice=choice, dependant_tag=raw.get("dependant_tag", "dependant"),
        travel_mode=raw.get("travel_mode", "car"),
    )
    if check_maps:
        _check_location_maps(inputs)
    return inputs


def _check_location_maps(inputs: ScenarioInputs):
    for s in inputs.subgroups:
        for k, act in enumerate(inputs.activities.names):
            wanted = s.distribution.values[k].max() > 0 or k == 0
            if wanted and not inputs.allowed_mask(s, k).any():
                raise ConfigError(
                    f"{s.name}: activity {act!r} has non-zero proportion (or is home) "
                    f"but no location carries any of tags {sorted(s.location_tags[k])}")


def load_config(path, locations=None, refuges=None) -> ScenarioInputs:
    """Load a scenario JSON file plus its location (and optional refuge) tables.

    ``locations``/``refuges`` override the paths named inside the config.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: cannot parse JSON: {exc}") from None
    base = path.parent
    loc_path = Path(locations) if locations else _relative(base, raw.get("locations"))
    if loc_path is None:
        raise ConfigError(f"{path}: no locations file given")
    ref_path = Path(refuges) if refuges else _relative(base, raw.get("refuges"))
    table = read_locations(loc_path)
    refuge_set = read_refuges(ref_path) if ref_path is not None else None
    return parse_config(raw, table, refuge_set)


def _relative(base: Path, p):
    if not p:
        return None
    p = Path(p)
    return p if p.is_absolute() else base / p


def config_to_dict(inputs: ScenarioInputs) -> dict:
    """Inverse of :func:`parse_config` (without the tables)."""
    acts = inputs.activities.names
    subgroups = []
    for s in inputs.subgroups:
        subgroups.append({
            "name": s.name,
            "count": s.count,
            "travel_factor": s.travel_factor,
            "durations": {a: int(d) for a, d in zip(acts, s.durations)},
            "distribution": {a: [float(v) for v in row] for a, row in zip(acts, s.distribution.values)},
            "locations": {a: sorted(t) for a, t in zip(acts, s.location_tags) if t},
            "behaviour": {
                "prob_of_dependant": s.behaviour.prob_of_dependant,
                "stay": s.behaviour.stay,
                "prob_of_go_home": s.behaviour.prob_of_go_home,
                "threshold_min": s.behaviour.threshold_min,
                "threshold_max": s.behaviour.threshold_max,
                "dependant_radius": s.behaviour.dependant_radius,
            },
            "bdi_agent_type": s.bdi_agent_type,
        })
    return {
        "name": inputs.name,
        "period_hours": inputs.grid.period_hours,
        "steps": inputs.grid.steps,
        "activities": list(acts),
        "location_choice": inputs.location_choice,
        "dependant_tag": inputs.dependant_tag,
        "travel_mode": inputs.travel_mode,
        "subgroups": subgroups,
    }


def save_config(inputs: ScenarioInputs, path) -> Path:
    """Write config JSON with sibling ``locations.csv`` (and ``refuges.csv``)."""
    path = Path(path)
    raw = config_to_dict(inputs)
    raw["locations"] = path.stem + ".locations.csv"
    write_locations(inputs.locations, path.parent / raw["locations"])
    if inputs.refuges is not None:
        raw["refuges"] = path.stem + ".refuges.csv"
        write_refuges(inputs.refuges, path.parent / raw["refuges"])
    path.write_text(json.dumps(raw, indent=2) + "\n")
    return path


# --------------------------------------------------------------------------
# cross validation


@dataclass
class Issue:
    severity: str      # "error" | "warning"
    message: str


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def errors(self):
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self):
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self):
        return bool(self.issues)

    def __str__(self):
        return "\n".join(f"{i.severity}: {i.message}" for i in self.issues)


def validate_inputs(inputs: ScenarioInputs) -> ValidationReport:
    """Feasibility checks that go beyond per-field validation."""
    from .schedule import build_start_matrix, raw_start_matrix

    report = ValidationReport()
    loc = inputs.locations
    N = inputs.grid.steps

    home_union = np.zeros(len(loc), dtype=bool)
    for s in inputs.subgroups:
        mask = inputs.allowed_mask(s, 0)
        home_union |= mask
        cap = int(loc.allocation[mask].sum())
        if cap < s.count:
            report.issues.append(Issue(
                "error", f"insufficient home capacity for {s.name}: {cap} < {s.count}"))
    total = int(loc.allocation[home_union].sum())
    if total < inputs.population:
        report.issues.append(Issue(
            "error", f"insufficient home capacity: {total} < population {inputs.population}"))

    for s in inputs.subgroups:
        raw = raw_start_matrix(s.distribution.values, s.durations)
        xi = build_start_matrix(s.distribution.values, s.durations)
        for k, act in enumerate(inputs.activities.names):
            d = int(s.durations[k])
            late = np.nonzero(xi[k, max(N - d + 1, 0):] > 0)[0]
            if d > 1 and late.size:
                n = N - d + 2 + late[0]
                report.issues.append(Issue(
                    "warning",
                    f"{s.name}: activity {act!r} cannot complete within period "
                    f"(starts at step {n} with duration {d})"))
            neg = np.nonzero(raw[k] < -COLUMN_TOL)[0]
            if neg.size:
                report.issues.append(Issue(
                    "warning",
                    f"{s.name}: {act!r} drops faster than its duration allows at steps "
                    f"{[int(n) + 1 for n in neg]}; residual distribution error expected"))
        if s.behaviour.prob_of_dependant > 0 and not loc.has_any_tag({inputs.dependant_tag}).any():
            report.issues.append(Issue(
                "warning", f"{s.name}: no '{inputs.dependant_tag}' locations; "
                           "dependants fall back to random points near home"))
    return report

