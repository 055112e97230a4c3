"""End-to-end population generation."""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import io, places, schedule
from .behaviour import BdiAttributes, RefugeIndex, draw_attributes
from .io import Activity, Leg, Person, PopulationDocument
from .model import ScenarioInputs, SubgroupSpec

# independent stream families per pipeline stage
STAGE_SCHEDULE = 0
STAGE_PLACES = 1
STAGE_BEHAVIOUR = 2
STAGE_RESPOND = 3


def agent_rng(seed: int, stage: int, agent: int) -> np.random.Generator:
    """Stream for one agent and stage; independent of how many agents exist."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stage, agent)))


@dataclass
class GeneratedAgent:
    id: str
    subgroup: str
    skeleton: schedule.DayPlanSkeleton
    location_ids: list       # location index per skeleton entry
    attributes: BdiAttributes | None = None


@dataclass
class GenerationResult:
    agents: list
    ledger: places.AllocationLedger
    centroids: places.CentroidIndex
    timings: dict = field(default_factory=dict)


def skeleton_to_activities(skeleton, location_ids, inputs: ScenarioInputs) -> list:
    """Plan elements (activities and legs) for one agent.

    Start times are rounded up to whole seconds.  A final home entry merges
    with the closing bookend, so the plan ends with a single home activity.
    """
    names = inputs.activities.names
    loc = inputs.locations
    entries = [(t, k, li) for (t, k), li in zip(skeleton.entries, location_ids)]
    if entries[-2][1] == 0:
        entries.pop()
    period = int(round(inputs.grid.period))
    elements = []
    for i, (t, k, li) in enumerate(entries):
        end = min(math.ceil(entries[i + 1][0]), period) if i + 1 < len(entries) else None
        if elements:
            elements.append(Leg(inputs.travel_mode))
        elements.append(Activity(names[k], float(loc.x[li]), float(loc.y[li]), end))
    return elements


def _subgroup_choosers(inputs: ScenarioInputs, s: SubgroupSpec, centroids) -> dict:
    weighted = inputs.location_choice == "weighted"
    out = {}
    for k in range(1, len(inputs.activities)):
        mask = inputs.allowed_mask(s, k)
        if mask.any() and inputs.locations.allocation[mask].sum() > 0:
            out[k] = places.build_chooser(inputs.locations, centroids, mask, s.travel_factor, weighted)
    return out


def generate(inputs: ScenarioInputs, seed: int, annotate: bool = True) -> GenerationResult:
    timings = {}
    t0 = time.perf_counter()
    centroids = places.compute_centroids(inputs.locations)
    ledger = places.AllocationLedger.from_locations(inputs.locations)
    loc = inputs.locations
    agents = []
    idx = 0
    for s in inputs.subgroups:
        start = schedule.start_matrix(s.distribution.values, s.durations)
        cm = schedule.cumulative_matrix(start)
        choosers = _subgroup_choosers(inputs, s, centroids)
        homes = places.HomeAssigner(ledger, loc, inputs.allowed_mask(s, 0), len(centroids), s.name)
        for _ in range(s.count):
            skel = schedule.draw_day_plan(cm, s.durations, inputs.grid, agent_rng(seed, STAGE_SCHEDULE, idx))
            rng = agent_rng(seed, STAGE_PLACES, idx)
            home = homes.assign(rng)
            locs = places.assign_locations(skel.activities, home, choosers, loc.locality_index, rng)
            agents.append(GeneratedAgent(str(idx), s.name, skel, locs))
            idx += 1
    timings["plans"] = time.perf_counter() - t0

    if annotate and agents:
        t1 = time.perf_counter()
        annotate_agents(agents, inputs, centroids, seed)
        timings["annotate"] = time.perf_counter() - t1
    return GenerationResult(agents, ledger, centroids, timings)


def annotate_agents(agents, inputs: ScenarioInputs, centroids, seed: int):
    if inputs.refuges is None:
        raise ValueError("annotation requires a refuge table")
    refuges = RefugeIndex(inputs.refuges, centroids)
    loc = inputs.locations
    dep_mask = loc.has_any_tag({inputs.dependant_tag})
    dep_xy = np.column_stack([loc.x[dep_mask], loc.y[dep_mask]])
    for a in agents:
        s = inputs.subgroup(a.subgroup)
        home = a.location_ids[0]
        a.attributes = draw_attributes(
            s.bdi_agent_type, s.behaviour, (loc.x[home], loc.y[home]), loc.locality[home],
            dep_xy, refuges, agent_rng(seed, STAGE_BEHAVIOUR, int(a.id)))


def to_document(result: GenerationResult, inputs: ScenarioInputs) -> PopulationDocument:
    doc = PopulationDocument()
    for a in result.agents:
        if a.attributes is not None:
            attrs = a.attributes.to_attributes()
        else:
            attrs = [io.Attribute(io.BDI_AGENT_TYPE, io.STRING, inputs.subgroup(a.subgroup).bdi_agent_type)]
        doc.persons.append(Person(a.id, attrs, skeleton_to_activities(a.skeleton, a.location_ids, inputs)))
    return doc


def scale_counts(inputs: ScenarioInputs, total: int) -> list[int]:
    """Subgroup counts rescaled to ``total`` by largest remainder."""
    counts = np.array([s.count for s in inputs.subgroups], dtype=float)
    if total < 0:
        raise ValueError("agent count must be non-negative")
    if counts.sum() == 0:
        if total and len(counts):
            counts[:] = 1.0
        else:
            return [0] * len(counts)
    exact = counts / counts.sum() * total
    base = np.floor(exact).astype(int)
    short = total - base.sum()
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return [int(v) for v in base]


def with_agent_total(inputs: ScenarioInputs, total: int) -> ScenarioInputs:
    counts = scale_counts(inputs, total)
    subgroups = [dataclasses.replace(s, count=c) for s, c in zip(inputs.subgroups, counts)]
    return dataclasses.replace(inputs, subgroups=subgroups)
