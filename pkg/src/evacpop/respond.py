"""Threshold-driven evacuation decisions under a scripted fire and alert schedule.

Agents follow their day plans until the combined alert ranking crosses their
initial-response or act-now threshold.  From then on they travel in straight
lines at a fixed speed through a queue of legs (dependant, home, refuge).
Traffic is not modelled; the engine measures when people decide, not how
long the roads take to clear.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import shapely
from shapely.geometry import Point, Polygon, shape

from . import io
from .behaviour import BdiAttributes

ENVIRONMENTAL = {"Smoke": 0.3, "Fire": 0.4}
TRANSMITTED = {"Advice": 0.1, "WatchAndAct": 0.2, "EvacuateNow": 0.3}

FOLLOWING = "following-plan"
TO_DEPENDANT = "going-to-dependant"
GOING_HOME = "going-home"
LEAVING = "leaving"
SHELTERING = "sheltering"
DEFENDING = "defending"
EVACUATED = "evacuated"
PHASES = (FOLLOWING, TO_DEPENDANT, GOING_HOME, LEAVING, SHELTERING, DEFENDING, EVACUATED)

EVENT_COLUMNS = ("time", "agent_id", "kind", "x", "y", "detail")
AT_TOLERANCE = 1.0    # metres; closer than this counts as being there


class ScenarioError(ValueError):
    pass


def additive_rank(e: float, t: float) -> float:
    # rounded so that e.g. 0.4 + 0.2 compares equal to a 0.6 threshold
    return round(e + t, 10)


def rank(e: float, t: float) -> float:
    """Combined threat score of an environmental and a transmitted level."""
    return additive_rank(e, t)


@dataclass(frozen=True)
class Barometer:
    env: float = 0.0
    trans: float = 0.0


def alert_value(alert: str, category: str) -> float:
    if category not in ("environmental", "transmitted"):
        raise ValueError(f"unknown alert category {category!r}")
    if alert is None or alert == "" or alert == 0:
        return 0.0
    table = ENVIRONMENTAL if category == "environmental" else TRANSMITTED
    try:
        return table[alert]
    except KeyError:
        raise ValueError(f"unknown {category} alert {alert!r}") from None


def update_barometer(b: Barometer, alert, category: str) -> Barometer:
    """Environmental level only ever rises; transmitted level is replaced."""
    v = alert_value(alert, category)
    if category == "environmental":
        return Barometer(max(b.env, v), b.trans)
    return Barometer(b.env, v)


def perceive_environment(xy, fire, smoke_radius: float = 5000.0, fire_radius: float = 1000.0):
    """'Fire', 'Smoke' or None for a point given the current fire geometry."""
    if fire is None:
        return None
    d = shapely.distance(Point(xy), fire)
    if d <= fire_radius:
        return "Fire"
    if d <= smoke_radius:
        return "Smoke"
    return None


def perceive_many(xy: np.ndarray, fire, smoke_radius: float, fire_radius: float) -> np.ndarray:
    """Environmental level per agent (0, Smoke or Fire value)."""
    out = np.zeros(len(xy))
    if fire is None or len(xy) == 0:
        return out
    d = shapely.distance(shapely.points(xy), fire)
    out[d <= smoke_radius] = ENVIRONMENTAL["Smoke"]
    out[d <= fire_radius] = ENVIRONMENTAL["Fire"]
    return out


@dataclass(frozen=True)
class Message:
    time: float
    area: object          # shapely geometry, or None for everyone
    alert: str

    def reaches(self, xy) -> bool:
        return self.area is None or bool(shapely.covers(self.area, Point(xy)))


def deliver_transmitted(messages, t_from: float, t_to: float, xy):
    """Alerts sent in ``(t_from, t_to]`` that reach an agent standing at ``xy``."""
    return [m.alert for m in messages if t_from < m.time <= t_to and m.reaches(xy)]


def evaluate_thresholds(r: float, init: float, act: float, init_fired: bool, act_fired: bool):
    """'ActNow', 'InitialResponse' or None.  Comparisons are strict."""
    if not act_fired and r > act:
        return "ActNow"
    if not init_fired and r > init:
        return "InitialResponse"
    return None


# --------------------------------------------------------------------------
# scenario input


def parse_clock(value) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    return float(io.parse_time(str(value)))


def parse_geometry(raw):
    if isinstance(raw, dict):
        if "type" in raw:
            if raw["type"] == "Feature":
                raw = raw["geometry"]
            return shape(raw)
        if "polygon" in raw:
            return Polygon(raw["polygon"])
        if "point" in raw:
            return Point(raw["point"])
        if "points" in raw:
            return shapely.multipoints(raw["points"])
    if isinstance(raw, list):
        return Polygon(raw)
    raise ScenarioError(f"cannot read geometry {raw!r}")


@dataclass
class FireScenario:
    fire: list = field(default_factory=list)        # (time, geometry), ascending
    messages: list = field(default_factory=list)    # Message, ascending
    start: float = 0.0
    end: float = 86400.0
    tick: float = 60.0
    speed_kmh: float = 40.0
    smoke_radius: float = 5000.0
    fire_radius: float = 1000.0
    nearby_radius: float = 1000.0

    def __post_init__(self):
        if self.tick <= 0 or self.speed_kmh <= 0:
            raise ScenarioError("tick and speed must be positive")
        if self.smoke_radius <= 0 or self.fire_radius <= 0 or self.nearby_radius <= 0:
            raise ScenarioError("radii must be positive")
        if self.end < self.start:
            raise ScenarioError("scenario ends before it starts")
        times = [t for t, _ in self.fire]
        if times != sorted(times):
            raise ScenarioError("fire snapshots must be in time order")
        if [m.time for m in self.messages] != sorted(m.time for m in self.messages):
            raise ScenarioError("messages must be in time order")
        for m in self.messages:
            alert_value(m.alert, "transmitted")
        self._fire_times = np.array(times, dtype=float)

    @property
    def speed(self) -> float:
        """Metres per second."""
        return self.speed_kmh / 3.6

    def fire_at(self, t: float):
        i = int(np.searchsorted(self._fire_times, t, side="right")) - 1
        return self.fire[i][1] if i >= 0 else None


def scenario_from_dict(raw: dict) -> FireScenario:
    try:
        fire = [(parse_clock(f["time"]), parse_geometry(f.get("geometry", f.get("polygon"))))
                for f in raw.get("fire", [])]
        messages = []
        for m in raw.get("messages", []):
            area = m.get("area", "ALL")
            geom = None if area == "ALL" else parse_geometry(area)
            messages.append(Message(parse_clock(m["time"]), geom, m["alert"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario entry: {exc}") from None
    keys = ("tick", "speed_kmh", "smoke_radius", "fire_radius", "nearby_radius")
    opts = {k: float(raw[k]) for k in keys if k in raw}
    for k in ("start", "end"):
        if k in raw:
            opts[k] = parse_clock(raw[k])
    try:
        return FireScenario(fire=fire, messages=messages, **opts)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(path) -> FireScenario:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: cannot parse JSON: {exc}") from None
    return scenario_from_dict(raw)


# --------------------------------------------------------------------------
# agents


@dataclass(frozen=True)
class Event:
    time: float
    agent_id: str
    kind: str
    x: float
    y: float
    detail: str = ""


@dataclass
class Move:
    kind: str            # GoHome | GoToDependant | LeaveNow
    target: tuple
    label: str


@dataclass
class AgentState:
    id: str
    attrs: BdiAttributes
    home: tuple
    xy: tuple
    phase: str = FOLLOWING
    barometer: Barometer = Barometer()
    init_fired: bool = False
    act_fired: bool = False
    visited_dependant: bool = False
    moves: list = field(default_factory=list)
    current: Move | None = None


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class PlanTracks:
    """Vectorised positions of agents that are still following their plans."""

    def __init__(self, persons, speed: float):
        S = max((len(p.activities) for p in persons), default=1)
        A = len(persons)
        self.x = np.zeros((A, S))
        self.y = np.zeros((A, S))
        self.depart = np.full((A, S), np.inf)
        self.arrive = np.zeros((A, S))
        for a, p in enumerate(persons):
            acts = p.activities
            t_arr = 0.0
            for i, act in enumerate(acts):
                self.x[a, i], self.y[a, i] = act.x, act.y
                self.arrive[a, i] = t_arr
                if act.end_time is None or i + 1 == len(acts):
                    break
                dep = max(float(act.end_time), t_arr)
                self.depart[a, i] = dep
                nxt = acts[i + 1]
                t_arr = dep + math.hypot(nxt.x - act.x, nxt.y - act.y) / speed
            # pad so the final stop repeats
            last = len(acts) - 1
            self.x[a, last + 1:] = self.x[a, last]
            self.y[a, last + 1:] = self.y[a, last]

    def positions(self, t: float, rows=None) -> np.ndarray:
        rows = np.arange(len(self.x)) if rows is None else rows
        dep = self.depart[rows]
        c = (dep <= t).sum(axis=1)
        r = np.arange(len(rows))
        prev = np.maximum(c - 1, 0)
        nxt = np.minimum(c, self.x.shape[1] - 1)
        x0, y0 = self.x[rows, prev], self.y[rows, prev]
        x1, y1 = self.x[rows, nxt], self.y[rows, nxt]
        t0 = np.where(c > 0, dep[r, prev], 0.0)
        t1 = self.arrive[rows, nxt]
        span = np.where(t1 > t0, t1 - t0, 1.0)
        f = np.clip((t - t0) / span, 0.0, 1.0)
        f = np.where(c > 0, f, 1.0)
        return np.column_stack([x0 + f * (x1 - x0), y0 + f * (y1 - y0)])


def route_blocked(start, target, t0: float, scenario: FireScenario, spacing: float = 200.0) -> bool:
    """True if the straight route passes within the fire radius of the fire
    geometry current at the moment the agent would be there."""
    length = _dist(start, target)
    n = max(1, int(math.ceil(length / spacing)))
    for i in range(n + 1):
        f = i / n
        p = (start[0] + f * (target[0] - start[0]), start[1] + f * (target[1] - start[1]))
        fire = scenario.fire_at(t0 + f * length / scenario.speed)
        if fire is not None and shapely.distance(Point(p), fire) <= scenario.fire_radius:
            return True
    return False


def plan_initial_response(agent: AgentState, r: float, nearby_radius: float) -> list:
    """Moves for the initial-response goal."""
    a = agent.attrs
    at_home = _dist(agent.xy, agent.home) < AT_TOLERANCE
    moves = []
    if a.has_dependant:
        dep = a.dependant_location
        if _dist(agent.xy, dep) > nearby_radius and a.go_home_before_leaving and not at_home:
            moves.append(Move("GoHome", agent.home, "home"))
        moves.append(Move("GoToDependant", dep, "dependant"))
        if a.go_home_after_dependants:
            moves.append(Move("GoHome", agent.home, "home"))
    elif r > a.act_threshold:
        pass    # act-now takes over in the same tick
    elif not at_home:
        moves.append(Move("GoHome", agent.home, "home"))
    return moves


def plan_act_now(agent: AgentState) -> list:
    """Moves for the act-now goal, ending with leaving for the refuge."""
    a = agent.attrs
    moves = []
    pos = agent.xy
    if a.has_dependant and not agent.visited_dependant:
        moves.append(Move("GoToDependant", a.dependant_location, "dependant"))
        pos = a.dependant_location
    wants_home = a.go_home_before_leaving or (a.has_dependant and a.go_home_after_dependants)
    if wants_home and _dist(pos, agent.home) >= AT_TOLERANCE:
        moves.append(Move("GoHome", agent.home, "home"))
    moves.append(Move("LeaveNow", a.evac_location, f"evac:{a.evac_name}"))
    return moves


PHASE_OF = {"GoHome": GOING_HOME, "GoToDependant": TO_DEPENDANT, "LeaveNow": LEAVING}


@dataclass
class SimulationResult:
    events: list
    agents: list
    summary: dict


class Engine:
    def __init__(self, doc: io.PopulationDocument, scenario: FireScenario,
                 rank_fn: Callable[[float, float], float] = rank):
        self.scenario = scenario
        self.rank = rank_fn
        self.persons = list(doc.persons)
        self.agents = []
        for p in self.persons:
            attrs = BdiAttributes.from_person(p)
            first = p.activities[0]
            home = (first.x, first.y)
            self.agents.append(AgentState(p.id, attrs, home, home))
        self.tracks = PlanTracks(self.persons, scenario.speed)
        self.events = []

    def emit(self, t, agent, kind, detail=""):
        self.events.append(Event(t, agent.id, kind, agent.xy[0], agent.xy[1], detail))

    def start_next(self, t, agent):
        """Begin the next queued move, checking the evacuation route first."""
        if not agent.moves:
            agent.current = None
            return
        m = agent.moves.pop(0)
        if m.kind == "LeaveNow" and route_blocked(agent.xy, m.target, t, self.scenario):
            m = Move("LeaveNow", agent.attrs.invac_location, "invac")
        agent.current = m
        agent.phase = PHASE_OF[m.kind]
        self.emit(t, agent, m.kind, m.label)

    def finish(self, agent, move):
        if move.kind == "GoToDependant":
            agent.visited_dependant = True
        if agent.moves:
            return
        if move.kind == "LeaveNow":
            agent.phase = SHELTERING if move.label == "invac" else EVACUATED
        else:
            agent.phase = DEFENDING if _dist(agent.xy, agent.home) < AT_TOLERANCE else SHELTERING

    def advance(self, agent, t_from, budget):
        """Move a responding agent for ``budget`` seconds starting at ``t_from``."""
        speed = self.scenario.speed
        t = t_from
        while agent.current is not None and budget > 0:
            m = agent.current
            d = _dist(agent.xy, m.target)
            need = d / speed
            if need <= budget:
                agent.xy = (float(m.target[0]), float(m.target[1]))
                t += need
                budget -= need
                self.emit(t, agent, "Arrived", m.label)
                self.finish(agent, m)
                self.start_next(t, agent)
            else:
                f = budget * speed / d
                agent.xy = (agent.xy[0] + f * (m.target[0] - agent.xy[0]),
                            agent.xy[1] + f * (m.target[1] - agent.xy[1]))
                budget = 0

    def trigger(self, t, agent, r):
        fired = evaluate_thresholds(r, agent.attrs.init_threshold, agent.attrs.act_threshold,
                                    agent.init_fired, agent.act_fired)
        if fired is None:
            return
        if not agent.init_fired:
            agent.init_fired = True
            self.emit(t, agent, "InitTriggered", f"r={r:.2f}")
        if fired == "ActNow":
            agent.act_fired = True
            self.emit(t, agent, "ActTriggered", f"r={r:.2f}")
            agent.moves = plan_act_now(agent)
        else:
            agent.moves = plan_initial_response(agent, r, self.scenario.nearby_radius)
            if not agent.moves:
                # already at home with nobody to fetch
                agent.phase = DEFENDING
                return
        agent.current = None
        self.start_next(t, agent)

    def run(self) -> SimulationResult:
        sc = self.scenario
        n = len(self.agents)
        t_prev = -math.inf
        t = sc.start
        steps = int(math.floor((sc.end - sc.start) / sc.tick + 1e-9))
        init = np.array([a.attrs.init_threshold for a in self.agents])
        act = np.array([a.attrs.act_threshold for a in self.agents])
        for step in range(steps + 1):
            t = sc.start + step * sc.tick
            # movement
            following = np.array([a.phase == FOLLOWING and a.current is None for a in self.agents], dtype=bool)
            if following.any():
                rows = np.flatnonzero(following)
                pos = self.tracks.positions(t, rows)
                for r_, (x, y) in zip(rows, pos):
                    self.agents[r_].xy = (float(x), float(y))
            if step > 0:
                for a in self.agents:
                    if a.current is not None:
                        self.advance(a, t - sc.tick, sc.tick)
            if n == 0:
                continue
            xy = np.array([a.xy for a in self.agents], dtype=float)
            # perception
            levels = perceive_many(xy, sc.fire_at(t), sc.smoke_radius, sc.fire_radius)
            for a, lv in zip(self.agents, levels):
                if lv > a.barometer.env:
                    name = "Fire" if lv >= ENVIRONMENTAL["Fire"] else "Smoke"
                    a.barometer = update_barometer(a.barometer, name, "environmental")
                    self.emit(t, a, "PerceiveEnv", name)
            # transmitted alerts
            for m in sc.messages:
                if not t_prev < m.time <= t:
                    continue
                if m.area is None:
                    hit = np.ones(n, dtype=bool)
                else:
                    hit = shapely.covers(m.area, shapely.points(xy))
                for a, h in zip(self.agents, hit):
                    if h:
                        a.barometer = update_barometer(a.barometer, m.alert, "transmitted")
                        self.emit(t, a, "ReceiveMsg", m.alert)
            # decisions
            r = np.array([self.rank(a.barometer.env, a.barometer.trans) for a in self.agents])
            live = ((r > init) & ~np.array([a.init_fired for a in self.agents])) | \
                   ((r > act) & ~np.array([a.act_fired for a in self.agents]))
            for i in np.flatnonzero(live):
                self.trigger(t, self.agents[i], float(r[i]))
            t_prev = t
        self.events.sort(key=lambda e: (e.time, _id_key(e.agent_id)))
        return SimulationResult(self.events, self.agents, summarize(self.events, self.agents))


def _id_key(agent_id: str):
    return (0, int(agent_id), "") if agent_id.isdigit() else (1, 0, agent_id)


def run_scenario(doc: io.PopulationDocument, scenario: FireScenario,
                 rank_fn: Callable[[float, float], float] = rank) -> SimulationResult:
    return Engine(doc, scenario, rank_fn).run()


def execute_initial_response(agent: AgentState, r: float, nearby_radius: float = 1000.0) -> list:
    """Kinds of the moves the initial-response goal would start, in order."""
    return [m.kind for m in plan_initial_response(agent, r, nearby_radius)]


def execute_act_now(agent: AgentState) -> list:
    return [m.kind for m in plan_act_now(agent)]


def summarize(events, agents) -> dict:
    phases = {p: 0 for p in PHASES}
    for a in agents:
        phases[a.phase] += 1
    leave = sorted(e.time for e in events if e.kind == "LeaveNow")
    hist = {}
    for e in events:
        if e.kind in ("InitTriggered", "ActTriggered"):
            hour = int(e.time // 3600)
            hist.setdefault(hour, {"InitTriggered": 0, "ActTriggered": 0})[e.kind] += 1
    return {
        "agents": len(agents),
        "phases": phases,
        "init_triggered": sum(a.init_fired for a in agents),
        "act_triggered": sum(a.act_fired for a in agents),
        "leave_now": len(leave),
        "median_leave_time": float(np.median(leave)) if leave else None,
        "decisions_per_hour": [{"hour": h, **hist[h]} for h in sorted(hist)],
    }


def median_leave_time(events):
    leave = [e.time for e in events if e.kind == "LeaveNow"]
    return float(np.median(leave)) if leave else None


def write_events(events, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for e in events:
            w.writerow([f"{e.time:.1f}", e.agent_id, e.kind, f"{e.x:.2f}", f"{e.y:.2f}", e.detail])


def read_events(path) -> list:
    with Path(path).open(newline="") as fh:
        return [Event(float(r["time"]), r["agent_id"], r["kind"], float(r["x"]), float(r["y"]), r["detail"])
                for r in csv.DictReader(fh)]
