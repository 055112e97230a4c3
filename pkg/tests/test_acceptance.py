"""Acceptance criteria 1-11.

Each test prints one ``criterion N PASS|FAIL`` line; the lines are repeated
in the pytest terminal summary.  Run alone with

    python3 -m pytest tests/test_acceptance.py -v
"""
import dataclasses
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacpop import io, pipeline, places, respond, synthetic
from evacpop.behaviour import BdiAttributes
from evacpop.io import Activity, Leg, Person, PopulationDocument
from evacpop.model import parse_config
from evacpop.respond import ENVIRONMENTAL, TRANSMITTED, Barometer, FireScenario, Message
from evacpop.validate import population_errors

from conftest import make_locations

SEED = 2024

# pinned tolerances
VISITOR_MAX_PP = 1.5            # 1
RESIDENT_MAX_PP = 5.5           # 2
RESIDENT_PEAK_PP = 5.04         # 2, reference outlier
RESIDENT_PEAK_BAND = 2.0        # 2
RESIDENT_PEAK_CELL = ("work", 10)   # 2, 6-8 pm is step 10 of 12
FIDELITY_RUNTIME_S = 60.0       # 1
STAY_TOL = 0.02                 # 3
GRAVITY_TOL = 0.02              # 4
DRAWS = 10_000                  # 3, 4
CAP_RUNS = 100                  # 5
SMOKE_WATCH = 0.5               # 6
MAX_RANK = 0.7                  # 6
BAROMETER_SEQUENCES = 1000      # 6
ATTR_TOL = 0.01                 # 7
SCALE_TARGET_S = 60.0           # 11
SCALE_CEILING_S = 600.0         # 11
SCALE_AGENTS = 50_000           # 7, 11

RESULTS = {}


def report(n, title, ok, detail):
    line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def only(inputs, name, count):
    s = dataclasses.replace(inputs.subgroup(name), count=count)
    return dataclasses.replace(inputs, subgroups=[s])


@pytest.fixture(scope="module")
def surf_coast():
    return synthetic.surf_coast(SEED)


@pytest.fixture(scope="module")
def full_run(surf_coast):
    t0 = time.perf_counter()
    result = pipeline.generate(surf_coast, SEED)
    doc = pipeline.to_document(result, surf_coast)
    return result, doc, time.perf_counter() - t0


# --------------------------------------------------------------------------


def test_01_visitor_fidelity(surf_coast):
    inputs = only(surf_coast, "VisitorDaytime", 10_000)
    t0 = time.perf_counter()
    doc = pipeline.to_document(pipeline.generate(inputs, SEED, annotate=False), inputs)
    elapsed = time.perf_counter() - t0
    (err,) = population_errors(doc, inputs)
    worst = err.max_abs()
    ok = worst <= VISITOR_MAX_PP and elapsed < FIDELITY_RUNTIME_S
    report(1, "VisitorDaytime 10k fidelity", ok,
           f"max |error| {worst:.2f} pp (limit {VISITOR_MAX_PP}), {elapsed:.1f} s (limit {FIDELITY_RUNTIME_S:g})")


def test_02_resident_fidelity(surf_coast):
    inputs = only(surf_coast, "Resident", 10_000)
    doc = pipeline.to_document(pipeline.generate(inputs, SEED, annotate=False), inputs)
    (err,) = population_errors(doc, inputs)
    k, n = err.argmax()
    value = float(err.values[k, n])
    cell = (inputs.activities.names[k], n + 1)
    ok = (err.max_abs() <= RESIDENT_MAX_PP and cell == RESIDENT_PEAK_CELL and value > 0
          and abs(value - RESIDENT_PEAK_PP) <= RESIDENT_PEAK_BAND)
    report(2, "Resident 10k duration-stressed fidelity", ok,
           f"peak {value:+.2f} pp at {cell} (expect +{RESIDENT_PEAK_PP}±{RESIDENT_PEAK_BAND} at "
           f"{RESIDENT_PEAK_CELL}, max {RESIDENT_MAX_PP})")


def ring_region(n_towns=6, shops_per_town=8, home_alloc=DRAWS):
    rows = []
    for t in range(n_towns):
        # unequal spacing so inverse-distance weights differ between towns
        ang = 2 * np.pi * t / n_towns
        rad = 8000.0 + 3000.0 * t
        cx, cy = rad * np.cos(ang), rad * np.sin(ang)
        rows.append((cx, cy, f"T{t}", home_alloc, {"home"}))
        for j in range(shops_per_town):
            rows.append((cx + 50.0 * (j - shops_per_town / 2), cy + 30.0, f"T{t}", 1, {"shop"}))
    return make_locations(rows)


def single_trip_config(g):
    return {"steps": 3, "activities": ["home", "shop"], "subgroups": [{
        "name": "Trip", "count": DRAWS, "travel_factor": g, "durations": {"home": 1, "shop": 1},
        "distribution": {"home": [1, 0, 1], "shop": [0, 1, 0]},
        "locations": {"home": ["home"], "shop": ["shop"]}}]}


def test_03_stay_probability():
    loc = ring_region()
    measured = {}
    for g in (0.2, 0.5, 0.8):
        inputs = parse_config(single_trip_config(g), loc)
        result = pipeline.generate(inputs, SEED, annotate=False)
        same = [loc.locality[a.location_ids[0]] == loc.locality[a.location_ids[1]] for a in result.agents]
        measured[g] = float(np.mean(same))
    ok = all(abs(p - (1 - g)) <= STAY_TOL for g, p in measured.items())
    detail = ", ".join(f"g={g}: {p:.4f} vs {1 - g:.1f}" for g, p in measured.items())
    report(3, "stay probability 1 - g", ok, f"{detail} (tol {STAY_TOL})")


def test_04_gravity_weighting():
    # current locality S plus two candidates; masses 10, 30, 20; distances 5 km and 15 km
    loc = make_locations([(0.0, 0.0, "S", 10, {"shop"}), (5000.0, 0.0, "A", 30, {"shop"}),
                          (0.0, 15000.0, "B", 20, {"shop"})])
    g = 0.5
    # by hand: dist0 = (g/(1-g)) / (1/5000 + 1/15000) = 3750
    w = np.array([10 / 3750, 30 / 5000, 20 / 15000])
    expected = w / w.sum()          # 0.2667, 0.6, 0.1333
    c = places.compute_centroids(loc)
    chooser = places.build_chooser(loc, c, loc.has_any_tag({"shop"}), g)
    rng = np.random.default_rng(SEED)
    picks = np.array([loc.locality_index[chooser.draw(c.index("S"), rng)] for _ in range(DRAWS)])
    freq = np.bincount(picks, minlength=3) / DRAWS
    order = [c.index(n) for n in ("S", "A", "B")]
    freq = freq[order]
    ok = np.all(np.abs(freq - expected) <= GRAVITY_TOL)
    report(4, "gravity weighting", ok,
           f"measured {np.round(freq, 4).tolist()} vs {np.round(expected, 4).tolist()} (tol {GRAVITY_TOL})")


def test_05_home_hard_cap():
    rng = np.random.default_rng(SEED)
    violations = 0
    for run in range(CAP_RUNS):
        rows = []
        for t in range(int(rng.integers(1, 5))):
            for j in range(int(rng.integers(1, 6))):
                rows.append((t * 10000.0 + j, 0.0, f"T{t}", int(rng.integers(0, 6)), {"home"}))
        rows.append((0.0, 50.0, "T0", 1, {"home"}))
        loc = make_locations(rows)
        total = int(loc.allocation.sum())
        raw = {"steps": 2, "activities": ["home"], "subgroups": [{
            "name": "S", "count": int(rng.integers(1, total + 1)), "travel_factor": 0.5,
            "durations": {"home": 1}, "distribution": {"home": [1, 1]}, "locations": {"home": ["home"]}}]}
        result = pipeline.generate(parse_config(raw, loc), SEED + run, annotate=False)
        violations += int(np.any(result.ledger.assigned > result.ledger.initial))
        violations += int(np.any(result.ledger.remaining < 0))
    loc = make_locations([(0.0, 0.0, "A", 2, {"home"}), (1.0, 0.0, "A", 2, {"home"})])
    raw["subgroups"][0]["count"] = 5
    try:
        pipeline.generate(parse_config(raw, loc), SEED, annotate=False)
        loud = False
    except places.CapacityError:
        loud = True
    ok = violations == 0 and loud
    report(5, "home hard cap", ok,
           f"{violations} cap violations over {CAP_RUNS} runs; P > sum(a) raised CapacityError: {loud}")


ENV = [0.0] + sorted(ENVIRONMENTAL.values())
TRANS = [0.0] + sorted(TRANSMITTED.values())
SEQ_CHECKS = []

alerts = st.one_of(
    st.tuples(st.just("environmental"), st.sampled_from(["Smoke", "Fire", None])),
    st.tuples(st.just("transmitted"), st.sampled_from(["Advice", "WatchAndAct", "EvacuateNow", None])),
)


@settings(max_examples=BAROMETER_SEQUENCES, deadline=None, database=None)
@given(st.lists(alerts, min_size=1, max_size=25))
def _barometer_property(seq):
    b = Barometer()
    ok = True
    for category, alert in seq:
        new = respond.update_barometer(b, alert, category)
        ok &= new.env >= b.env
        if category == "transmitted":
            ok &= new.trans == (TRANSMITTED[alert] if alert else 0.0)
        b = new
    SEQ_CHECKS.append(ok)
    assert ok


def test_06_barometer_algebra():
    exact = respond.rank(ENVIRONMENTAL["Smoke"], TRANSMITTED["WatchAndAct"]) == SMOKE_WATCH
    grid = np.array([[respond.rank(e, t) for t in TRANS] for e in ENV])
    monotone = bool(np.all(np.diff(grid, axis=0) >= 0) and np.all(np.diff(grid, axis=1) >= 0))
    top = grid.max()
    SEQ_CHECKS.clear()
    try:
        _barometer_property()
        seq_ok = True
    except AssertionError:
        seq_ok = False
    n = len(SEQ_CHECKS)
    ok = exact and monotone and top == MAX_RANK and seq_ok and n >= BAROMETER_SEQUENCES
    report(6, "barometer algebra", ok,
           f"r(Smoke,WatchAndAct)={respond.rank(0.3, 0.2)}, {grid.shape[0]}x{grid.shape[1]} lattice "
           f"monotone={monotone}, max r={top}, {n} random sequences ok={seq_ok}")


def test_07_attribute_invariants(full_run, surf_coast):
    result, doc, _ = full_run
    blocks = {}
    for a in result.agents:
        blocks.setdefault(a.subgroup, []).append(a.attributes)
    n = sum(len(v) for v in blocks.values())
    ordered = all(b.init_threshold <= b.act_threshold for v in blocks.values() for b in v)
    one_flag = all(not (b.go_home_after_dependants and b.go_home_before_leaving)
                   for v in blocks.values() for b in v)
    equal_ok = True
    gaps = []
    for s in surf_coast.subgroups:
        v = blocks[s.name]
        if not s.behaviour.stay:
            equal_ok &= all(b.init_threshold == b.act_threshold for b in v)
        dep = np.mean([b.has_dependant for b in v])
        home = np.mean([b.go_home_after_dependants or b.go_home_before_leaving for b in v])
        for what, got, p in (("dependant", dep, s.behaviour.prob_of_dependant),
                             ("go_home", home, s.behaviour.prob_of_go_home)):
            sd = np.sqrt(p * (1 - p) / len(v))
            gaps.append((s.name, what, got - p, (got - p) / sd if sd else 0.0))
    worst = max(gaps, key=lambda g: abs(g[2]))
    ok = n == SCALE_AGENTS and ordered and equal_ok and one_flag and abs(worst[2]) <= ATTR_TOL
    report(7, "attribute invariants", ok,
           f"{n} agents, INIT<=ACT all={ordered}, stay=0 INIT=ACT all={equal_ok}, "
           f"largest frequency gap {worst[2] * 100:+.2f} pp ({worst[0]} {worst[1]}, binomial z {worst[3]:+.2f}, "
           f"tol {ATTR_TOL * 100:g} pp)")


def micro(a, stops=None):
    stops = stops or [("home", 0.0, 0.0, None)]
    elems = []
    for i, (kind, x, y, end) in enumerate(stops):
        if i:
            elems.append(Leg())
        elems.append(Activity(kind, x, y, end))
    return Person("1", a.to_attributes(), elems)


def branch(init, act, dep=None, after=False, before=False, at_work=False, alert="Advice"):
    a = BdiAttributes("t.Resident", init, act, has_dependant=dep is not None, dependant_location=dep,
                      go_home_after_dependants=after, go_home_before_leaving=before,
                      evac_name="Far", evac_location=(30000.0, 0.0), invac_location=(0.0, 400.0))
    stops = [("home", 0.0, 0.0, 60), ("work", 4000.0, 0.0, None)] if at_work else None
    doc = PopulationDocument([micro(a, stops)])
    sc = FireScenario(start=0.0, end=7200.0, messages=[Message(1200.0, None, alert)])
    res = respond.run_scenario(doc, sc)
    return [e.kind for e in res.events if e.kind not in ("ReceiveMsg", "PerceiveEnv", "Arrived")]


def test_08_goal_plan_branches():
    cases = {
        "dependant nearby": (branch(0.05, 0.9, dep=(300.0, 0.0)),
                             ["InitTriggered", "GoToDependant"]),
        "dependant far, home first": (branch(0.05, 0.9, dep=(3000.0, 3000.0), before=True, at_work=True),
                                      ["InitTriggered", "GoHome", "GoToDependant"]),
        "dependant then home": (branch(0.05, 0.9, dep=(300.0, 0.0), after=True),
                                ["InitTriggered", "GoToDependant", "GoHome"]),
        "no dependant, go home": (branch(0.05, 0.9, at_work=True), ["InitTriggered", "GoHome"]),
        "leave now": (branch(0.05, 0.1, at_work=True, alert="EvacuateNow"),
                      ["InitTriggered", "ActTriggered", "LeaveNow"]),
        "home then leave": (branch(0.05, 0.1, before=True, at_work=True, alert="EvacuateNow"),
                            ["InitTriggered", "ActTriggered", "GoHome", "LeaveNow"]),
    }
    bad = [k for k, (got, want) in cases.items() if got != want]
    # stay-and-defend: every attainable score, including the maximum 0.7, leaves ACT >= 0.7 untouched
    persons = []
    for i, act in enumerate([0.7, 0.72, 0.85, 1.0]):
        a = BdiAttributes("t.Resident", 0.1, act, evac_name="Far", evac_location=(30000.0, 0.0),
                          invac_location=(0.0, 400.0))
        p = micro(a)
        p.id = str(i)
        persons.append(p)
    sc = FireScenario(start=0.0, end=3600.0, fire=[(0.0, respond.parse_geometry({"point": [0.0, 0.0]}))],
                      messages=[Message(600.0, None, "EvacuateNow")])
    res = respond.run_scenario(PopulationDocument(persons), sc)
    leavers = sum(e.kind == "LeaveNow" for e in res.events)
    ok = not bad and leavers == 0
    report(8, "goal-plan conformance", ok,
           f"{len(cases) - len(bad)}/{len(cases)} branch sequences exact"
           + (f" (mismatch: {', '.join(bad)})" if bad else "")
           + f", LeaveNow from ACT>=0.7 agents: {leavers}")


def test_09_scenario_contrast(surf_coast):
    inputs = pipeline.with_agent_total(surf_coast, 1000)
    doc = pipeline.to_document(pipeline.generate(inputs, SEED), inputs)
    medians = {}
    for label, early in (("early", True), ("late", False)):
        sc = respond.scenario_from_dict(synthetic.anglesea_scenario(early))
        medians[label] = respond.run_scenario(doc, sc).summary["median_leave_time"]
    ok = None not in medians.values() and medians["early"] < medians["late"]
    fmt = {k: (io.format_time(v) if v is not None else "none") for k, v in medians.items()}
    report(9, "scenario contrast", ok,
           f"median LeaveNow early {fmt['early']} vs late {fmt['late']}")


def test_10_determinism_round_trip(surf_coast, tmp_path):
    inputs = pipeline.with_agent_total(surf_coast, 1000)
    pops, logs = [], []
    sc = respond.scenario_from_dict(synthetic.anglesea_scenario(True))
    for k in range(2):
        doc = pipeline.to_document(pipeline.generate(inputs, SEED), inputs)
        p = tmp_path / f"pop{k}.xml"
        io.write_population_xml(doc, p)
        pops.append(p.read_bytes())
        e = tmp_path / f"events{k}.csv"
        respond.write_events(respond.run_scenario(io.read_population_xml(p), sc).events, e)
        logs.append(e.read_bytes())
    back = io.read_population_xml(tmp_path / "pop0.xml")
    same_doc = back == doc and len(back.persons) == 1000
    ok = pops[0] == pops[1] and logs[0] == logs[1] and same_doc
    report(10, "determinism and round trip", ok,
           f"population.xml identical={pops[0] == pops[1]}, events.csv identical={logs[0] == logs[1]}, "
           f"read(write(doc)) == doc on {len(back.persons)} agents: {same_doc}")


def test_11_scale(full_run, surf_coast):
    result, doc, elapsed = full_run
    n_loc = len(surf_coast.locations)
    ok = (len(doc.persons) == SCALE_AGENTS and n_loc >= 39_000 and elapsed <= SCALE_TARGET_S)
    report(11, "scale", ok,
           f"{len(doc.persons)} agents over {n_loc} locations in {elapsed:.1f} s "
           f"(target {SCALE_TARGET_S:g} s, ceiling {SCALE_CEILING_S:g} s)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
