import numpy as np
import pytest

from evacpop import pipeline
from evacpop.io import Activity, Attribute, Leg, Person, PopulationDocument, STRING
from evacpop.model import parse_config
from evacpop.validate import (ActivityMismatch, ErrorMatrix, distribution_error, occupancy_matrix,
                              population_errors, summarize, write_error_report)

from conftest import small_config, two_town_locations


@pytest.fixture
def inputs():
    return parse_config(small_config(), two_town_locations())


def agent(pid, inputs, stops):
    t = inputs.subgroups[0].bdi_agent_type
    elems = []
    for i, (kind, end) in enumerate(stops):
        if i:
            elems.append(Leg())
        elems.append(Activity(kind, 0.0, 0.0, end))
    return Person(pid, [Attribute("BDIAgentType", STRING, t)], elems)


def test_home_all_day(inputs):
    occ, n = occupancy_matrix(PopulationDocument([agent("1", inputs, [("home", None)])]), inputs)["Local"]
    assert n == 1
    np.testing.assert_array_equal(occ, [[1, 1, 1, 1], [0, 0, 0, 0]])


def test_two_agents_split(inputs):
    # 4 steps of 6 h; the shop visit covers the step-2 midpoint (09:00)
    doc = PopulationDocument([agent("1", inputs, [("home", None)]),
                              agent("2", inputs, [("home", 7 * 3600), ("shop", 10 * 3600), ("home", None)])])
    occ, _ = occupancy_matrix(doc, inputs)["Local"]
    np.testing.assert_allclose(occ[:, 1], [0.5, 0.5])
    np.testing.assert_allclose(occ[:, 0], [1.0, 0.0])


def test_unknown_activity(inputs):
    doc = PopulationDocument([agent("1", inputs, [("home", 60), ("gym", None)])])
    with pytest.raises(ActivityMismatch, match="gym"):
        occupancy_matrix(doc, inputs)


def test_exact_occupancy_gives_zero_error(inputs):
    d = inputs.subgroups[0].distribution.values
    e = distribution_error(d, d)
    assert e.max_abs() == 0.0
    assert summarize([e], inputs.activities).passed


def test_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        distribution_error(np.zeros((2, 3)), np.zeros((2, 4)))


def test_columns_sum_to_zero(inputs):
    inputs = parse_config(small_config(count=400), two_town_locations())
    doc = pipeline.to_document(pipeline.generate(inputs, seed=2, annotate=False), inputs)
    (e,) = population_errors(doc, inputs)
    np.testing.assert_allclose(e.values.sum(axis=0), 0.0, atol=0.01)


@pytest.mark.parametrize("peak,passed", [(5.04, True), (5.5, True), (6.2, False)])
def test_tolerance_verdict(tmp_path, peak, passed):
    v = np.zeros((2, 4))
    v[1, 2] = peak
    v[0, 2] = -peak
    s = write_error_report([ErrorMatrix("Resident", v, 10)], ["home", "work"], tmp_path)
    assert s.passed is passed
    line = (tmp_path / "summary.txt").read_text()
    assert line.startswith("PASS" if passed else "FAIL")
    assert f"{peak:.2f} pp" in line and "Resident" in line and "step 3" in line
    rows = (tmp_path / "error_Resident.csv").read_text().splitlines()
    assert rows[0] == "activity,step1,step2,step3,step4"
    assert rows[2].split(",")[3] == f"{peak:.2f}"


def test_all_zero_report_passes(tmp_path):
    s = write_error_report([ErrorMatrix("S", np.zeros((1, 3)))], ["home"], tmp_path)
    assert s.passed and s.max_error == 0.0


def test_unit_duration_oracle_large_population():
    # 100k agents, all durations 1: every cell within 0.5 pp
    raw = small_config(count=100_000)
    raw["steps"] = 6
    raw["subgroups"][0]["distribution"] = {"home": [1.0, 0.7, 0.4, 0.5, 0.8, 1.0],
                                           "shop": [0.0, 0.3, 0.6, 0.5, 0.2, 0.0]}
    locs = two_town_locations()
    locs.allocation[:] = 100_000
    inputs = parse_config(raw, locs)
    doc = pipeline.to_document(pipeline.generate(inputs, seed=7, annotate=False), inputs)
    (e,) = population_errors(doc, inputs)
    assert e.agents == 100_000
    assert e.max_abs() <= 0.5
