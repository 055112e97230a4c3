import sys

import numpy as np
import pytest

from evacpop.io import LocationTable, RefugeSet
from evacpop.model import parse_config


def make_locations(rows):
    """rows: (x, y, locality, allocation, tags)"""
    ids = [str(i) for i in range(len(rows))]
    xs, ys, locs, allocs, tags = zip(*rows) if rows else ([], [], [], [], [])
    return LocationTable(ids, xs, ys, list(locs), allocs, [frozenset(t) for t in tags])


def two_town_locations():
    rows = []
    for town, cx in (("A", 0.0), ("B", 10000.0)):
        for j in range(5):
            rows.append((cx + 10 * j, 0.0, town, 50, {"home"}))
            rows.append((cx + 10 * j, 100.0, town, 5, {"shop"}))
        rows.append((cx, 300.0, town, 10, {"school", "dependant"}))
    return make_locations(rows)


def two_town_refuges():
    return RefugeSet(["ra", "rb"], [0.0, 10000.0], [500.0, 500.0], ["A", "B"], [100, 100])


def small_config(count=100, g=0.5, shop_duration=1):
    return {
        "name": "tiny",
        "steps": 4,
        "activities": ["home", "shop"],
        "subgroups": [{
            "name": "Local",
            "count": count,
            "travel_factor": g,
            "durations": {"home": 1, "shop": shop_duration},
            "distribution": {"home": [1.0, 0.5, 0.5, 1.0], "shop": [0.0, 0.5, 0.5, 0.0]},
            "locations": {"home": ["home"], "shop": ["shop"]},
            "behaviour": {"prob_of_dependant": 0.5, "prob_of_go_home": 0.5, "stay": True,
                          "threshold_min": 0.1, "threshold_max": 0.5},
        }],
    }


@pytest.fixture
def tiny_inputs():
    return parse_config(small_config(), two_town_locations(), two_town_refuges())


class StubRng:
    """Deterministic stand-in for a numpy Generator."""

    def __init__(self, uniforms=None, jitter=0.0):
        self.uniforms = list(uniforms or [])
        self.jitter = jitter

    def random(self, size=None):
        if size is None:
            return self.uniforms.pop(0)
        out, self.uniforms = self.uniforms[:size], self.uniforms[size:]
        return np.array(out)

    def uniform(self, lo=0.0, hi=1.0, size=None):
        return self.jitter


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
