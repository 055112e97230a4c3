"""A synthetic coastal region shaped like the Surf Coast test case.

Real address points are not redistributable, so the region is generated:
eight towns with Gaussian-scattered locations, two out-of-region source nodes
for day visitors, and a handful of refuges.  The scenario config with the
reference subgroup inputs ships as ``data/surf_coast.json``.

Run ``python3 -m evacpop.synthetic OUTDIR`` to write the full input set.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .io import LocationTable, RefugeSet, write_locations, write_refuges
from .model import ScenarioInputs, parse_config

# name, centre x, centre y, spread (m), relative size
TOWNS = [
    ("Torquay", 766700.0, 5754400.0, 1500.0, 1.00),
    ("Jan Juc", 764200.0, 5752600.0, 800.0, 0.35),
    ("Anglesea", 761500.0, 5745500.0, 1100.0, 0.55),
    ("Aireys Inlet", 760600.0, 5740200.0, 700.0, 0.20),
    ("Fairhaven", 759600.0, 5737600.0, 500.0, 0.12),
    ("Lorne", 759300.0, 5729900.0, 900.0, 0.40),
    ("Moriac", 758800.0, 5763000.0, 700.0, 0.15),
    ("Winchelsea", 746000.0, 5765500.0, 800.0, 0.25),
]
SOURCES = [("Melbourne", 795000.0, 5775000.0, 12000), ("Colac", 728000.0, 5752000.0, 4000)]

# location kinds: tags, count per unit town size, allocation range
KINDS = [
    (("residential",), 9500, (1, 3)),
    (("accommodation",), 110, (40, 110)),
    (("business",), 1400, (1, 6)),
    (("shops",), 700, (2, 12)),
    (("other",), 1100, (1, 5)),
    (("recreation",), 110, (5, 30)),
    (("school", "dependant"), 6, (50, 200)),
    (("aged_care", "other", "dependant"), 4, (20, 60)),
    (("landmark",), 12, (20, 100)),
    (("park",), 10, (20, 80)),
    (("beach",), 14, (20, 150)),
    (("beach", "popular_beach"), 4, (200, 600)),
]

# coastal towns only
COASTAL_ONLY = {"beach", "popular_beach", "accommodation"}
INLAND = {"Moriac", "Winchelsea"}


def surf_coast_locations(seed: int = 2024) -> LocationTable:
    rng = np.random.default_rng(seed)
    ids, xs, ys, locs, allocs, tags = [], [], [], [], [], []
    n = 0
    for town, cx, cy, spread, size in TOWNS:
        for kind, per_unit, (lo, hi) in KINDS:
            if town in INLAND and COASTAL_ONLY.intersection(kind):
                continue
            count = max(1, int(round(per_unit * size)))
            pts = rng.normal(0.0, spread, size=(count, 2))
            a = rng.integers(lo, hi + 1, size=count)
            for (dx, dy), al in zip(pts, a):
                ids.append(str(n))
                xs.append(round(cx + dx, 2))
                ys.append(round(cy + dy, 2))
                locs.append(town)
                allocs.append(int(al))
                tags.append(frozenset(kind))
                n += 1
    for town, x, y, cap in SOURCES:
        ids.append(str(n))
        xs.append(x)
        ys.append(y)
        locs.append(town)
        allocs.append(cap)
        tags.append(frozenset({"source"}))
        n += 1
    return LocationTable(ids, xs, ys, locs, allocs, tags)


def surf_coast_refuges(seed: int = 2024) -> RefugeSet:
    rng = np.random.default_rng(seed + 1)
    ids, xs, ys, locs, caps = [], [], [], [], []
    for town, cx, cy, spread, size in TOWNS:
        for j in range(1 if size < 0.3 else 2):
            dx, dy = rng.normal(0.0, spread / 2, size=2)
            ids.append(f"{town.replace(' ', '')}-{j + 1}")
            xs.append(round(cx + dx, 2))
            ys.append(round(cy + dy, 2))
            locs.append(town)
            caps.append(int(rng.integers(500, 3000)))
    return RefugeSet(ids, xs, ys, locs, caps)


def config_path() -> Path:
    return Path(str(resources.files("evacpop") / "data" / "surf_coast.json"))


def surf_coast_config() -> dict:
    return json.loads(config_path().read_text())


def surf_coast(seed: int = 2024) -> ScenarioInputs:
    """Surf Coast scenario inputs over the synthetic region."""
    return parse_config(surf_coast_config(), surf_coast_locations(seed), surf_coast_refuges(seed))


def _rect(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]


def anglesea_fire() -> list:
    """Fire front growing toward Anglesea from the north-west over the afternoon."""
    out = []
    for i, t in enumerate(range(11, 19)):
        reach = 3000.0 + 1500.0 * i
        out.append({"time": f"{t:02d}:00:00",
                    "geometry": {"polygon": _rect(752000.0, 5750000.0 - reach, 756000.0 + reach * 0.4, 5756000.0)}})
    return out


def anglesea_scenario(early_warning: bool) -> dict:
    area = {"polygon": _rect(755000.0, 5740000.0, 768000.0, 5750000.0)}
    if early_warning:
        messages = [
            {"time": "11:30:00", "area": area, "alert": "Advice"},
            {"time": "12:30:00", "area": area, "alert": "WatchAndAct"},
            {"time": "13:30:00", "area": area, "alert": "EvacuateNow"},
        ]
    else:
        messages = [{"time": "16:30:00", "area": area, "alert": "EvacuateNow"}]
    return {"start": "10:00:00", "end": "20:00:00", "tick": 60, "speed_kmh": 40,
            "smoke_radius": 5000, "fire_radius": 1000, "nearby_radius": 1000,
            "fire": anglesea_fire(), "messages": messages}


def write_inputs(out_dir, seed: int = 2024) -> dict:
    """Write config, location and refuge tables and two example scenarios."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = surf_coast_config()
    cfg["locations"] = "surf_coast.locations.csv"
    cfg["refuges"] = "surf_coast.refuges.csv"
    paths = {
        "config": out / "surf_coast.json",
        "locations": out / cfg["locations"],
        "refuges": out / cfg["refuges"],
        "scenario_early": out / "anglesea_early.json",
        "scenario_late": out / "anglesea_late.json",
    }
    paths["config"].write_text(json.dumps(cfg, indent=2) + "\n")
    write_locations(surf_coast_locations(seed), paths["locations"])
    write_refuges(surf_coast_refuges(seed), paths["refuges"])
    paths["scenario_early"].write_text(json.dumps(anglesea_scenario(True), indent=2) + "\n")
    paths["scenario_late"].write_text(json.dumps(anglesea_scenario(False), indent=2) + "\n")
    return paths


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python3 -m evacpop.synthetic", description=__doc__.splitlines()[0])
    ap.add_argument("out", help="output directory")
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)
    for name, p in write_inputs(args.out, args.seed).items():
        print(f"{name}: {p}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
