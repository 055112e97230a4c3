"""Generate the synthetic Surf Coast population and check it against its inputs.

    python3 demos/surf_coast_population.py [--agents 50000] [--seed 2024] [--out out/surf_coast]

Writes population.xml and a per-subgroup error report, then prints the
largest deviation for each subgroup.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from evacpop import io, pipeline, synthetic, validate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--agents", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--out", default="out/surf_coast")
    args = ap.parse_args()

    out = Path(args.out)
    inputs = pipeline.with_agent_total(synthetic.surf_coast(args.seed), args.agents)
    print(f"{len(inputs.locations)} locations in {len(set(inputs.locations.locality))} localities")
    for s in inputs.subgroups:
        print(f"  {s.name:<18} {s.count:>6} agents, travel factor {s.travel_factor}")

    t0 = time.perf_counter()
    result = pipeline.generate(inputs, args.seed)
    doc = pipeline.to_document(result, inputs)
    out.mkdir(parents=True, exist_ok=True)
    io.write_population_xml(doc, out / "population.xml")
    print(f"generated and wrote {len(doc.persons)} agents in {time.perf_counter() - t0:.1f} s")

    errors = validate.population_errors(doc, inputs)
    names = inputs.activities.names
    steps = inputs.grid.steps
    hours = 24 // steps
    for e in errors:
        k, n = e.argmax()
        span = f"{n * hours:02d}:00-{(n + 1) * hours:02d}:00"
        print(f"  {e.subgroup:<18} max |error| {e.max_abs():5.2f} pp  ({names[k]}, {span}, "
              f"{e.values[k, n]:+.2f})")
    summary = validate.write_error_report(errors, inputs.activities, out / "report")
    print(summary.line())

    # where do day visitors spend the afternoon?
    vd = [a for a in result.agents if a.subgroup == "VisitorDaytime"]
    if vd:
        towns = [inputs.locations.locality[a.location_ids[len(a.location_ids) // 2]] for a in vd]
        labels, counts = np.unique(towns, return_counts=True)
        top = sorted(zip(counts, labels), reverse=True)[:5]
        print("day visitors, middle activity locality:",
              ", ".join(f"{lab} {c / len(vd):.0%}" for c, lab in top))


if __name__ == "__main__":
    main()
