"""Command line: ``evacpop generate | validate | simulate``.

Exit codes: 0 success, 1 runtime failure (including a failed tolerance
check), 2 bad input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import secrets
import sys
import time
from pathlib import Path

from . import __version__, io, pipeline, respond, validate
from .model import ConfigError, config_to_dict, load_config, parse_config, validate_inputs
from .places import CapacityError

log = logging.getLogger("evacpop")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2

INPUT_ERRORS = (ConfigError, io.InputFormatError, respond.ScenarioError,
                validate.ActivityMismatch, FileNotFoundError, IsADirectoryError, KeyError)


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, seed, inputs: dict, outputs: list,
                   timings: dict, config: dict | None = None) -> Path:
    manifest = {
        "tool": "evacpop",
        "version": __version__,
        "command": command,
        "seed": seed,
        "inputs": {name: {"path": str(p), "sha256": sha256(p)} for name, p in inputs.items() if p},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
    }
    if config is not None:
        manifest["config"] = config
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    inputs = load_config(args.config, args.locations, args.refuges)
    if args.agents is not None:
        inputs = pipeline.with_agent_total(inputs, args.agents)
    report = validate_inputs(inputs)
    for w in report.warnings:
        log.warning(w.message)
    if not report.ok:
        for e in report.errors:
            log.error(e.message)
        return EXIT_INPUT
    annotate = not args.no_annotate
    if annotate and inputs.refuges is None and inputs.population:
        raise ConfigError("annotation needs a refuge table (--refuges) or pass --no-annotate")
    seed = _seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {"load": time.perf_counter() - t0}
    result = pipeline.generate(inputs, seed, annotate=annotate)
    timings.update(result.timings)
    t1 = time.perf_counter()
    pop = out / "population.xml"
    io.write_population_xml(pipeline.to_document(result, inputs), pop)
    timings["write"] = time.perf_counter() - t1
    cfg = config_to_dict(inputs)
    write_manifest(out, "generate", seed,
                   {"config": args.config, "locations": args.locations, "refuges": args.refuges},
                   [pop], timings, cfg)
    log.info("wrote %d agents to %s", len(result.agents), pop)
    return EXIT_OK


def _config_only(path):
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: cannot parse JSON: {exc}") from None
    empty = io.LocationTable([], [], [], [], [], [])
    return parse_config(raw, empty, None, check_maps=False)


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    inputs = _config_only(args.config)
    doc = io.read_population_xml(args.population)
    errors = validate.population_errors(doc, inputs)
    out = Path(args.out)
    summary = validate.write_error_report(errors, inputs.activities, out, args.tolerance)
    print(summary.line())
    outputs = sorted(out.glob("error_*.csv")) + [out / "summary.txt"]
    write_manifest(out, "validate", None, {"config": args.config, "population": args.population},
                   outputs, {"total": time.perf_counter() - t0})
    return EXIT_OK if summary.passed else EXIT_RUNTIME


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    scenario = respond.load_scenario(args.scenario)
    doc = io.read_population_xml(args.population)
    seed = _seed(args)
    result = respond.run_scenario(doc, scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    events = out / "events.csv"
    respond.write_events(result.events, events)
    summary = out / "summary.json"
    summary.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out, "simulate", seed, {"population": args.population, "scenario": args.scenario},
                   [events, summary], {"total": time.perf_counter() - t0})
    print(json.dumps(result.summary["phases"], sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evacpop", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build population.xml from a scenario config")
    g.add_argument("--config", required=True)
    g.add_argument("--locations", help="locations CSV (overrides the config)")
    g.add_argument("--refuges", help="refuges CSV (overrides the config)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--agents", type=int, help="rescale subgroup counts to this total")
    g.add_argument("--no-annotate", action="store_true", help="skip behaviour attributes")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", help="compare a population against its input distributions")
    v.add_argument("--population", required=True)
    v.add_argument("--config", required=True)
    v.add_argument("--out", required=True, help="report directory")
    v.add_argument("--tolerance", type=float, default=validate.DEFAULT_TOLERANCE,
                   help="max |error| in percentage points (default %(default)s)")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="run a fire/alert scenario over an annotated population")
    s.add_argument("--population", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CapacityError, OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
