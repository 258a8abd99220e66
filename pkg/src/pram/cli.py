"""Command line entry point: ``pram run | validate | compile | oracle``.

Exit codes: 0 success, 1 runtime error, 2 validation error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from pram.compiler import CompileError, compile_population, read_records
from pram.engine import EngineError, fmt, run
from pram.oracle import StationarityError, comparison_rows, markov_trajectory, simulate_agents
from pram.scenario import (
    Scenario,
    ScenarioError,
    builtin_names,
    groups_to_dicts,
    load_scenario,
    probe_attributes,
)

log = logging.getLogger("pram")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def run_scenario(s: Scenario, out_dir, iterations: int | None = None, threads: int = 1) -> int:
    """Run ``s`` and write trajectory.csv, probes.csv and summary.txt into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = replace(s.config, threads=threads)
    try:
        traj = run(s.population, s.rules, iterations or s.iterations, s.probes, config)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    traj.write_masses(out / "trajectory.csv")
    traj.write_probes(out / "probes.csv")
    traj.write_summary(out / "summary.txt")
    return EXIT_OK


def cmd_run(args) -> int:
    s = load_scenario(args.scenario)
    return run_scenario(s, args.out, args.iterations, args.threads)


def cmd_validate(args) -> int:
    s = load_scenario(args.scenario)
    print(
        f"ok: {len(s.sites)} sites, {len(s.population)} groups, {len(s.rules)} rules, "
        f"{len(s.probes)} probes, {s.iterations} iterations"
    )
    return EXIT_OK


def cmd_compile(args) -> int:
    s = load_scenario(args.scenario)
    try:
        records = read_records(args.records, args.delimiter)
        pop = compile_population(records, s.rules, s.sites, probe_attributes(s))
    except (CompileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = yaml.safe_dump({"groups": groups_to_dicts(pop)}, sort_keys=False, default_flow_style=None)
    Path(args.out).write_text(text)
    print(f"{len(records)} records -> {len(pop)} groups", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    s = load_scenario(args.scenario)
    t = args.iterations or s.iterations
    config = replace(s.config, threads=args.threads)
    try:
        traj = run(s.population, s.rules, t, (), config)
        mc = simulate_agents(s.population, s.rules, t, args.seed, args.replicates, args.agents,
                             s.config.normalization, args.threads)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    markov = None
    try:
        markov = markov_trajectory(s.population, s.rules, t, s.config.normalization)[t]
    except StationarityError:
        pass
    header = ["signature", "engine", "oracle_mean", "std_error", "z"]
    if markov is not None:
        header.append("markov")
    rows = comparison_rows(traj.at(t), mc, markov)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[0], *(fmt(x) for x in row[1:])])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pram", description="Lifted redistribution simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    scen_help = "scenario file, or a built-in name: " + ", ".join(builtin_names())

    r = sub.add_parser("run", help="run a scenario and write CSV outputs")
    r.add_argument("scenario", help=scen_help)
    r.add_argument("--iterations", type=int)
    r.add_argument("--out", default="out")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="load and check a scenario")
    v.add_argument("scenario", help=scen_help)
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("compile", help="collapse individual records into initial groups")
    c.add_argument("--records", required=True)
    c.add_argument("--scenario", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--delimiter")
    c.set_defaults(func=cmd_compile)

    o = sub.add_parser("oracle", help="compare the engine with an agent-level Monte Carlo run")
    o.add_argument("scenario", help=scen_help)
    o.add_argument("--agents", type=int)
    o.add_argument("--replicates", type=int, default=50)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--iterations", type=int)
    o.add_argument("--threads", type=int, default=1)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    if getattr(args, "iterations", None) is not None and args.iterations < 1:
        print("error: --iterations must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
