"""Command line entry point: ``fixflex run | batch | validate | synth``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from fixflex.config import Params, load_config, load_matrix
from fixflex.errors import ConfigError, FixflexError
from fixflex.runner import EXIT_INVALID, load_inputs, run_batch, run_scenario, validate_inputs
from fixflex.synthetic import CitySpec, write_synthetic_city


def _setup_logging():
    level = os.environ.get("FIXFLEX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def build_parser():
    ap = argparse.ArgumentParser(prog="fixflex", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--config", required=True, help="scenario YAML file")
    r.add_argument("--inputs", required=True, help="inputs directory")
    r.add_argument("--out", default="out", help="output root (default: out)")
    r.add_argument("--seed", type=int, default=None, help="override master_seed")

    b = sub.add_parser("batch", help="run every scenario of a matrix CSV")
    b.add_argument("--matrix", required=True)
    b.add_argument("--inputs", required=True)
    b.add_argument("--out", default="out")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("-j", "--jobs", type=int, default=1, help="parallel worker processes")

    v = sub.add_parser("validate", help="load and sanity-check an inputs directory")
    v.add_argument("--inputs", required=True)

    s = sub.add_parser("synth", help="write the synthetic grid city")
    s.add_argument("--out", required=True)
    s.add_argument("--size", type=int, default=CitySpec.size)
    s.add_argument("--trips", type=int, default=CitySpec.n_trips)
    s.add_argument("--seed", type=int, default=CitySpec.seed)
    s.add_argument("--headway", type=float, default=CitySpec.headway_min)
    return ap


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            if args.seed is not None:
                config = config.replace(master_seed=args.seed)
            inputs = load_inputs(args.inputs, config.params, config.master_seed)
            code, report = run_scenario(config, inputs, args.out)
            c = report["costs"]
            print(f"{config.scenario_id}: converged={report['converged']} "
                  f"iterations={report['iterations']} subsidy_total={c['subsidy_total']:.2f} "
                  f"shares={report['mode_share_pct']}")
            return code
        if args.command == "batch":
            configs = load_matrix(args.matrix)
            if args.seed is not None:
                configs = [c.replace(master_seed=args.seed) for c in configs]
            rows = run_batch(configs, args.inputs, args.out, args.jobs)
            failed = [r["scenario_id"] for r in rows if r["status"] != "ok"]
            print(f"{len(rows)} scenarios, {len(failed)} failed; summary in {args.out}/summary.csv")
            return EXIT_INVALID if failed else 0
        if args.command == "validate":
            for line in validate_inputs(args.inputs, Params()):
                print(line)
            print("ok")
            return 0
        if args.command == "synth":
            spec = CitySpec(size=args.size, n_trips=args.trips, seed=args.seed,
                            headway_min=args.headway)
            print(write_synthetic_city(args.out, spec))
            return 0
    except (ConfigError, FixflexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
