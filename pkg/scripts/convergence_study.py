"""Run the 8 convergence variants on the synthetic city and print the gap trajectory of each."""
import argparse
import time
from dataclasses import replace
from pathlib import Path

from fixflex.config import load_matrix
from fixflex.equilibrium import frozen_repass_gap, run_equilibrium
from fixflex.runner import load_inputs

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--matrix", default=str(ROOT / "configs" / "synthetic_convergence.csv"))
    ap.add_argument("--inputs", default=str(ROOT / "data" / "synthetic_city"))
    ap.add_argument("--averaging", choices=["none", "msa"], default=None,
                    help="override the averaging rule of every variant")
    args = ap.parse_args()

    configs = load_matrix(args.matrix)
    if args.averaging:
        configs = [c.replace(params=replace(c.params, averaging=args.averaging)) for c in configs]
    inputs = load_inputs(args.inputs, configs[0].params)
    for c in configs:
        t0 = time.perf_counter()
        r = run_equilibrium(c, inputs.demand, inputs.networks)
        gaps = " ".join("-" if i.convergence_gap is None or i.convergence_gap == float("inf") else f"{i.convergence_gap:.4f}"
                        for i in r.iterations)
        repass = frozen_repass_gap(r, inputs.demand, inputs.networks)
        print(f"{c.scenario_id:14s} converged={r.converged!s:5s} iters={len(r.iterations):2d} "
              f"repass={repass:.4f} {time.perf_counter() - t0:5.1f}s  gaps: {gaps}")


if __name__ == "__main__":
    main()
