"""Sweep fleet size on one synthetic scenario and print mode shares and subsidy."""
import argparse
from pathlib import Path

from fixflex.config import load_config
from fixflex.equilibrium import run_equilibrium
from fixflex.metrics import mode_shares, revenues_and_subsidy
from fixflex.runner import load_inputs

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "synthetic_h15_f10.yaml"))
    ap.add_argument("--inputs", default=str(ROOT / "data" / "synthetic_city"))
    ap.add_argument("--fleets", default="0,5,10,15,20")
    args = ap.parse_args()

    base = load_config(args.config)
    inputs = load_inputs(args.inputs, base.params)
    print("fleet  conv  auto%   frt%  micro%  walk%   subsidy$   per_user$")
    for fleet in map(int, args.fleets.split(",")):
        r = run_equilibrium(base.replace(fleet_size=fleet), inputs.demand, inputs.networks)
        shares, _ = mode_shares(r)
        cb = revenues_and_subsidy(r)
        per = "n/a" if cb.subsidy_per_transit_user is None else f"{cb.subsidy_per_transit_user:.2f}"
        print(f"{fleet:5d}  {'yes' if r.converged else 'no':4s} {shares['Auto']:6.2f} {shares['FRT']:6.2f} "
              f"{shares['Micro']:6.2f} {shares['Walk']:6.2f} {cb.subsidy_total:10.0f} {per:>10s}")


if __name__ == "__main__":
    main()
