"""Regenerate data/synthetic_city (the grid city used by the bundled configs and tests)."""
import argparse
from pathlib import Path

from fixflex.synthetic import CitySpec, write_synthetic_city

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(ROOT / "data" / "synthetic_city"))
    ap.add_argument("--trips", type=int, default=CitySpec.n_trips)
    ap.add_argument("--seed", type=int, default=CitySpec.seed)
    args = ap.parse_args()
    d = write_synthetic_city(args.out, CitySpec(n_trips=args.trips, seed=args.seed))
    print(f"wrote {d}")
