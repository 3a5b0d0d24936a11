"""Build the principal hierarchy to a given depth, print residuals and
write the JSON table and a flat-coordinate CSV."""
import argparse
import json

import numpy as np

from biflat.epsilon import EpsilonConfig, build_hierarchy, write_flat_coordinates_csv
from biflat.geometry import sample_ordered_points


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, nargs=3, default=(0.1, 0.2, 0.3))
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prefix", default="hierarchy")
    args = ap.parse_args()

    cfg = EpsilonConfig(tuple(args.eps))
    table = build_hierarchy(cfg, args.depth)
    pts = sample_ordered_points(3, args.points, np.random.default_rng(args.seed))
    worst = {}
    for u in pts:
        for key, res in table.residuals(u).items():
            for name, v in res.items():
                worst[key, name] = max(worst.get((key, name), 0.0), v)
    for (key, name), v in sorted(worst.items()):
        print(f"K{key} {name:11s} {v:.2e}")
    with open(f"{args.prefix}.json", "w") as fh:
        json.dump(table.to_dict(pts), fh, indent=2, sort_keys=True)
    write_flat_coordinates_csv(f"{args.prefix}_flat.csv", cfg, pts)


if __name__ == "__main__":
    main()
