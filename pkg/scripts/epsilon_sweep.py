"""Sweep random epsilon vectors and record the worst bi-flat residuals.

    python3 scripts/epsilon_sweep.py --n 3 --trials 20 --out sweep.csv
"""
import argparse
import csv

import numpy as np

from biflat.darboux_egorov import d1_in_spectrum
from biflat.epsilon import EpsilonConfig, epsilon_fields
from biflat.geometry import sample_ordered_points, verify_biflat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--points", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="epsilon_sweep.csv")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = []
    for _ in range(args.trials):
        eps = rng.uniform(-0.4, 0.4, args.n)
        if abs(eps.sum() - 1) < 0.05:
            continue
        beta, H = epsilon_fields(EpsilonConfig(tuple(eps)))
        pts = sample_ordered_points(args.n, args.points, rng)
        rep = verify_biflat(beta, H, pts)
        curv = max(c.max_residual for c in rep.checks if c.name.startswith("curvature"))
        alg = max(c.max_residual for c in rep.checks if not c.name.startswith("curvature"))
        gap = max(d1_in_spectrum(beta, u) for u in pts)
        rows.append([*eps, curv, alg, gap, rep.passed])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"eps{i + 1}" for i in range(args.n)] + ["curvature", "algebraic", "d1_gap", "passed"])
        for r in rows:
            w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in r])
    print(f"{sum(r[-1] for r in rows)}/{len(rows)} passed -> {args.out}")


if __name__ == "__main__":
    main()
