"""Scan the two-dimensional family over (C1, C2, d1) on a grid and report
which parameter points give bi-flat structures (all should)."""
import argparse
import itertools

import numpy as np

from biflat.dim2 import build_dim2, dim2_fields
from biflat.errors import DegenerateCoupling
from biflat.geometry import sample_ordered_points, verify_biflat


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=float, nargs="+", default=(-1.0, -0.5, 0.5, 1.0))
    ap.add_argument("--points", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    ok = total = 0
    for C1, C2, d1 in itertools.product(args.grid, repeat=3):
        try:
            fam = build_dim2(C1, C2, d1)
        except DegenerateCoupling:
            continue
        beta, H = dim2_fields(fam)
        rep = verify_biflat(beta, H, sample_ordered_points(2, args.points, rng), 1e-6, 1e-6)
        total += 1
        ok += rep.passed
        if not rep.passed:
            print(f"C1={C1} C2={C2} d1={d1}: failed {rep.failed()}")
    print(f"{ok}/{total} families pass")


if __name__ == "__main__":
    main()
