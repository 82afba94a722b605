"""Map the simultaneous-configuration locus over a mass grid.

Fixes m3 and sweeps (m1, m2), recording for each point the mass-metric
gap between the collinear central configurations of the two potential
terms separately.  The gap vanishes exactly where one line of bodies
balances both force laws at once; for the symmetric ordering (1, 2, 3)
that locus is the diagonal m1 = m3.

Example:
    python scripts/simultaneous_sweep.py --points 41 --out sweep
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from qhnbody.central_config import Ordering, simultaneous_gap
from qhnbody.model import MassSystem, PotentialParams


def main():
    p = argparse.ArgumentParser(
        description="Gap between per-term collinear configurations on a mass grid"
    )
    p.add_argument("--points", type=int, default=22, help="grid points per axis")
    p.add_argument("--mass-lo", type=float, default=0.4)
    p.add_argument("--mass-hi", type=float, default=2.5)
    p.add_argument("--m3", type=float, default=1.0, help="fixed third mass")
    p.add_argument("--ordering", type=str, default="123",
                   help="left-to-right body order, e.g. 123 or 213")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=3.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--out", type=str, default="sweep", help="output directory")
    args = p.parse_args()

    if args.points < 2:
        p.error("--points must be at least 2")
    pp = PotentialParams(a=args.a, b=args.b, alpha=args.alpha, beta=args.beta)
    ordering = Ordering(tuple(int(c) for c in args.ordering))
    grid = np.linspace(args.mass_lo, args.mass_hi, args.points)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for m1 in grid:
        for m2 in grid:
            ms = MassSystem([m1, m2, args.m3])
            gap = simultaneous_gap(ms, pp, ordering)
            rows.append({"m1": float(m1), "m2": float(m2),
                         "m3": args.m3, "gap": gap})

    path = out_dir / "gap_grid.csv"
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["m1", "m2", "m3", "gap"])
        w.writeheader()
        w.writerows(rows)

    gaps = np.array([r["gap"] for r in rows])
    best = rows[int(gaps.argmin())]
    print(f"{len(rows)} grid points, gap range "
          f"[{gaps.min():.3e}, {gaps.max():.3e}]")
    print(f"smallest gap {best['gap']:.3e} at "
          f"(m1, m2) = ({best['m1']:.3f}, {best['m2']:.3f})")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
