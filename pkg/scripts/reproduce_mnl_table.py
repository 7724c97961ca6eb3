"""Average logit curvature over random utility draws, with the reference-value gate."""
import argparse
import math

from bpri.choice import CURVATURE_COLUMNS, mc_curvature
from bpri.io import write_csv

GRID = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.8, 2.0, 2.5, 3.0]
REFERENCE = {0.3: 0.227, 0.9: 0.456, 2.5: 0.249}
REFERENCE_SE = 0.00433


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--b", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="mnl_mc.csv")
    args = ap.parse_args()

    rows = mc_curvature(args.k, GRID, args.b, args.seed)
    write_csv(args.out, CURVATURE_COLUMNS, (r.as_tuple() for r in rows))
    gate = 3 * REFERENCE_SE * math.sqrt(2)
    print(f"{'lambda':>7} {'mean':>8} {'se':>8}  reference")
    for r in rows:
        ref = REFERENCE.get(r.lam)
        tag = "" if ref is None else f"{ref:.3f} ({'ok' if abs(r.mean - ref) <= gate else 'MISS'})"
        print(f"{r.lam:7.2f} {r.mean:8.4f} {r.se:8.5f}  {tag}")
    print("argmax lambda:", max(rows, key=lambda r: r.mean).lam)


if __name__ == "__main__":
    main()
