"""Optimal shrinkage price and risks against dimension for the sparse mean."""
import argparse

from bpri.gaussian import STEIN_HIGHDIM_COLUMNS, stein_highdim_table, stein_risk_curves
from bpri.io import write_csv

P_GRID = (3, 5, 10, 20, 50, 100)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau2", type=float, default=0.5)
    ap.add_argument("--reps", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--table", default="stein_highdim.csv")
    ap.add_argument("--curves", default="stein_curves.csv")
    args = ap.parse_args()

    rows = stein_highdim_table(P_GRID, args.tau2, args.reps, args.seed)
    write_csv(args.table, STEIN_HIGHDIM_COLUMNS, rows)
    write_csv(args.curves, ("p", "lambda", "risk"), stein_risk_curves(P_GRID, tau2=args.tau2))
    for p, lam, risk, js, mle in rows:
        print(f"p={p:4d}  lambda*={lam:.5f}  risk={risk:.4f}  js={js:.4f}  mle={mle:.0f}")


if __name__ == "__main__":
    main()
