"""Scalar LQG: both closed-form information values against the discretized BA oracle."""
import argparse

import numpy as np

from bpri.gaussian import lqg_arbitrate, lqg_scalar_posterior_var


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma-x2", type=float, default=1.0)
    ap.add_argument("--weight", type=float, default=1.0)
    args = ap.parse_args()

    print(f"{'lambda':>7} {'detform':>8} {'ratio':>8} {'oracle':>8} {'closed':>8}  agrees")
    for lam in np.geomspace(0.25, 8, 6):
        arb = lqg_arbitrate(args.sigma_x2, args.weight, lam)
        ok = ",".join(k for k, v in arb.matches().items() if v) or "-"
        print(f"{lam:7.3f} {arb.detform:8.4f} {arb.ratio:8.4f} {arb.oracle_mi:8.4f} "
              f"{arb.closed_form_mi:8.4f}  {ok}")
    print("\nposterior variance: maximizer vs displayed form")
    for lam in (0.25, 0.5, 0.75, 1.0, 2.0):
        r = lqg_scalar_posterior_var(args.sigma_x2, args.weight, 1.0, lam)
        print(f"{lam:7.3f} {r.variance:8.4f} {r.displayed_variance:8.4f}  "
              f"value {r.value:.4f} vs {r.displayed_value:.4f}")


if __name__ == "__main__":
    main()
