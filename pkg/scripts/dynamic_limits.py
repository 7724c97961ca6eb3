"""Soft plans on the 3-state, 2-action fixture as the information price falls."""
import numpy as np

from bpri.dynamic import classical_dp_oracle, soft_bellman_finite, soft_value_iteration
from bpri.fixtures import mdp_3x2


def main():
    mdp = mdp_3x2()
    hard, _ = classical_dp_oracle(mdp, horizon=mdp.horizon)
    hard_inf, _ = classical_dp_oracle(mdp)
    print(f"{'lambda':>8} {'total I':>9} {'gap T=5':>10} {'gap disc.':>10}")
    for lam in (0.1, 1.0, 10.0, 100.0, 1e3, 1e4):
        plan = soft_bellman_finite(mdp, lam)
        stat = soft_value_iteration(mdp, lam)
        print(f"{lam:8g} {plan.mutual_info.sum():9.5f} "
              f"{np.abs(plan.values[0] - hard[0]).max():10.2e} "
              f"{np.abs(stat.values - hard_inf).max():10.2e}")


if __name__ == "__main__":
    main()
