"""The norm budget behind the fixed point.

Given the linear constants C0..C6 and the profile constants (a, c, c3, c4,
r1, r2), the budget resolves N0 and N2 from a 2x2 system, N3 by monotone
iteration and N1, N4, N5, N6 in closed form, and finds the smallest T for
which the large-T condition holds. This script sweeps c3 and c4 across the
smallness boundary C0 (C2 c4^2 + c3^2) = 1.

    python3 demos/norm_budget.py
"""

import numpy as np

from msscatter import solver as so


def main():
    base = dict(C=(1.0, 1.5, 1.2, 1.0, 0.8, 1.1, 0.9), a=0.2, c=0.1, r1=0.5, r2=0.5)
    print(f"{'c3':>6}{'c4':>6}{'smallness':>11}{'N0':>10}{'N2':>10}{'N3':>10}{'T_min':>10}")
    for c3 in (0.2, 0.6, 0.9):
        for c4 in (0.1, 0.5, 0.8):
            b = so.NormBudget(c3=c3, c4=c4, **base)
            try:
                so.solve_norm_budget(b)
                N = b.N
                print(f"{c3:6.2f}{c4:6.2f}{b.conditions['smallness']:11.3f}"
                      f"{N[0]:10.3g}{N[2]:10.3g}{N[3]:10.3g}{b.T_min:10.3g}")
            except so.BudgetInfeasible as e:
                print(f"{c3:6.2f}{c4:6.2f}{b.conditions['smallness']:11.3f}   infeasible: {e}")

    # N0 blows up like 1 / (1 - C0 c3^2) as the boundary is approached with c4 = 0
    print("\napproach to the boundary with c4 = 0, r1 = 0:")
    for gap in (1e-1, 1e-2, 1e-3):
        c3 = np.sqrt(1 - gap)
        b = so.solve_norm_budget(so.NormBudget(C=(1.0,) * 7, c3=c3, c4=0.0, r1=0.0))
        print(f"  1 - C0 c3^2 = {gap:g}:  N0 = {b.N[0]:.6g}")


if __name__ == "__main__":
    main()
