"""What the long-range phase buys.

With the phase removed from the profile, R1 keeps the term
t^-1 (xi . tA1 - g(|w_+|^2)) W, which decays like 1/t instead of
t^-2 (1 + ln t)^2. The ratio of t ||R1||_2 with and without the phase
therefore grows roughly like t / ln^2 t.

    python3 demos/phase_ablation.py
"""

import numpy as np

from msscatter import checks
from msscatter import remainders as rm


def main():
    prof = checks.ablation_profile()
    print(f"{'t':>8}{'t||R1|| phased':>18}{'unphased':>14}{'ratio':>10}")
    for t in np.geomspace(10.0, 1000.0, 5):
        good = t * rm.frame_norms(prof, t, True)["R1_L2"]
        bad = t * rm.frame_norms(prof, t, False)["R1_L2"]
        print(f"{t:8.1f}{good:18.3e}{bad:14.3e}{bad / good:10.2f}")
    a = checks.phase_ablation(prof, 1000.0, 10.0)[0]
    print(f"\nratio at t = 1000: {a.value:.2f} (need >= 10): {'PASS' if a.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
