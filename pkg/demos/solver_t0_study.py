"""Fixed point of the linearized map and its dependence on t0.

Runs the profile-frame solver on the default scenario from zero data at t0
back to T, for several t0, and reports the contraction ratios, the X-norm
constants and the Cauchy constants as t0 doubles. The default is a quick
version (t0 = 8T, 16T, 32T, coarse time grid). --full uses the acceptance
settings (t0 = 64T, 128T, 256T), which takes several minutes on one core.

    python3 demos/solver_t0_study.py [--full]
"""

import argparse
import time

from msscatter import checks
from msscatter import solver as so


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()
    T = 4.0
    # a coarser time ratio dilates further per panel, so the taper window must shrink to fit the box
    if args.full:
        factors, ratio, tol, window = (64, 128, 256), 2 ** (1 / 16), 1e-12, (1.1, 1.35)
    else:
        factors, ratio, tol, window = (8, 16, 32), 2 ** 0.25, 1e-10, (1.05, 1.2)

    prof = checks.default_profile()
    w3, xw4 = checks.data_size(prof)
    print(f"data: ||w_+||_3 = {w3:.4f}, ||xi w_+||_4 = {xw4:.4f}")
    track = so.ProfileTrack(prof, so.geometric_times(T, factors[-1] * T, ratio))

    t_start = time.time()
    st = so.t0_study(track, T, factors, window=window, tol=tol)
    print(f"t0 study done in {time.time() - t_start:.0f} s\n")
    for t0, rep, (n0, n2) in zip(st.t0s, st.reports, st.seminorms):
        rs = " ".join(f"{r:.1e}" for r in rep.ratios)
        print(f"t0 = {t0:6g}: {rep.iterations} iterations, ratios [{rs}], N0 = {n0:.4g}, N2 = {n2:.4g}")
    for i, c in enumerate(st.constants):
        print(f"t0 {st.t0s[i]:g} -> {st.t0s[i + 1]:g}: |dN| / h(t0) = {c:.3g}, pointwise {st.pointwise[i]:.3g}")

    X, solver = st.final
    rep = so.x_norm_report(X, solver.grid, solver.window)
    print("\nX-norm constants of the converged pair:")
    print("  " + "  ".join(f"N{k} = {v:.3g}" for k, v in sorted(rep.N.items())))
    if not args.full:
        print("(the energy trace fit needs t0 >= 256 T for 1.5 decades in its window; rerun with --full)")
        return
    t0 = X.times[-1]
    out, tr, fit = checks.energy_shape(X, solver.grid, solver.window, t_max=T + (t0 - T) / 8)
    if fit is not None:
        print(f"energy trace fit on [T, T + (t0 - T)/8]: slope {fit.slope:.3f}, alpha {fit.exponent:.3f}, "
              f"beta {fit.log_power:.3f}")
    for a in out:
        print(f"  {'PASS' if a.passed else 'FAIL'} {a.name}: {a.value:.4g} {a.relation} {a.bound:g}")


if __name__ == "__main__":
    main()
