"""
Acceptance criteria at desk scale. Each test prints one PASS/FAIL line.

Scenarios: criteria 1-3 use the remainder scenario (64^3, two packets and a
Gaussian-curl wave), criterion 4 the wide packet without magnetic data, and
criteria 5-7, 9 share one three-t0 study on the default solver scenario.
Run directly with `python3 tests/test_acceptance.py`.
"""

import numpy as np
import pytest

from msscatter import checks
from msscatter import solver as so

T = 4.0
FACTORS = (64, 128, 256)


@pytest.fixture(autouse=True)
def _show(capsys):
    global _capsys
    _capsys = capsys
    yield


def report(k, title, assertions):
    ok = all(a.passed for a in assertions)
    worst = [f"{a.name}={a.value:.3g}" for a in assertions if not a.passed][:3]
    with _capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {k}: {title}" + (f" ({', '.join(worst)})" if worst else ""))
    assert ok, "; ".join(f"{a.name}: {a.value} {a.relation} {a.bound}" for a in assertions if not a.passed)


@pytest.fixture(scope="module")
def remainder_profile():
    return checks.remainder_profile()


@pytest.fixture(scope="module")
def study():
    prof = checks.default_profile()
    track = so.ProfileTrack(prof, so.geometric_times(T, FACTORS[-1] * T))
    return prof, so.t0_study(track, T, FACTORS, tol=1e-12)


def test_criterion_1_two_route_agreement(remainder_profile):
    report(1, "two-route remainder agreement <= 1e-4 at t = 2, 8, 32",
           checks.two_route(remainder_profile, (2.0, 8.0, 32.0), tol=1e-4))


def test_criterion_2_decay_exponents(remainder_profile):
    out, _, _ = checks.decay_exponents(remainder_profile, (10.0, 1000.0), 17)
    report(2, "remainder decay exponents over t in [10, 1000]", out)


def test_criterion_3_scaling_identities(remainder_profile):
    report(3, "exact scaling of u_a and A_1", checks.scaling_identities(remainder_profile))


def test_criterion_4_phase_ablation():
    report(4, "dropping the phase costs >= 10x in t ||R1||_2 at t = 1000",
           checks.phase_ablation(checks.ablation_profile(), 1000.0, 10.0))


def test_criterion_5_conservation_and_propagators(study):
    out = checks.conservation()
    out += checks.wave_strichartz(seed=0)[0]
    X = study[1].final[0]
    out.append(checks.upper("anchoring of the converged pair", 0.0 if X.anchored() else 1.0, 0.0))
    report(5, "L2 drift, wave Strichartz ratios, zero-data anchoring", out)


def test_criterion_6_fixed_point(study):
    prof, st = study
    w3, xw4 = checks.data_size(prof)
    out = [checks.upper("||w_+||_3", w3, 0.05), checks.upper("||x w_+||_4", xw4, 0.05)]
    for t0, rep in zip(st.t0s, st.reports):
        a = checks.contraction(rep, 4)[0]
        a.name = f"{a.name} (t0={t0:g})"
        out.append(a)
    X, solver = st.final
    out += checks.converged_pair(X, solver.grid, solver.window)[0]
    report(6, "contraction for >= 4 iterations and ||v(t)||_2 <= N0 h(t)", out)


def test_criterion_7_energy_shape(study):
    X, solver = study[1].final
    t0 = X.times[-1]
    out, _, _ = checks.energy_shape(X, solver.grid, solver.window, t_max=T + (t0 - T) / 8, slope=-1.3)
    report(7, "energy trace slope <= -1.3", out)


def test_criterion_8_budget():
    from scipy.optimize import brentq

    out = []
    rng = np.random.default_rng(8)
    for _ in range(50):
        C = rng.uniform(0.5, 2.0, 7)
        C[3] = C[0]
        c3 = rng.uniform(0, 0.9) / np.sqrt(C[0])
        b = so.solve_norm_budget(so.NormBudget(C=tuple(C), c3=c3, c4=0.0, r1=0.0, r2=rng.uniform(0, 2)))
        out.append(checks.upper("N0 closed form", abs(b.N[0] - C[0] / (1 - C[0] * c3**2)) / b.N[0], 1e-12))
    for _ in range(200):
        C = rng.uniform(0.5, 2.0, 7)
        C[3] = C[0]                        # the two smallness conditions share their constants
        c3, c4 = rng.uniform(0, 1.2, 2)
        b = so.NormBudget(C=tuple(C), a=rng.uniform(0, 2), c=rng.uniform(0, 1), c3=c3, c4=c4,
                          r1=rng.uniform(0, 2), r2=rng.uniform(0, 2))
        direct = C[0] * (C[2] * c4**2 + c3**2) < 1
        try:
            so.solve_norm_budget(b)
        except so.BudgetInfeasible:
            pass
        out.append(checks.upper("feasibility flag", float(b.feasible != direct), 0.0))
        if b.feasible:
            f = so._n3_map(b, b.N[0], b.N[2])
            ref = brentq(lambda x: f(x) - x, 0.0, 1e12, xtol=1e-14, rtol=1e-15)
            out.append(checks.upper("N3 vs bisection", abs(b.N[3] - ref) / ref, 1e-10))
    report(8, "budget closed forms, feasibility flag, N3 oracle", out)


def test_criterion_9_t0_stability(study):
    st = study[1]
    out = checks.t0_stability(st)
    with _capsys.disabled():
        print("\n  t0 doubling constants C = " + ", ".join(f"{c:.3g}" for c in st.constants))
    report(9, "(N0, N2) change <= C h(t0) when t0 doubles", out)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
