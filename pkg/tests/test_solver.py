import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from msscatter import checks
from msscatter import solver as so
from msscatter import spectral as sp
from msscatter.profiles import apply_MD

RATIO = 2 ** (1 / 8)


@pytest.fixture(scope="module")
def profile():
    return checks.default_profile()


@pytest.fixture(scope="module")
def track(profile):
    return so.ProfileTrack(profile, so.geometric_times(4.0, 16.0, RATIO))


@pytest.fixture(scope="module")
def solver(track):
    return so.ComovingSolver(track)


@pytest.fixture(scope="module")
def first(solver):
    return solver.linearized_solve(so.SolutionPair.zero(solver.grid, solver.times))


# -- weights and grids ---------------------------------------------------------


def test_weights():
    assert so.h_weight(1.0) == pytest.approx(4.0)
    assert so.h_bar(1.0) == pytest.approx(4.0)
    t = np.geomspace(1, 100, 2001)
    peak = t[np.argmax(so.h_bar(t))]
    assert peak == pytest.approx(np.exp(1.2), rel=5e-3)


def test_geometric_times_are_nested_with_exact_endpoints():
    a = so.geometric_times(4.0, 64.0)
    b = so.geometric_times(4.0, 256.0)
    assert a[0] == 4.0 and a[-1] == 64.0 and b[-1] == 256.0
    assert np.allclose(b[: a.size], a, rtol=1e-13)
    assert np.ptp(a[1:] / a[:-1]) < 1e-12
    with pytest.raises(ValueError):
        so.geometric_times(0.5, 2.0)


def test_solver_rejects_bad_grids(track):
    with pytest.raises(ValueError):
        so.ComovingSolver(track, window=(1.1, 1.45))
    bent = track.restrict(track.times[-1])
    bent.times = track.times.copy()
    bent.times[1] *= 1.001
    with pytest.raises(ValueError):
        so.ComovingSolver(bent)


# -- sources --------------------------------------------------------------------


def localized_fields(xg, seed=0):
    rng = np.random.default_rng(seed)
    s = 0.08 * xg.L
    X = xg.position_array()
    env = np.exp(-xg.r2 / (2 * s * s))
    v = (rng.normal() + 1j * rng.normal()) * 1e-3 * env * np.exp(1j * X[0] / s)
    B = sp.leray_project(np.stack([env * X[1] / s, -env * X[0] / s, 0.3 * env]), xg) * 1e-2
    return v, B


def test_trivial_sources(profile):
    b = profile.bundle(2.0)
    xg = b.x_grid
    z = np.zeros(xg.shape, complex)
    zB = np.zeros((3,) + xg.shape)
    assert np.abs(so.assemble_G1(z, zB, b)).max() == 0
    assert np.abs(so.assemble_G2(z, zB, b)).max() == 0
    v, _ = localized_fields(xg)
    rho = np.abs(v) ** 2 + 2 * np.real(np.conj(b.u_a) * v)
    assert np.allclose(so.assemble_G1(v, zB, b), sp.coulomb(rho, xg) * b.u_a, atol=0)


def test_frame_sources_match_physical_sources(profile):
    t = 2.0
    b = profile.bundle(t)
    g, xg = profile.grid, b.x_grid
    v, B = localized_fields(xg)
    # frame images: v = MD vt, B(t, t xi) is the same sample array
    vt = v / ((1j * t) ** -1.5 * np.exp(0.5j * xg.r2 / t))
    fr = profile.frame(t)
    G1 = so.assemble_G1(v, B, b)
    G1f = apply_MD(so.frame_G1(g, t, fr.W, b.A_a, vt, B), t, g)
    assert np.linalg.norm(G1 - G1f) < 1e-8 * np.linalg.norm(G1)
    G2 = so.assemble_G2(v, B, b)
    G2f = so.frame_G2(g, t, fr.W, b.A_a, vt, B)
    assert np.linalg.norm(G2 - G2f) < 1e-8 * np.linalg.norm(G2)


def test_grad_G2_expansion(profile):
    # a smooth localized A keeps the spectral derivative exact; the long-range
    # part of A_a is not periodic on the box
    b = profile.bundle(2.0, refine=2)
    xg = b.x_grid
    v, B = localized_fields(xg, seed=1)
    env = np.exp(-xg.r2 / (2 * (0.08 * xg.L) ** 2))
    X = xg.position_array()
    smooth = sp.leray_project(np.stack([env * X[1], -env * X[0], 0 * env]), xg)
    b = dataclasses.replace(b, A0=smooth, A1=0 * smooth)
    G2 = so.assemble_G2(v, B, b)
    direct = np.stack([xg.grad(G2[k]) for k in range(3)]).transpose(1, 0, 2, 3, 4)
    exp = so.grad_G2_expansion(v, B, b)
    assert np.linalg.norm(exp - direct) < 1e-4 * np.linalg.norm(direct)


# -- the linearized map -----------------------------------------------------------


def test_first_iterate_is_anchored_and_nonzero(first):
    assert first.anchored()
    assert np.abs(first.v).max() > 0 and np.abs(first.B).max() > 0


def test_duhamel_bound_for_v(first, solver):
    # the frame Hamiltonian is symmetric, so ||v'(t)|| <= int_t^t0 ||f||
    dV = solver.grid.cell_volume
    f = first.sources[2]
    fn = np.array([sp.lebesgue(x, 2, dV) for x in f])
    bound = sp.tail_norms(first.times, fn, 1)
    vn = np.array([sp.lebesgue(x, 2, dV) for x in first.v])
    assert np.all(vn <= bound * (1 + 1e-3) + 1e-300)


def test_map_is_affine_in_frozen_sources(first, solver):
    A, V, f, S = first.sources
    rng = np.random.default_rng(2)
    f2 = f * (1 + 0.5 * rng.normal(size=f.shape[:1]))[:, None, None, None]
    S2 = S * 0.7
    a = solver.linearized_solve(first, frozen=(A, V, f, S))
    b = solver.linearized_solve(first, frozen=(A, V, f2, S2))
    c = solver.linearized_solve(first, frozen=(A, V, f + 2 * f2, S + 2 * S2))
    for name in ("v", "B", "dtB", "dtv"):
        x, y, z = (getattr(p, name) for p in (a, b, c))
        assert np.abs(z - x - 2 * y).max() <= 1e-8 * np.abs(z).max()


def test_energy_trace_below_source_bound(first, solver):
    tr, fit, bound = so.energy_bound_check(first, solver.grid, solver.window)
    assert bound is not None
    assert np.all(tr.values[:-1] <= bound[:-1] * (1 + 1e-6))


def test_zero_remainders_give_zero_fixed_point(profile):
    tr = so.ProfileTrack(profile, so.geometric_times(4.0, 8.0, RATIO), zero_remainders=True)
    s = so.ComovingSolver(tr)
    X, rep = so.fixed_point_iterate(s)
    assert rep.converged and rep.iterations == 1
    assert not np.any(X.v) and not np.any(X.B)


class _Expanding:
    """Stand-in map whose iterates double: the distance ratio is 2."""

    def __init__(self, grid, times):
        self.grid, self.times = grid, times
        self.window = np.ones(grid.shape, bool)

    def linearized_solve(self, pair):
        out = so.SolutionPair.zero(self.grid, self.times)
        out.v = 2 * pair.v + 1e-3
        return out


def test_contraction_failure_is_raised():
    g = sp.Grid3(8, 2.0)
    fake = _Expanding(g, so.geometric_times(4.0, 8.0))
    with pytest.raises(so.ContractionFailure) as e:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            so.fixed_point_iterate(fake, tol=1e-30, budget_constants=(1, 1, 1, 1))
    assert e.value.report.ratios[-1] >= 1
    with pytest.warns(UserWarning):
        with pytest.raises(so.ContractionFailure):
            so.fixed_point_iterate(fake, tol=1e-30, budget_constants=(10.0, 1.0, 1.0, 0.0))


def test_contraction_report_run_length():
    r = so.ContractionReport([1, 0.5, 0.2, 0.3, 0.1, 0.05], [0.5, 0.4, 1.5, 0.33, 0.5], [], True, 6, 1e-6)
    assert r.longest_contracting_run == 2


# -- semi-norms -----------------------------------------------------------------------


def test_x_norm_of_zero_pair(solver):
    rep = so.x_norm_report(so.SolutionPair.zero(solver.grid, solver.times), solver.grid, solver.window)
    assert rep.x_norm == 0 and all(v == 0 for v in rep.N.values())


def test_N0_of_weighted_unit_profile(solver):
    g = solver.grid
    phi = np.exp(-g.r2 * 8)
    phi = phi / sp.lebesgue(phi, 2, g.cell_volume)
    pair = so.SolutionPair.zero(g, solver.times)
    pair.v = np.stack([so.h_weight(t) * phi for t in solver.times]).astype(complex)
    rep = so.x_norm_report(pair, g, solver.window)
    assert rep.N0 == pytest.approx(1.0, rel=1e-12)
    n0, n2 = so.contraction_seminorms(pair, so.SolutionPair.zero(g, solver.times), g, solver.window)
    assert n0 == pytest.approx(1.0, rel=1e-12) and n2 == 0


def test_seminorms_of_first_iterate(first, solver):
    ok, rep = checks.converged_pair(first, solver.grid, solver.window)
    assert all(a.passed for a in ok)
    assert rep.N_half <= np.sqrt(rep.N[0] * rep.N[5])


def test_profile_constants(track):
    c = so.profile_constants(track)
    assert set(c) == {"c3", "c4", "c", "a", "a0", "r1", "r11", "r12", "r2"}
    assert all(v >= 0 for v in c.values())
    w = track.profile.w
    assert c["c3"] == pytest.approx(sp.lebesgue(w, 3, track.grid.cell_volume), rel=1e-12)
    assert c["c"] >= c["c3"]


# -- the norm budget ------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(0.0, 3.0), st.floats(0.5, 2.0))
def test_budget_closed_form_without_coupling(c3, r2, C0):
    b = so.solve_norm_budget(so.NormBudget(C=(C0, 1, 1, 1, 1, 1, 1), c3=c3 / np.sqrt(C0), c4=0.0, r1=0.0, r2=r2))
    assert b.feasible
    assert b.N[0] == pytest.approx(C0 / (1 - c3**2), rel=1e-12)
    assert b.N[2] == pytest.approx(r2 + 1, rel=1e-12)
    assert b.N[5] == pytest.approx(4 * (b.N[3] + 1), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5), st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 1.0))
def test_N3_matches_root_finder(c3, c4, a, r1, c):
    b = so.NormBudget(a=a, c=c, c3=c3, c4=c4, r1=r1, r2=0.5)
    b = so.solve_norm_budget(b)
    f = so._n3_map(b, b.N[0], b.N[2])
    ref = brentq(lambda x: f(x) - x, 0.0, 1e8, xtol=1e-14, rtol=1e-15)
    assert b.N[3] == pytest.approx(ref, rel=1e-10)
    # the two linear relations hold at the solution
    C0, C2 = b.C[0], b.C[2]
    assert b.N[0] == pytest.approx(C0 * (c4 * b.N[2] + c3**2 * b.N[0] + r1 + 1), rel=1e-12)
    assert b.N[2] == pytest.approx(C2 * (c4 * b.N[0] + 0.5 + 1), rel=1e-12)


def test_budget_infeasible():
    with pytest.raises(so.BudgetInfeasible):
        so.solve_norm_budget(so.NormBudget(c3=1.0, c4=0.0))
    b = so.NormBudget(c3=0.5, c4=0.9)
    with pytest.raises(so.BudgetInfeasible):
        so.solve_norm_budget(b)
    assert not b.feasible
    with pytest.raises(ValueError):
        so.solve_norm_budget(so.NormBudget(C=(0, 1, 1, 1, 1, 1, 1)))


def test_minimum_T_is_the_threshold():
    b = so.solve_norm_budget(so.NormBudget(a=1.0, c=1.0, c3=0.1, c4=0.1, r1=1.0, r2=1.0))
    T = b.T_min
    assert np.exp(1.2) < T < np.inf
    assert so.large_T_condition(b, T) < 1
    assert so.large_T_condition(b, T * (1 - 1e-9)) >= 1
    for s in np.geomspace(T, 1e8, 20):
        assert so.large_T_condition(b, s) < 1
    tiny = so.solve_norm_budget(so.NormBudget(C=(1e-3,) * 7, a=1e-3, c=1e-3, c3=0.0, c4=0.0, r1=0.0, r2=0.0))
    assert tiny.T_min == 1.0


# -- t0 study ----------------------------------------------------------------------------


@pytest.mark.slow
def test_small_t0_study(profile):
    ratio = 2 ** 0.25
    tr = so.ProfileTrack(profile, so.geometric_times(4.0, 16.0, ratio))
    st_ = so.t0_study(tr, 4.0, factors=(2, 4), window=(1.05, 1.2), tol=1e-10)
    assert [r.converged for r in st_.reports] == [True, True]
    assert len(st_.constants) == 1 and np.isfinite(st_.constants[0])
    assert st_.final[0].anchored()
