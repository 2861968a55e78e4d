import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msscatter import checks
from msscatter import propagators as pg
from msscatter import spectral as sp
from msscatter.families import gaussian

G = sp.Grid3(16, 2 * np.pi)


def test_time_series_is_exact_on_cubics():
    t = np.linspace(0, 2, 9)
    ts = pg.TimeSeries(t, t**3 - 2 * t)
    for s in (0.0, 0.13, 1.01, 1.99):
        assert ts(s) == pytest.approx(s**3 - 2 * s, abs=1e-12)
        assert ts.derivative(s) == pytest.approx(3 * s * s - 2, abs=1e-11)
    with pytest.raises(ValueError):
        ts(2.5)
    with pytest.raises(ValueError):
        pg.TimeSeries([0, 0, 1], [1, 2, 3])


def test_time_fields_must_be_callables_or_samples():
    with pytest.raises(TypeError):
        pg.SchrodingerProblem(G, np.zeros(G.shape), 0, 1, V=np.zeros(G.shape))
    p = pg.SchrodingerProblem(G, np.zeros(G.shape), 0, 1, V=([0.0, 1.0], np.zeros((2,) + G.shape)))
    assert isinstance(p.V, pg.TimeSeries)


def test_plane_wave_is_exact():
    X = G.position_array()
    k = np.array([1, 2, 0])
    v0 = np.exp(1j * np.tensordot(k, X, axes=1))
    p = pg.SchrodingerProblem(G, v0, 0.0, 1.0)
    sol = pg.schrodinger_integrate(p, times=[0.5, 1.0])
    for t, v in zip(sol.times, sol.values):
        assert np.abs(v - v0 * np.exp(-0.5j * (k @ k) * t)).max() < 1e-7


def test_cfl_bound_is_enforced():
    p = pg.SchrodingerProblem(G, np.zeros(G.shape), 0, 1)
    with pytest.raises(pg.CFLViolation):
        pg.schrodinger_integrate(p, dt=1.01 * pg.cfl_step(G))
    with pytest.raises(ValueError):
        pg.schrodinger_integrate(p, times=[0.5, 2.0])
    with pytest.raises(ValueError):
        pg.schrodinger_integrate(p, times=[0.8, 0.5])


def test_non_finite_solution_is_reported():
    V = np.full(G.shape, np.nan)
    p = pg.SchrodingerProblem(G, np.ones(G.shape), 0, 0.1, V=lambda t: V)
    with pytest.raises(pg.NonFiniteSolution):
        pg.schrodinger_integrate(p)


def magnetic_fields(g):
    X = g.position_array()
    env = np.exp(-g.r2 / 4)
    A = 0.4 * sp.leray_project(np.stack([env * X[1], -env * X[0], env * X[2]]), g)
    V = 0.3 * np.exp(-g.r2 / 2)
    return A, V


def test_forward_then_backward_returns_data_at_fourth_order():
    g = sp.Grid3(16, 10.0)
    A, V = magnetic_fields(g)
    v0 = g.dealias(gaussian(g, width=1.2, momentum=(0.5, 0, 0)))
    err = []
    for c in (1.0, 0.5):
        fwd = pg.schrodinger_integrate(pg.SchrodingerProblem(g, v0, 0.0, 0.5, A=lambda t: A, V=lambda t: V), c_cfl=c)
        back = pg.schrodinger_integrate(pg.SchrodingerProblem(g, fwd.values[-1], 0.5, 0.0, A=lambda t: A,
                                                              V=lambda t: V), c_cfl=c)
        err.append(np.abs(back.values[-1] - v0).max())
    assert err[0] < 1e-6
    assert err[0] / err[1] > 12


def test_l2_identity_with_source():
    g = sp.Grid3(16, 10.0)
    A, V = magnetic_fields(g)
    f0 = 0.2 * gaussian(g, center=(1, 0, 0))
    p = pg.SchrodingerProblem(g, gaussian(g, width=1.3), 0.0, 1.0, A=lambda t: A, V=lambda t: V,
                              f=lambda t: np.cos(3 * t) * f0)
    p.check_gauge([0.0])
    sol = pg.schrodinger_integrate(p, times=np.linspace(0, 1, 41))
    defect, _ = pg.l2_identity_check(p, sol)
    assert defect < 1e-6


def test_energy_identity_with_time_dependent_fields():
    g = sp.Grid3(16, 10.0)
    A, V = magnetic_fields(g)
    f0 = 0.2 * gaussian(g, center=(1, 0, 0))
    p = pg.SchrodingerProblem(g, gaussian(g, width=1.3), 0.0, 1.0,
                              A=lambda t: (1 + t) * A, V=lambda t: V * np.cos(t), f=lambda t: t * f0,
                              dA=lambda t: A, dV=lambda t: -V * np.sin(t), df=lambda t: f0)
    sol = pg.schrodinger_integrate(p, times=np.linspace(0, 1, 41))
    assert pg.energy_identity_check(p, sol) < 1e-5
    with pytest.raises(ValueError):
        pg.energy_identity_check(pg.SchrodingerProblem(g, sol.values[0], 0, 1, A=lambda t: A), sol)


def test_gauge_check_rejects_gradient_potential():
    g = sp.Grid3(16, 10.0)
    A = g.grad(np.exp(-g.r2 / 2))
    with pytest.raises(ValueError):
        pg.SchrodingerProblem(g, np.zeros(g.shape), 0, 1, A=lambda t: A).check_gauge([0.0])


def test_checkpoints_are_written(tmp_path):
    p = pg.SchrodingerProblem(G, np.exp(-G.r2), 0.0, 0.2)
    sol = pg.schrodinger_integrate(p, checkpoint_dir=tmp_path, checkpoint_every=5)
    assert len(sol.checkpoints) == sol.steps // 5
    back = sp.read_snapshot(sol.checkpoints[0])
    assert back.values.shape == G.shape
    assert (tmp_path / "checkpoint_0000005.json").exists()


def test_conservation_suite():
    assert all(a.passed for a in checks.conservation(n=16, L=16.0, duration=0.5))


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 50.0), st.floats(-2.0, 2.0).filter(lambda h: abs(h) > 1e-3))
def test_panel_weights_match_quadrature(w, h):
    from scipy.integrate import quad

    Is0, Is1, Ic0, Ic1 = pg.panel_weights(np.array([w]), h)
    sgn = np.sign(h)
    ref = [quad(f, 0, h, limit=200)[0] for f in (lambda u: np.sin(w * u) / w, lambda u: u * np.sin(w * u) / w / h,
                                              lambda u: np.cos(w * u), lambda u: u * np.cos(w * u) / h)]
    for a, b in zip((Is0, Is1, Ic0, Ic1), ref):
        assert a[0] == pytest.approx(b, rel=1e-7, abs=1e-12 * sgn * sgn)


@pytest.mark.parametrize("direction", [1, -1])
def test_wave_duhamel_single_mode(direction):
    g = sp.Grid3(16, 2 * np.pi)
    X = g.position_array()
    S0 = np.stack([0 * X[0], np.cos(2 * X[0]) + 0 * X[1], 0 * X[0]])
    ts = np.linspace(0, direction * 3.0, 31)
    S = np.stack([S0] * ts.size)
    B, P = pg.wave_duhamel(pg.WaveProblem(g, ts, S, 0.0, ts))
    w = 2.0
    for t, b, d in zip(ts, B, P):
        assert np.abs(b - (1 - np.cos(w * t)) / w**2 * S0).max() < 1e-12
        assert np.abs(d - np.sin(w * t) / w * S0).max() < 1e-12


def test_wave_duhamel_projects_sources():
    g = sp.Grid3(16, 2 * np.pi)
    grad = g.grad(np.cos(g.X[0]) * np.sin(g.X[1]) + 0 * g.X[2])
    ts = np.linspace(0, 1, 5)
    B, _ = pg.wave_duhamel(pg.WaveProblem(g, ts, np.stack([grad] * 5), 0.0, ts))
    assert np.abs(B).max() < 1e-14


def test_wave_strichartz_ratios_are_bounded():
    out, rep = checks.wave_strichartz(seed=1, n=16, L=16.0, samples=41)
    assert all(a.passed for a in out)
    assert set(rep.ratios) == {"L4L4", "grad", "energy"}
    assert rep.ratios["energy"] <= 1.0


def test_admissible_pairs():
    assert pg.admissible(np.inf, 2)
    assert pg.admissible(2, 6)
    assert pg.admissible(4, 3)
    assert not pg.admissible(4, 4)


def test_schrodinger_strichartz_report():
    g = sp.Grid3(32, 24.0)
    u = gaussian(g, width=1.5)
    rep = pg.strichartz_check(u, g, [(np.inf, 2), (4, 3), (8 / 3, 4)], window=4.0)
    assert rep.ratios[(np.inf, 2.0)] == pytest.approx(1.0, rel=1e-10)
    for k in rep.ratios:
        assert np.isfinite(rep.ratios[k]) and rep.doubled[k] >= rep.ratios[k] * (1 - 1e-12)
    with pytest.raises(ValueError):
        pg.strichartz_check(u, g, [(4, 4)])


def test_hartree_exponent_constraints():
    assert np.allclose(pg.hartree_exponents((0.25,) * 4), 6 / 2.5)
    for bad in ((0.5, 0.5, 0.0, 0.0), (0.2, 0.2, 0.2), (0.3, 0.3, 0.3, 0.3), (-0.1, 0.5, 0.3, 0.3)):
        with pytest.raises(ValueError):
            pg.hartree_exponents(bad)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_hartree_ratio_is_scale_free_in_amplitudes(a, b, c):
    g = sp.Grid3(16, 12.0)
    v = [gaussian(g, center=(s, 0, 0), width=1.2) for s in (-1, 0, 1)]
    base = pg.hartree_inequality_check(*v, (0.25,) * 4, g)
    scaled = pg.hartree_inequality_check(a * v[0], b * v[1], c * v[2], (0.25,) * 4, g)
    assert scaled == pytest.approx(base, rel=1e-10)


def test_hartree_ensemble_and_sup_check():
    out, r = checks.hartree_ensemble(seed=0, n=16, L=12.0, count=2)
    assert out[0].passed and 0 < r < 1
    g = sp.Grid3(16, 12.0)
    v = gaussian(g, width=1.2)
    assert np.isfinite(pg.hartree_sup_check(v, v, 2.0, g))
    with pytest.raises(ValueError):
        pg.hartree_sup_check(v, v, 1.0, g)
