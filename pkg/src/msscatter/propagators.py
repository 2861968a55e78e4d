"""
Time integrators on a fixed periodic grid and their diagnostics.

    i d_t v = -(1/2) Delta_A v + V v + f
            = -(1/2) Delta v + (i/2)(A.grad v + div(A v)) + ((1/2)|A|^2 + V) v + f

The A.grad term is written in its symmetric form, equal to i A.grad v when
div A = 0, so the discrete Hamiltonian is Hermitian for any real sampled A.
Right sides are projected on the 2/3 band and the state stays in that band.
Stepping is classical RK4 with dt <= C_cfl / |k_max|^2; potentials between
their sample times are cubic Lagrange interpolants in t.

The wave equation d_t^2 B - Delta B = S is integrated mode by mode with
sources linear in t on each panel, for which the Duhamel integrals are exact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson

from . import spectral as sp
from .spectral import Grid3, ScalarField


class CFLViolation(ValueError):
    """Requested step exceeds the spectral stability bound."""


class NonFiniteSolution(FloatingPointError):
    """The integrated field picked up NaN or inf values."""


# ---------------------------------------------------------------------------
# time-indexed fields
# ---------------------------------------------------------------------------


class TimeSeries:
    """Samples f(t_i) with cubic Lagrange interpolation between them.

    Each evaluation uses the four samples nearest to t (fewer if fewer
    exist), which reproduces cubics exactly and matches RK4 order.
    """

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values)
        if self.times.ndim != 1 or self.times.size != self.values.shape[0]:
            raise ValueError("times and values must agree in length")
        order = np.argsort(self.times)
        self.times = self.times[order]
        self.values = self.values[order]
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be distinct")

    def _stencil(self, t):
        n = self.times.size
        m = min(4, n)
        j = int(np.searchsorted(self.times, t))
        lo = min(max(j - m // 2, 0), n - m)
        return np.arange(lo, lo + m)

    def _check(self, t):
        span = self.times[-1] - self.times[0]
        tol = 1e-12 * max(span, abs(self.times[-1]), 1.0)
        if t < self.times[0] - tol or t > self.times[-1] + tol:
            raise ValueError(f"t={t} outside sampled range [{self.times[0]}, {self.times[-1]}]")

    def __call__(self, t):
        self._check(t)
        idx = self._stencil(t)
        ts = self.times[idx]
        k = np.flatnonzero(np.isclose(ts, t, rtol=0, atol=1e-14 * max(1.0, abs(t))))
        if k.size:
            return self.values[idx[k[0]]]
        w = [np.prod([(t - ts[b]) / (ts[a] - ts[b]) for b in range(len(ts)) if b != a]) for a in range(len(ts))]
        return sum(wi * self.values[i] for wi, i in zip(w, idx))

    def derivative(self, t):
        """Derivative of the local interpolant."""
        self._check(t)
        idx = self._stencil(t)
        ts = self.times[idx]
        m = len(ts)
        out = 0.0
        for a in range(m):
            others = [b for b in range(m) if b != a]
            den = np.prod([ts[a] - ts[b] for b in others])
            num = sum(np.prod([t - ts[c] for c in others if c != b]) for b in others)
            out = out + (num / den) * self.values[idx[a]]
        return out


def as_time_function(x):
    """Wrap samples or a callable as f(t); None stays None."""
    if x is None or callable(x):
        return x
    if isinstance(x, tuple) and len(x) == 2:
        return TimeSeries(*x)
    raise TypeError("time-indexed field must be a callable, a TimeSeries or (times, values)")


# ---------------------------------------------------------------------------
# Schrodinger problem
# ---------------------------------------------------------------------------


@dataclass
class SchrodingerProblem:
    """i d_t v = -(1/2) Delta_A v + V v + f on a fixed grid, v(t0) = v0.

    A, V, f are callables of t (or TimeSeries); None means zero. t1 < t0
    integrates backward.
    """

    grid: Grid3
    v0: np.ndarray
    t0: float
    t1: float
    A: object = None
    V: object = None
    f: object = None
    dA: object = None
    dV: object = None
    df: object = None

    def __post_init__(self):
        for name in ("A", "V", "f", "dA", "dV", "df"):
            setattr(self, name, as_time_function(getattr(self, name)))
        self.v0 = np.asarray(self.v0.values if isinstance(self.v0, ScalarField) else self.v0, dtype=complex)

    def check_gauge(self, times, tol=1e-8):
        """Largest relative spectral divergence of A over the given times."""
        if self.A is None:
            return 0.0
        worst = 0.0
        for t in times:
            A = self.A(t)
            scale = max(np.sqrt(np.sum(np.abs(self.grid.grad(A[0])) ** 2)), 1e-300)
            worst = max(worst, np.sqrt(np.sum(np.abs(self.grid.div(A)) ** 2)) / scale)
        if worst > tol:
            raise ValueError(f"A is not divergence free: relative defect {worst:.2e}")
        return worst


def hamiltonian(grid: Grid3, v, A=None, V=None):
    """-(1/2) Delta_A v + V v in the symmetric Coulomb-gauge form, unprojected."""
    out = -0.5 * grid.lap(v)
    if A is not None:
        gv = grid.grad(v)
        adv = sum(A[i] * gv[i] for i in range(3)) + grid.div(A * v)
        out = out + 0.5j * adv + 0.5 * np.sum(A * A, axis=0) * v
    if V is not None:
        out = out + V * v
    return out


def schrodinger_rhs(grid: Grid3, v, A=None, V=None, f=None):
    """d_t v = -i (H v + f), projected on the 2/3 band."""
    Hv = hamiltonian(grid, v, A, V)
    if f is not None:
        Hv = Hv + f
    return grid.dealias(-1j * Hv)


def kmax2(grid: Grid3):
    """|k_max|^2 of the 2/3 band that the state and right sides live in."""
    return 3 * (2.0 / 3.0 * np.pi / grid.spacing) ** 2


def cfl_step(grid: Grid3, c_cfl=1.0):
    """Largest admissible step C_cfl / |k_max|^2."""
    return c_cfl / kmax2(grid)


def rk4_step(rhs, t, y, dt):
    k1 = rhs(t, y)
    k2 = rhs(t + dt / 2, y + dt / 2 * k1)
    k3 = rhs(t + dt / 2, y + dt / 2 * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_march(rhs, y0, t0, out_times, max_step, on_step=None):
    """Classical RK4 from t0 through out_times (monotone, either direction).

    max_step(a, b) bounds |dt| on the interval between a and b. Returns the
    states at out_times. Raises NonFiniteSolution on NaN or inf.
    """
    y = y0
    t = t0
    out = []
    step = 0
    for target in out_times:
        span = target - t
        if span != 0:
            h = max_step(min(t, target), max(t, target))
            m = max(1, int(np.ceil(abs(span) / h * (1 - 1e-12))))
            dt = span / m
            for j in range(m):
                y = rk4_step(rhs, t, y, dt)
                t = t + dt if j < m - 1 else target
                step += 1
                if not np.all(np.isfinite(y)):
                    raise NonFiniteSolution(f"non-finite values at t={t} (step {step})")
                if on_step is not None:
                    on_step(step, t, y)
        out.append(y)
    return out


@dataclass
class SchrodingerSolution:
    times: np.ndarray
    values: np.ndarray
    steps: int = 0
    dt: float = 0.0
    checkpoints: list = field(default_factory=list)


def schrodinger_integrate(p: SchrodingerProblem, times=None, dt=None, c_cfl=1.0,
                          checkpoint_dir=None, checkpoint_every=0):
    """Integrate p from t0 towards t1 and return samples at the given times.

    times defaults to [t0, t1]. dt, when given, must respect the spectral
    CFL bound; otherwise the largest admissible step is used. Checkpoints
    (MSFLD1 plus a JSON sidecar) are written every checkpoint_every steps.
    """
    g = p.grid
    bound = cfl_step(g, c_cfl)
    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.3e} exceeds C_cfl/|k_max|^2 = {bound:.3e}")
    if times is None:
        times = [p.t0, p.t1]
    times = np.asarray(times, dtype=float)
    lo, hi = min(p.t0, p.t1), max(p.t0, p.t1)
    if np.any(times < lo - 1e-12) or np.any(times > hi + 1e-12):
        raise ValueError("requested times outside [t1, t0]")
    sgn = 1.0 if p.t1 >= p.t0 else -1.0
    if np.any(np.diff(times) * sgn < 0):
        raise ValueError("requested times must run from t0 towards t1")

    def rhs(t, v):
        A = None if p.A is None else p.A(t)
        V = None if p.V is None else p.V(t)
        f = None if p.f is None else p.f(t)
        return schrodinger_rhs(g, v, A, V, f)

    ckpts = []

    def on_step(step, t, v):
        if checkpoint_dir and checkpoint_every and step % checkpoint_every == 0:
            ckpts.append(write_checkpoint(checkpoint_dir, g, step, t, v))

    v0 = g.dealias(p.v0)
    count = [0]

    def counted(step, t, v):
        count[0] = step
        on_step(step, t, v)

    vals = rk4_march(rhs, v0, p.t0, times, lambda a, b: dt, counted)
    return SchrodingerSolution(times, np.asarray(vals), count[0], dt, ckpts)


def write_checkpoint(directory, grid, step, t, v):
    """Write v as MSFLD1 with a JSON sidecar {t, step, norms}."""
    os.makedirs(directory, exist_ok=True)
    base = os.path.join(directory, f"checkpoint_{step:07d}")
    sp.write_snapshot(base + ".msfld", ScalarField(grid, v))
    dV = grid.cell_volume
    meta = {"t": float(t), "step": int(step),
            "norms": {"L2": sp.lebesgue(v, 2, dV), "L4": sp.lebesgue(v, 4, dV), "Linf": sp.lebesgue(v, np.inf, dV)}}
    with open(base + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return base + ".msfld"


# ---------------------------------------------------------------------------
# conservation identities
# ---------------------------------------------------------------------------


def _time_integral(times, y):
    """Cumulative integral from times[0]; Simpson on uniform odd grids."""
    times = np.asarray(times, dtype=float)
    y = np.asarray(y)
    return cumulative_trapezoid(y, times, initial=0.0)


def l2_identity_check(p: SchrodingerProblem, sol: SchrodingerSolution):
    """Defect of ||v(t)||^2 - ||v0||^2 = int 2 Im <v, f> over the samples.

    Returns (max defect relative to ||v0||^2 + |int|, drift per unit time).
    With f = 0 the drift is the norm change per unit time.
    """
    g = p.grid
    t = sol.times
    n2 = np.array([np.real(g.inner(v, v)) for v in sol.values])
    if p.f is None:
        src = np.zeros_like(t)
    else:
        src = np.array([2 * np.imag(g.inner(v, g.dealias(p.f(s)))) for s, v in zip(t, sol.values)])
    integral = _final_integral(t, src)
    lhs = n2 - n2[0]
    scale = max(n2[0] + np.abs(integral).max(), 1e-300)
    defect = float(np.abs(lhs - integral).max() / scale)
    span = abs(t[-1] - t[0])
    drift = float(abs(np.sqrt(n2[-1]) - np.sqrt(n2[0])) / max(np.sqrt(n2[0]), 1e-300) / max(span, 1e-300))
    return defect, drift


def _final_integral(t, y):
    """Cumulative integral of samples y(t) from t[0], 4th order when possible."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if t.size < 3:
        return cumulative_trapezoid(y, t, initial=0.0)
    for j in range(1, t.size):
        if j >= 2:
            out[j] = simpson(y[: j + 1], x=t[: j + 1])
        else:
            out[j] = 0.5 * (y[0] + y[1]) * (t[1] - t[0])
    return out


def time_derivative(p: SchrodingerProblem, t, v):
    """d_t v = -i(H v + f) at time t, band projected."""
    A = None if p.A is None else p.A(t)
    V = None if p.V is None else p.V(t)
    f = None if p.f is None else p.f(t)
    return schrodinger_rhs(p.grid, v, A, V, f)


def energy_identity_check(p: SchrodingerProblem, sol: SchrodingerSolution):
    """Relative defect of the d_t v level identity.

        ||d_t v(t)||^2 - ||d_t v(t0)||^2 = int_{t0}^t 2 Im <d_t v, f1>
        f1 = i (d_t A).grad_A v + (d_t V) v + d_t f

    Time derivatives of the potentials that are present must be supplied.
    """
    g = p.grid
    if p.A is not None and p.dA is None:
        raise ValueError("energy identity needs d_t A")
    if p.V is not None and p.dV is None:
        raise ValueError("energy identity needs d_t V")
    if p.f is not None and p.df is None:
        raise ValueError("energy identity needs d_t f")
    t = sol.times
    w2 = []
    src = []
    for s, v in zip(t, sol.values):
        w = time_derivative(p, s, v)
        f1 = np.zeros_like(v)
        if p.A is not None:
            A, dA = p.A(s), p.dA(s)
            gv = g.grad(v)
            f1 = f1 + 1j * sum(dA[i] * (gv[i] - 1j * A[i] * v) for i in range(3))
        if p.V is not None:
            f1 = f1 + p.dV(s) * v
        if p.f is not None:
            f1 = f1 + p.df(s)
        f1 = g.dealias(f1)
        w2.append(np.real(g.inner(w, w)))
        src.append(2 * np.imag(g.inner(w, f1)))
    w2 = np.array(w2)
    integral = _final_integral(t, np.array(src))
    lhs = w2 - w2[0]
    scale = max(w2.max(), np.abs(integral).max(), 1e-300)
    return float(np.abs(lhs - integral).max() / scale)


# ---------------------------------------------------------------------------
# wave equation by Duhamel panels
# ---------------------------------------------------------------------------


def panel_weights(w, h):
    """Exact Duhamel weights for a source linear on a panel of signed length h.

    With u = b - t' running over the panel ending at b,
        Is0 = int_0^h sin(w u)/w du       Is1 = int_0^h u sin(w u)/w du / h
        Ic0 = int_0^h cos(w u) du         Ic1 = int_0^h u cos(w u) du / h
    Series are used where w h is small.
    """
    w = np.asarray(w, dtype=float)
    x = w * h
    small = np.abs(x) < 1e-2
    ws = np.where(small, 1.0, w)
    s, c = np.sin(x), np.cos(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        Is0 = (1 - c) / ws**2
        Is1 = (s - x * c) / ws**3 / h
        Ic0 = s / ws
        Ic1 = (x * s + c - 1) / ws**2 / h
    w2 = w * w
    h2 = h * h
    Is0 = np.where(small, h2 / 2 - w2 * h2 * h2 / 24 + w2 * w2 * h2**3 / 720, Is0)
    Is1 = np.where(small, h2 / 3 - w2 * h2 * h2 / 30 + w2 * w2 * h2**3 / 840, Is1)
    Ic0 = np.where(small, h - w2 * h * h2 / 6 + w2 * w2 * h * h2 * h2 / 120, Ic0)
    Ic1 = np.where(small, h / 2 - w2 * h * h2 / 8 + w2 * w2 * h * h2 * h2 / 144, Ic1)
    return Is0, Is1, Ic0, Ic1


def wave_panel(w, Bh, Ph, Sa, Sb, h):
    """Advance (B, d_t B) in Fourier space from a to b = a + h.

    Sa, Sb are the source coefficients at a and b, linear in between.
    Works for either sign of h.
    """
    c = np.cos(w * h)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinc = np.where(w > 0, np.sin(w * h) / np.where(w > 0, w, 1.0), h)
    Is0, Is1, Ic0, Ic1 = panel_weights(w, h)
    # S(b - u) = Sb + (Sa - Sb) u / h
    dS = Sa - Sb
    B_new = c * Bh + sinc * Ph + Is0 * Sb + Is1 * dS
    P_new = -w * np.sin(w * h) * Bh + c * Ph + Ic0 * Sb + Ic1 * dS
    return B_new, P_new


@dataclass
class WaveProblem:
    """d_t^2 B - Delta B = S with B(t0) = d_t B(t0) = 0.

    S is given by samples (S_times, S_values), linear in t between them.
    """

    grid: Grid3
    S_times: np.ndarray
    S_values: np.ndarray
    t0: float
    times: np.ndarray

    def __post_init__(self):
        self.S_times = np.asarray(self.S_times, dtype=float)
        self.S_values = np.asarray(self.S_values)
        self.times = np.asarray(self.times, dtype=float)
        order = np.argsort(self.S_times)
        self.S_times, self.S_values = self.S_times[order], self.S_values[order]


def wave_duhamel(p: WaveProblem, project=True):
    """(B, d_t B) at p.times, exact for piecewise-linear sources.

    B(t) = int_t^{t0} w^-1 sin(w (t' - t)) S(t') dt' for t <= t0, from
    B'' + w^2 B = S with zero data at t0; times after t0 integrate forward.
    Sources are Leray projected first when project is set.
    """
    g = p.grid
    w = g.kmag
    S_hat = g.fft(p.S_values)
    if project:
        S_hat = np.stack([sp.leray_hat(g, s) for s in S_hat])

    def S_at(t):
        ts = p.S_times
        if t <= ts[0]:
            return S_hat[0] if np.isclose(t, ts[0]) else _outside(t)
        if t >= ts[-1]:
            return S_hat[-1] if np.isclose(t, ts[-1]) else _outside(t)
        j = int(np.searchsorted(ts, t)) - 1
        lam = (t - ts[j]) / (ts[j + 1] - ts[j])
        return (1 - lam) * S_hat[j] + lam * S_hat[j + 1]

    def _outside(t):
        raise ValueError(f"source not sampled at t={t}")

    out_B = {}
    out_P = {}
    for sgn in (-1, 1):
        targets = sorted({float(t) for t in p.times if sgn * (t - p.t0) > 0}, reverse=(sgn < 0))
        if not targets:
            continue
        end = targets[-1]
        knots = [x for x in p.S_times if sgn * (x - p.t0) > 0 and sgn * (x - end) < 0]
        path = sorted(set(knots) | set(targets), reverse=(sgn < 0))
        Bh = np.zeros((3,) + g.shape, dtype=complex)
        Ph = np.zeros_like(Bh)
        a, Sa = p.t0, S_at(p.t0)
        for b in path:
            Sb = S_at(b)
            Bh, Ph = wave_panel(w, Bh, Ph, Sa, Sb, b - a)
            a, Sa = b, Sb
            if b in targets:
                out_B[b] = g.ifft(Bh).real
                out_P[b] = g.ifft(Ph).real
    zero = np.zeros((3,) + g.shape)
    B = np.stack([out_B.get(float(t), zero) for t in p.times])
    P = np.stack([out_P.get(float(t), zero) for t in p.times])
    return B, P


# ---------------------------------------------------------------------------
# Strichartz diagnostics
# ---------------------------------------------------------------------------


def admissible(q, r, tol=1e-12):
    """0 <= 2/q = 3/2 - 3/r <= 1."""
    lhs = 0.0 if np.isinf(q) else 2.0 / q
    return abs(lhs - sp.delta(r)) < tol and -tol <= lhs <= 1 + tol


class FreeEvolution:
    """Exact U(t) = exp(i t Delta / 2) norms of a fixed datum.

    Small |t| uses the Fourier multiplier on the box, valid while the wave
    stays inside; large |t| uses U(t) = M D F M, whose transform is exact
    once M(t) u is resolved. The switch time is the point of a geometric
    ladder where the larger of the two edge leakages is smallest; it must
    be below tol.
    """

    def __init__(self, u, grid: Grid3, tol=1e-6):
        self.u = np.asarray(u, dtype=complex)
        self.grid = grid
        self.xi = grid.reciprocal()
        ladder = np.geomspace(0.05, 64.0, 57)
        leak = [max(self._edge(self.field(s), grid), self._edge(self._dollard(s, self.u), self.xi),
                    self._edge(self._dollard(s, np.conj(self.u)), self.xi)) for s in ladder]
        j = int(np.argmin(leak))
        self.leakage = float(leak[j])
        self.t_switch = float(ladder[j])
        if self.leakage > tol:
            raise ValueError(f"box too small for exact free evolution (edge leakage {self.leakage:.1e})")

    @staticmethod
    def _edge(f, grid, frac=0.8):
        a = np.abs(f) ** 2
        X = grid.X
        far = (np.abs(X[0]) > frac * grid.L / 2) | (np.abs(X[1]) > frac * grid.L / 2) | (np.abs(X[2]) > frac * grid.L / 2)
        total = a.sum()
        return float(a[np.broadcast_to(far, a.shape)].sum() / total) if total > 0 else 0.0

    def _dollard(self, s, u):
        g = self.grid
        mu = np.exp(0.5j * g.r2 / s) * u
        return np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(mu))) * g.cell_volume / (2 * np.pi) ** 1.5

    def field(self, t):
        """U(t) u on the box, for |t| up to the switch time."""
        g = self.grid
        return g.ifft(np.exp(-0.5j * t * g.k2) * g.fft(self.u))

    def norms(self, t, rs):
        """||U(t) u||_r for each r in rs, from one evaluation."""
        if abs(t) <= self.t_switch:
            f, dV, direct = self.field(t), self.grid.cell_volume, True
        else:
            f = self._dollard(abs(t), self.u if t > 0 else np.conj(self.u))
            dV, direct = self.xi.cell_volume, False
        return [(1.0 if direct else abs(t) ** -sp.delta(r)) * sp.lebesgue(f, r, dV) for r in rs]

    def norm(self, t, r):
        return self.norms(t, [r])[0]


def _window_times(window, per_unit=32, per_octave=32):
    near = np.linspace(0.0, 1.0, per_unit + 1)
    far = np.geomspace(1.0, window, int(round(np.log2(window) * per_octave)) + 1)
    return near, far


def strichartz_norms(ev: FreeEvolution, pairs, window):
    """||U(t) u; L^q([-w, w], L^r)|| for each pair and w in (window, 2 window).

    [0, 1] is integrated by the trapezoid rule, [1, w] by dyadic blocks.
    """
    rs = sorted({float(r) for _, r in pairs})
    near, far = _window_times(2 * window)
    samples = {sgn: (np.array([ev.norms(sgn * t, rs) for t in near]),
                     np.array([ev.norms(sgn * t, rs) for t in far])) for sgn in (1, -1)}
    cut = int(np.searchsorted(far, window * (1 + 1e-12)))
    out = {}
    for q, r in pairs:
        j = rs.index(float(r))
        for w, stop in ((window, cut), (2 * window, far.size)):
            parts = []
            for yn, yf in samples.values():
                a, b = yn[:, j], yf[:stop, j]
                if np.isinf(q):
                    parts.append(max(a.max(), b.max()))
                else:
                    parts.append(float(np.trapezoid(a**q, near)) + sp.time_block_norm(far[:stop], b, q).value ** q)
            out[(float(q), float(r), w)] = max(parts) if np.isinf(q) else sum(parts) ** (1.0 / q)
    return out


@dataclass
class StrichartzReport:
    pairs: list
    window: float
    ratios: dict
    doubled: dict
    stability: dict
    truncated: bool = True


def strichartz_check(u, grid: Grid3, pairs, window=32.0):
    """Ratios ||U(t)u; L^q L^r|| / ||u||_2 on [-window, window] and twice that."""
    for q, r in pairs:
        if not admissible(q, r):
            raise ValueError(f"pair (q, r) = ({q}, {r}) is not admissible")
    ev = FreeEvolution(u, grid)
    n2 = sp.lebesgue(ev.u, 2, grid.cell_volume)
    vals = strichartz_norms(ev, pairs, window)
    ratios, doubled, stab = {}, {}, {}
    for q, r in pairs:
        key = (float(q), float(r))
        ratios[key] = vals[key + (window,)] / n2
        doubled[key] = vals[key + (2 * window,)] / n2
        stab[key] = abs(doubled[key] - ratios[key]) / ratios[key]
    return StrichartzReport(list(pairs), window, ratios, doubled, stab)


@dataclass
class WaveStrichartzReport:
    lhs: dict
    rhs: dict
    ratios: dict


def wave_strichartz_check(grid: Grid3, S_times, S_values):
    """Both sides of the three wave estimates on I = [S_times[0], S_times[-1]].

    B has zero data at the start of the window and is sampled at S_times.
        L4L4:     ||B; L4 L4||                         vs ||S; L4/3 L4/3||
        grad:     ||grad B; L4 L4|| v ||d_t B; L4 L4|| vs ||grad S; L4/3 L4/3||
        energy:   sup(||grad B||_2 v ||d_t B||_2)      vs ||S; L1 L2||
    Source samples are Leray projected. The energy ratio is constant free.
    """
    t = np.asarray(S_times, dtype=float)
    S = np.stack([sp.leray_project(s, grid) for s in np.asarray(S_values)])
    B, P = wave_duhamel(WaveProblem(grid, t, S, t[0], t))
    dV = grid.cell_volume

    def grad_norms(F, r):
        G = np.stack([grid.grad(F[i]) for i in range(3)]).reshape((9,) + grid.shape)
        return sp.lebesgue(G, r, dV, True)

    def tnorm(vals, q):
        vals = np.asarray(vals)
        if np.isinf(q):
            return float(vals.max())
        return float(np.trapezoid(vals**q, t)) ** (1.0 / q)

    nB4 = [sp.lebesgue(b, 4, dV, True) for b in B]
    ngB4 = [grad_norms(b, 4) for b in B]
    nP4 = [sp.lebesgue(x, 4, dV, True) for x in P]
    nS43 = [sp.lebesgue(s, 4 / 3, dV, True) for s in S]
    ngS43 = [grad_norms(s, 4 / 3) for s in S]
    nS2 = [sp.lebesgue(s, 2, dV, True) for s in S]
    ngB2 = [grad_norms(b, 2) for b in B]
    nP2 = [sp.lebesgue(x, 2, dV, True) for x in P]
    lhs = {"L4L4": tnorm(nB4, 4), "grad": max(tnorm(ngB4, 4), tnorm(nP4, 4)),
           "energy": max(max(ngB2), max(nP2))}
    rhs = {"L4L4": tnorm(nS43, 4 / 3), "grad": tnorm(ngS43, 4 / 3), "energy": tnorm(nS2, 1)}
    ratios = {k: (lhs[k] / rhs[k] if rhs[k] > 0 else (0.0 if lhs[k] == 0 else np.inf)) for k in lhs}
    return WaveStrichartzReport(lhs, rhs, ratios)


# ---------------------------------------------------------------------------
# Hartree estimates
# ---------------------------------------------------------------------------


def hartree_exponents(deltas):
    """Lebesgue exponents r_i = 6 / (3 - 2 delta_i) after checking the constraints."""
    d = np.asarray(deltas, dtype=float)
    if d.shape != (4,):
        raise ValueError("need four exponents delta_1..delta_4")
    if np.any(d < 0) or np.any(d > 1):
        raise ValueError("each delta_i must lie in [0, 1]")
    if abs(d.sum() - 1) > 1e-12:
        raise ValueError("the delta_i must sum to 1")
    if not 0 < d[0] + d[1] < 1:
        raise ValueError("need 0 < delta_1 + delta_2 < 1")
    return 6.0 / (3.0 - 2.0 * d)


def hartree_inequality_check(v1, v2, v3, deltas, grid: Grid3):
    """||g(conj(v1) v2) v3||_{r4'} / prod ||v_i||_{r_i} with r4' = r4 / (r4 - 1)."""
    r = hartree_exponents(deltas)
    dV = grid.cell_volume
    pot = sp.coulomb(np.conj(v1) * v2, grid)
    r4c = r[3] / (r[3] - 1.0)
    lhs = sp.lebesgue(pot * v3, r4c, dV)
    rhs = np.prod([sp.lebesgue(v, ri, dV) for v, ri in zip((v1, v2, v3), r[:3])])
    if rhs == 0:
        return 0.0 if lhs == 0 else np.inf
    return float(lhs / rhs)


def hartree_sup_check(v1, v2, r1, grid: Grid3, eps=0.1):
    """||g(conj(v1) v2)||_inf / (||v2||_{r2} (||v1||_{r1+} ||v1||_{r1-})^{1/2}).

    3/r2 = 2 - 3/r1 and 1/r1(+-) = (1 -+ eps)/r1.
    """
    if not 0 < 3.0 / r1 <= 2:
        raise ValueError("need 0 < 3/r1 <= 2")
    r2 = 3.0 / (2.0 - 3.0 / r1)
    rp, rm = r1 / (1 - eps), r1 / (1 + eps)
    dV = grid.cell_volume
    lhs = sp.lebesgue(sp.coulomb(np.conj(v1) * v2, grid), np.inf, dV)
    rhs = sp.lebesgue(v2, r2, dV) * np.sqrt(sp.lebesgue(v1, rp, dV) * sp.lebesgue(v1, rm, dV))
    if rhs == 0:
        return 0.0 if lhs == 0 else np.inf
    return float(lhs / rhs)
