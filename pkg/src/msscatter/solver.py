"""
Backward construction of (v, B) around the asymptotic profile.

The linearized system, with zero data at t0,

    i d_t v' = -(1/2) Delta_A v' + g(|u|^2) v' + G1 - R1,    A = A_a + B, u = u_a + v
    box B'   = G2 - R2

is solved on [T, t0] in the profile frame: v = M D(t) vt and fields are
stored as their values at x = t xi on the xi-grid (Bt(t, xi) = B(t, t xi)).
In that frame the free Schrodinger flow is i d_t vt = -(2t^2)^-1 Delta vt,
so classical RK4 under dt <= C_cfl t^2 / |kappa_max|^2 needs few steps, and
the physical gradient is grad -> i xi + t^-1 grad_xi.

B is advanced over each panel [t_i, t_(i+1)] on the physical grid of scale
t_(i+1) by the exact Duhamel kernels, then resampled to scale t_i. Values
on |xi| <= 1 at t depend only on values on |xi| <= 1 at later times (light
cone), so a divergence-free taper outside |xi| = H_in >= 1 keeps the field
compactly inside the box without touching the window |xi| <= H_in where B
norms are taken.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .profiles import Profile, ProfileBundle
from .propagators import TimeSeries, kmax2, rk4_march, wave_panel
from .remainders import DecayTrace, decay_fit, frame_remainders


class ContractionFailure(RuntimeError):
    """Successive-difference ratio stayed >= 1 for three iterations."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class BudgetInfeasible(ValueError):
    """A smallness condition of the norm budget fails."""


# ---------------------------------------------------------------------------
# weights and time grids
# ---------------------------------------------------------------------------


def h_weight(t):
    """h(t) = t^-1 (2 + ln t)^2."""
    t = np.asarray(t, dtype=float)
    return (2.0 + np.log(t)) ** 2 / t


def h_bar(t, lam=3.0 / 8.0):
    """t^lambda h(t)."""
    return np.asarray(t, dtype=float) ** lam * h_weight(t)


def geometric_times(T, t0, ratio=2.0 ** (1.0 / 16.0)):
    """Geometric grid on [T, t0] whose ratio is the closest to the requested one."""
    if not 1 <= T < t0:
        raise ValueError(f"need 1 <= T < t0, got T={T}, t0={t0}")
    n = max(1, int(round(np.log(t0 / T) / np.log(ratio))))
    return T * (t0 / T) ** (np.arange(n + 1) / n)


# ---------------------------------------------------------------------------
# source terms on the physical grid of a bundle
# ---------------------------------------------------------------------------


def assemble_G1(v, B, b: ProfileBundle):
    """G1 = i B.grad_{A_a} u_a + (1/2) B^2 u_a + g(|v|^2 + 2 Re conj(u_a) v) u_a."""
    xg, u, Aa = b.x_grid, b.u_a, b.A_a
    gu = xg.grad(u)
    cov = sum(B[i] * (gu[i] - 1j * Aa[i] * u) for i in range(3))
    rho = np.abs(v) ** 2 + 2 * np.real(np.conj(u) * v)
    return 1j * cov + 0.5 * np.sum(B * B, axis=0) * u + sp.coulomb(rho, xg) * u


def assemble_G2(v, B, b: ProfileBundle):
    """G2 = P Im(conj(v) grad_A v + 2 conj(v) grad_A u_a) - P B |u_a|^2, A = A_a + B."""
    xg, u = b.x_grid, b.u_a
    A = b.A_a + B
    gv, gu = xg.grad(v), xg.grad(u)
    cur = np.stack([np.imag(np.conj(v) * (gv[i] - 1j * A[i] * v) + 2 * np.conj(v) * (gu[i] - 1j * A[i] * u))
                    for i in range(3)])
    return sp.leray_project(cur - B * np.abs(u) ** 2, xg)


def grad_G2_expansion(v, B, b: ProfileBundle):
    """d_j G2_k from the product-rule expansion with no second derivatives.

        grad G2 = 2 P Im((grad conj v) grad_A v + (grad conj v) grad_A u_a + (grad conj u_a) grad_A v)
                  - P (grad A)(|v|^2 + 2 Re conj(u_a) v) - P (grad B)|u_a|^2 - 2 P B Re conj(u_a) grad u_a

    Returned as (j, k, ...) with P acting on k.
    """
    xg, u = b.x_grid, b.u_a
    A = b.A_a + B
    gv, gu = xg.grad(v), xg.grad(u)
    gA = np.stack([xg.grad(A[k]) for k in range(3)])      # (k, j)
    gB = np.stack([xg.grad(B[k]) for k in range(3)])
    rho = np.abs(v) ** 2 + 2 * np.real(np.conj(u) * v)
    ua2 = np.abs(u) ** 2
    out = []
    for j in range(3):
        F = []
        for k in range(3):
            cv = gv[k] - 1j * A[k] * v
            cu = gu[k] - 1j * A[k] * u
            term = 2 * np.imag(np.conj(gv[j]) * cv + np.conj(gv[j]) * cu + np.conj(gu[j]) * cv)
            term = term - gA[k, j] * rho - gB[k, j] * ua2 - 2 * B[k] * np.real(np.conj(u) * gu[j])
            F.append(term)
        out.append(sp.leray_project(np.stack(F), xg))
    return np.stack(out)


# ---------------------------------------------------------------------------
# profile samples on the time grid
# ---------------------------------------------------------------------------


class ProfileTrack:
    """Profile-frame quantities at every sample time.

    W      phased profile W(t)
    Aa     A_a(t, t xi)
    R1     (MD)^-1 R1
    R2     R2(t, t xi)
    Remainders are replaced by zeros when zero_remainders is set.
    """

    def __init__(self, profile: Profile, times, zero_remainders=False):
        self.profile = profile
        self.grid = profile.grid
        self.times = np.asarray(times, dtype=float)
        g = self.grid
        n = len(self.times)
        self.W = np.empty((n,) + g.shape, dtype=complex)
        self.Aa = np.empty((n, 3) + g.shape)
        self.R1 = np.zeros((n,) + g.shape, dtype=complex)
        self.R2 = np.zeros((n, 3) + g.shape)
        for i, t in enumerate(self.times):
            fr = frame_remainders(profile, t)
            self.W[i] = fr["frame"].W
            self.Aa[i] = fr["frame"].Aa
            if not zero_remainders:
                self.R1[i] = fr["R1"]
                self.R2[i] = fr["S2"] / t**3
        self.zero_remainders = zero_remainders

    def restrict(self, t0):
        """Track on the samples t <= t0 (shares arrays)."""
        keep = self.times <= t0 * (1 + 1e-12)
        out = object.__new__(ProfileTrack)
        out.profile, out.grid, out.zero_remainders = self.profile, self.grid, self.zero_remainders
        out.times = self.times[keep]
        for name in ("W", "Aa", "R1", "R2"):
            setattr(out, name, getattr(self, name)[keep])
        return out


# ---------------------------------------------------------------------------
# profile-frame calculus
# ---------------------------------------------------------------------------


def frame_grad(g, f, t):
    """(MD)^-1 grad MD f = i xi f + t^-1 grad f."""
    gf = g.grad(f)
    return np.stack([1j * g.X[c] * f + gf[c] / t for c in range(3)])


def frame_lap(g, f, t):
    """(MD)^-1 Delta MD f, composed from frame_grad so that it is -grad* grad."""
    out = 0.0
    for c in range(3):
        d = 1j * g.X[c] * f + g.partial(f, c) / t
        out = out + 1j * g.X[c] * d + g.partial(d, c) / t
    return out


def frame_hamiltonian(g, f, t, A, V):
    """(MD)^-1 (-(1/2) Delta_A + V) MD f with the symmetric A.grad form."""
    xiA = sum(g.X[c] * A[c] for c in range(3))
    gf = g.grad(f)
    adv = sum(A[c] * gf[c] for c in range(3)) + g.div(A * f)
    out = -0.5 * frame_lap(g, f, t) - xiA * f + 0.5j / t * adv + 0.5 * np.sum(A * A, axis=0) * f
    if V is not None:
        out = out + V * f
    return out


def frame_G1(g, t, W, Aa, v, B):
    """(MD)^-1 G1 in the profile frame."""
    gW = g.grad(W)
    xiB = sum(g.X[c] * B[c] for c in range(3))
    cov = -xiB * W + 1j / t * sum(B[c] * gW[c] for c in range(3)) + sum(B[c] * Aa[c] for c in range(3)) * W
    rho = np.abs(v) ** 2 + 2 * np.real(np.conj(W) * v)
    return cov + 0.5 * np.sum(B * B, axis=0) * W + sp.coulomb(rho, g) * W / t


def frame_G2(g, t, W, Aa, v, B):
    """G2(t, t xi) from profile-frame fields."""
    A = Aa + B
    gv, gW = g.grad(v), g.grad(W)
    v2 = np.abs(v) ** 2
    cross = np.real(np.conj(v) * W)
    cur = np.stack([(g.X[c] - A[c]) * (v2 + 2 * cross)
                    + np.imag(np.conj(v) * gv[c] + 2 * np.conj(v) * gW[c]) / t
                    - B[c] * np.abs(W) ** 2 for c in range(3)])
    return sp.leray_project(cur, g) / t**3


# ---------------------------------------------------------------------------
# solution pairs
# ---------------------------------------------------------------------------


@dataclass
class SolutionPair:
    """(v, B) on the geometric grid, stored in the profile frame.

    v[i] = (MD)^-1 v(t_i); B[i], dtB[i] = B, d_t B at x = t_i xi; dtv[i] =
    (MD)^-1 d_t v(t_i).
    """

    times: np.ndarray
    v: np.ndarray
    B: np.ndarray
    dtv: np.ndarray
    dtB: np.ndarray

    @classmethod
    def zero(cls, grid, times):
        n = len(times)
        return cls(np.asarray(times, dtype=float), np.zeros((n,) + grid.shape, dtype=complex),
                   np.zeros((n, 3) + grid.shape), np.zeros((n,) + grid.shape, dtype=complex),
                   np.zeros((n, 3) + grid.shape))

    def anchored(self):
        """(v, B)(t0) = 0 exactly."""
        return not (np.any(self.v[-1]) or np.any(self.B[-1]) or np.any(self.dtB[-1]))


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


class ComovingSolver:
    """The map (v, B) -> (v', B') on a ProfileTrack.

    c_cfl scales the RK4 step bound, window = (H_in, H_out) is the taper:
    one on |xi| <= H_in, zero beyond H_out. B norms use |xi| <= H_in.
    """

    def __init__(self, track: ProfileTrack, c_cfl=2.0, window=(1.1, 1.35)):
        self.track = track
        g = self.grid = track.grid
        self.times = track.times
        self.c_cfl = c_cfl
        H_in, H_out = window
        half = g.L / 2
        ratios = self.times[:-1] / self.times[1:]
        rho = float(ratios.min())
        if not 1.0 <= H_in < H_out or H_out / rho >= half:
            raise ValueError(f"taper window {window} does not fit the box half-width {half} at ratio {rho:.4f}")
        if np.ptp(ratios) > 1e-9:
            raise ValueError("sample times must be geometric")
        self.rho = rho
        self.H_in = H_in
        r = np.sqrt(g.r2)
        self.taper = 1.0 - _smoothstep((r - H_in) / (H_out - H_in))
        self.window = r <= H_in * (1 + 1e-12)
        self.shrink = sp.dilation_matrix(g, rho)          # f(xi / rho)
        self.zoom = sp.dilation_matrix(g, 1.0 / rho)      # f(rho xi)
        self.kappa2 = kmax2(g)

    # -- Schrodinger -------------------------------------------------------

    def _schrodinger(self, A_s, V_s, f_s):
        g, ts = self.grid, self.times
        A_int, V_int, f_int = TimeSeries(ts, A_s), TimeSeries(ts, V_s), TimeSeries(ts, f_s)
        K = g.KD
        mask = g.dealias_mask
        k2 = g.k2
        X = g.X

        def rhs(t, y):
            A, V, f = A_int(t), V_int(t), f_int(t)
            yh = g.fft(y)
            gy = [g.ifft(1j * K[c] * yh) for c in range(3)]
            xiA = X[0] * A[0] + X[1] * A[1] + X[2] * A[2]
            point = (-xiA + 0.5 * (A[0] ** 2 + A[1] ** 2 + A[2] ** 2) + V) * y + f
            point = point + 0.5j / t * (A[0] * gy[0] + A[1] * gy[1] + A[2] * gy[2])
            Hh = k2 / (2 * t * t) * yh + g.fft(point)
            Hh = Hh + 0.5j / t * sum(1j * K[c] * g.fft(A[c] * y) for c in range(3))
            return g.ifft(-1j * mask * Hh)

        zero = np.zeros(g.shape, dtype=complex)
        bound = lambda a, b: self.c_cfl * a * a / self.kappa2
        out = rk4_march(rhs, zero, ts[-1], ts[::-1], bound)
        return np.stack(out[::-1])

    def dt_v(self, t, v, A, V, f):
        """(MD)^-1 d_t v = -i (H v + f) at one sample, from the equation."""
        return -1j * (frame_hamiltonian(self.grid, v, t, A, V) + f)

    # -- wave ---------------------------------------------------------------

    def _curl_taper(self, F):
        """curl(taper curl^-1 F): equals F where the taper is one, stays divergence free."""
        g = self.grid
        Fh = g.fft(F)
        K = g.KD
        k2 = K[0] ** 2 + K[1] ** 2 + K[2] ** 2
        k2 = np.where(k2 == 0, np.inf, k2)
        Ch = 1j * np.stack([K[1] * Fh[2] - K[2] * Fh[1], K[2] * Fh[0] - K[0] * Fh[2], K[0] * Fh[1] - K[1] * Fh[0]]) / k2
        C = g.ifft(Ch).real * self.taper
        Ch = g.fft(C)
        out = 1j * np.stack([K[1] * Ch[2] - K[2] * Ch[1], K[2] * Ch[0] - K[0] * Ch[2], K[0] * Ch[1] - K[1] * Ch[0]])
        return g.ifft(out).real

    def _wave(self, S):
        g, ts = self.grid, self.times
        n = len(ts)
        B = np.zeros((n, 3) + g.shape)
        P = np.zeros_like(B)
        Sh = [sp.leray_hat(g, g.fft(s)) for s in S]
        for i in range(n - 2, -1, -1):
            t_b = ts[i + 1]
            w = g.kmag / t_b
            Sa = sp.leray_hat(g, g.fft(sp.apply_axes(S[i], (self.shrink,) * 3)))
            Bh, Ph = wave_panel(w, g.fft(B[i + 1]), g.fft(P[i + 1]), Sh[i + 1], Sa, ts[i] - t_b)
            Bz = sp.apply_axes(g.ifft(Bh).real, (self.zoom,) * 3)
            Pz = sp.apply_axes(g.ifft(Ph).real, (self.zoom,) * 3)
            B[i] = self._curl_taper(Bz)
            P[i] = self._curl_taper(Pz)
        return B, P

    # -- the map ------------------------------------------------------------

    def potentials(self, pair: SolutionPair):
        """A, V, f samples of the linear problem for the iterate pair."""
        tr, g = self.track, self.grid
        A = tr.Aa + pair.B
        V = np.stack([sp.coulomb(np.abs(W + v) ** 2, g) / t for t, W, v in zip(self.times, tr.W, pair.v)])
        f = np.stack([frame_G1(g, t, W, Aa, v, B) for t, W, Aa, v, B in zip(self.times, tr.W, tr.Aa, pair.v, pair.B)])
        return A, V, f - tr.R1

    def wave_source(self, pair: SolutionPair):
        tr, g = self.track, self.grid
        G2 = np.stack([frame_G2(g, t, W, Aa, v, B) for t, W, Aa, v, B in zip(self.times, tr.W, tr.Aa, pair.v, pair.B)])
        return G2 - tr.R2

    def linearized_solve(self, pair: SolutionPair, frozen=None):
        """One application of the map; frozen=(A, V, f, S) bypasses source assembly."""
        if frozen is None:
            A, V, f = self.potentials(pair)
            S = self.wave_source(pair)
        else:
            A, V, f, S = frozen
        v = self._schrodinger(A, V, f)
        B, P = self._wave(S)
        dtv = np.stack([self.dt_v(t, vi, Ai, Vi, fi) for t, vi, Ai, Vi, fi in zip(self.times, v, A, V, f)])
        out = SolutionPair(self.times.copy(), v, B, dtv, P)
        out.sources = (A, V, f, S)
        return out


def linearized_solve(pair: SolutionPair, solver: ComovingSolver):
    """(v', B') for the iterate (v, B), zero data at t0."""
    return solver.linearized_solve(pair)


# ---------------------------------------------------------------------------
# semi-norms
# ---------------------------------------------------------------------------


def _tail(times, values, q):
    """||f; L^q([t_i, t0])|| for every sample (trapezoid in time)."""
    return sp.tail_norms(times, values, q)


@dataclass
class FrameNorms:
    """Physical norms of (v, B) at each sample, from the profile frame."""

    t: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    v4: np.ndarray
    gv2: np.ndarray
    gv3: np.ndarray
    gv4: np.ndarray
    lv2: np.ndarray
    h2: np.ndarray
    dtv2: np.ndarray
    B4: np.ndarray
    gB4: np.ndarray
    dtB4: np.ndarray
    gB2: np.ndarray
    dtB2: np.ndarray


def frame_norms(pair: SolutionPair, grid, window):
    g = grid
    dV = g.cell_volume
    cols = {k: [] for k in FrameNorms.__dataclass_fields__ if k != "t"}
    chi = window
    for t, v, dtv, B, P in zip(pair.times, pair.v, pair.dtv, pair.B, pair.dtB):
        gv = frame_grad(g, v, t)
        lv = frame_lap(g, v, t)
        gB = np.stack([g.grad(B[i]) for i in range(3)]).reshape((9,) + g.shape) / t
        Bw, gBw, Pw = B * chi, gB * chi, P * chi
        cols["v2"].append(sp.lebesgue(v, 2, dV))
        cols["v3"].append(t ** -sp.delta(3) * sp.lebesgue(v, 3, dV))
        cols["v4"].append(t ** -sp.delta(4) * sp.lebesgue(v, 4, dV))
        cols["gv2"].append(sp.lebesgue(gv, 2, dV, True))
        cols["gv3"].append(t ** -sp.delta(3) * sp.lebesgue(gv, 3, dV, True))
        cols["gv4"].append(t ** -sp.delta(4) * sp.lebesgue(gv, 4, dV, True))
        cols["lv2"].append(sp.lebesgue(lv, 2, dV))
        cols["h2"].append(sp.lebesgue(v - lv, 2, dV))
        cols["dtv2"].append(sp.lebesgue(dtv, 2, dV))
        cols["B4"].append(t**0.75 * sp.lebesgue(Bw, 4, dV, True))
        cols["gB4"].append(t**0.75 * sp.lebesgue(gBw, 4, dV, True))
        cols["dtB4"].append(t**0.75 * sp.lebesgue(Pw, 4, dV, True))
        cols["gB2"].append(t**1.5 * sp.lebesgue(gBw, 2, dV, True))
        cols["dtB2"].append(t**1.5 * sp.lebesgue(Pw, 2, dV, True))
    return FrameNorms(np.asarray(pair.times), **{k: np.asarray(v) for k, v in cols.items()})


@dataclass
class XNormReport:
    N: dict
    N_half: float
    x_norm: float
    h_params: dict
    profiles: dict = field(default_factory=dict)

    @property
    def N0(self):
        return self.N[0]

    @property
    def N2(self):
        return self.N[2]


def x_norm_report(pair: SolutionPair, grid, window):
    """The seven semi-norms, N_1/2 and the X norm over [T, t0] with J = [t, t0].

    ||v; H^2|| is ||(1 - Delta) v||_2 and W^1_4 norms are ||f||_4 + ||grad f||_4.
    """
    fn = frame_norms(pair, grid, window)
    t = fn.t
    hinv = 1.0 / h_weight(t)
    tail = lambda y, q: _tail(t, y, q)
    prof = {
        0: fn.v2,
        1: np.maximum(tail(fn.v3, 4), tail(fn.v4, 8 / 3)),
        2: tail(fn.B4, 4),
        3: fn.dtv2,
        4: np.maximum(tail(fn.gv3, 4), tail(fn.gv4, 8 / 3)),
        5: fn.lv2,
        6: np.maximum(tail(fn.gB4, 4), tail(fn.dtB4, 4)),
    }
    N = {k: float(np.max(hinv * p)) for k, p in prof.items()}
    N_half = float(np.max(hinv * fn.gv2))
    x = fn.h2 + fn.dtv2 + tail(fn.v4 + fn.gv4, 8 / 3) + tail(fn.B4 + fn.gB4, 4) + tail(fn.dtB4, 4)
    return XNormReport(N, N_half, float(np.max(hinv * x)), {"h": "t^-1 (2 + ln t)^2", "T": float(t[0]), "t0": float(t[-1])},
                       {k: hinv * p for k, p in prof.items()})


def contraction_seminorms(a: SolutionPair, b: SolutionPair, grid, window):
    """(N0, N2) of the difference a - b."""
    dV = grid.cell_volume
    t = a.times
    hinv = 1.0 / h_weight(t)
    v2 = np.array([sp.lebesgue(x - y, 2, dV) for x, y in zip(a.v, b.v)])
    B4 = np.array([s**0.75 * sp.lebesgue((x - y) * window, 4, dV, True) for s, x, y in zip(t, a.B, b.B)])
    return float(np.max(hinv * v2)), float(np.max(hinv * _tail(t, B4, 4)))


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------


@dataclass
class ContractionReport:
    distances: list
    ratios: list
    seminorms: list
    converged: bool
    iterations: int
    tol: float
    smallness: dict = field(default_factory=dict)

    @property
    def longest_contracting_run(self):
        best = run = 0
        for r in self.ratios:
            run = run + 1 if r < 1 else 0
            best = max(best, run)
        return best


def fixed_point_iterate(solver: ComovingSolver, initial: SolutionPair = None, tol=1e-6, max_iter=25,
                        budget_constants=None):
    """Iterate the map from initial (default zero) until the (N0, N2) distance
    of successive iterates is below tol relative to the iterate's (N0, N2).

    Raises ContractionFailure when the distance ratio is >= 1 for three
    consecutive iterations.
    """
    g = solver.grid
    if budget_constants is not None:
        C0, C2, c3, c4 = budget_constants
        lhs = C0 * (C2 * c4**2 + c3**2)
        if lhs >= 1:
            warnings.warn(f"smallness condition fails with measured constants: {lhs:.3g} >= 1")
    X = initial if initial is not None else SolutionPair.zero(g, solver.times)
    dists, ratios, semis = [], [], []
    converged = False
    bad = 0
    it = 0
    for it in range(1, max_iter + 1):
        Y = solver.linearized_solve(X)
        d0, d2 = contraction_seminorms(Y, X, g, solver.window)
        zero = SolutionPair.zero(g, solver.times)
        n0, n2 = contraction_seminorms(Y, zero, g, solver.window)
        d = max(d0, d2)
        if dists:
            ratios.append(d / dists[-1] if dists[-1] > 0 else (0.0 if d == 0 else np.inf))
            bad = bad + 1 if ratios[-1] >= 1 else 0
        dists.append(d)
        semis.append((n0, n2))
        X = Y
        if d <= tol * max(n0, n2) or d == 0:
            converged = True
            break
        if bad >= 3:
            rep = ContractionReport(dists, ratios, semis, False, it, tol)
            raise ContractionFailure("distance ratio >= 1 for three consecutive iterations", rep)
    return X, ContractionReport(dists, ratios, semis, converged, it, tol)


# ---------------------------------------------------------------------------
# energy bound of B
# ---------------------------------------------------------------------------


def energy_trace(pair: SolutionPair, grid, window):
    """||grad B(t)||_2 v ||d_t B(t)||_2 on the window."""
    fn = frame_norms(pair, grid, window)
    return DecayTrace("energy_B", fn.t, np.maximum(fn.gB2, fn.dtB2), route="solver")


def energy_bound_check(pair: SolutionPair, grid, window, t_max=None):
    """Energy trace, its decay fit on [T, t_max] and the source bound.

    fit is None when the window is too short for decay_fit or the trace is
    not positive on it. The bound is ||G2 - R2; L1([t, t0], L2)|| from the sources that produced
    the pair (available after linearized_solve).
    """
    tr = energy_trace(pair, grid, window)
    # the trace vanishes at t0 (zero data there), so only the fit window must be positive
    inside = tr.t <= (tr.t[-1] if t_max is None else t_max) * (1 + 1e-12)
    if t_max is None:
        inside[-1] = False
    try:
        fit = decay_fit(tr, t_max=tr.t[inside][-1])
    except ValueError:
        fit = None
    bound = None
    if hasattr(pair, "sources"):
        S = pair.sources[3]
        dV = grid.cell_volume
        s2 = np.array([t**1.5 * sp.lebesgue(s, 2, dV, True) for t, s in zip(tr.t, S)])
        bound = _tail(tr.t, s2, 1)
    return tr, fit, bound


# ---------------------------------------------------------------------------
# profile constants
# ---------------------------------------------------------------------------


def profile_constants(track: ProfileTrack, window=None):
    """Constants of the profile hypotheses measured on [T, t0].

    c3 = sup t^(1/2) ||u_a||_3, c4 = sup t^(3/4) ||grad u_a||_4,
    c  = sup t^delta(r) ||u_a, grad u_a, d_t u_a||_r over r in {2, 3, 4, inf}
         and t^(3/4) ||grad^2 u_a||_4,
    a  = sup t ||A_a, grad A_a||_inf, a0 the same for A_0,
    r1 = sup h^-1 ||R1, grad R1; L1([t, t0], L2)||,
    r2 = sup h^-1 ||R2; L4/3([t, t0], W^1_4/3)||,
    r11, r12 as r1 for the two pieces of R1.
    """
    g, prof = track.grid, track.profile
    dV = g.cell_volume
    t = track.times
    rows = {k: [] for k in ("c3", "c4", "c", "a", "a0", "R1", "R11", "R12", "R2")}
    for i, s in enumerate(t):
        W = track.W[i]
        fr = prof.frame(s)
        gW = frame_grad(g, W, s)
        dW = fr.dW - 0.5j * g.r2 * W - 1.5 / s * W - sum(g.X[c] * fr.grad_W[c] for c in range(3)) / s
        hess = np.stack([frame_grad(g, gW[c], s) for c in range(3)]).reshape((9,) + g.shape)
        # t^delta(r) ||.||_r of a physical field is the xi-grid norm of its frame form
        rows["c3"].append(sp.lebesgue(W, 3, dV))
        rows["c4"].append(sp.lebesgue(gW, 4, dV, True))
        cs = [sp.lebesgue(f, r, dV, f.ndim == 4) for r in (2, 3, 4, np.inf) for f in (W, gW, dW)]
        cs.append(sp.lebesgue(hess, 4, dV, True))
        rows["c"].append(max(cs))
        Aa = track.Aa[i]
        gA = np.stack([g.grad(Aa[c]) for c in range(3)]).reshape((9,) + g.shape) / s
        rows["a"].append(s * max(sp.lebesgue(Aa, np.inf, dV, True), sp.lebesgue(gA, np.inf, dV, True)))
        rows["a0"].append(s * sp.lebesgue(fr.A0, np.inf, dV, True))
        fm = frame_remainders(prof, s)
        R1 = track.R1[i]
        gR1 = frame_grad(g, R1, s)
        rows["R1"].append(sp.lebesgue(R1, 2, dV) + sp.lebesgue(gR1, 2, dV, True))
        rows["R11"].append(sp.lebesgue(fm["R11"], 2, dV))
        rows["R12"].append(sp.lebesgue(fm["R12"], 2, dV))
        R2 = track.R2[i]
        gR2 = np.stack([g.grad(R2[c]) for c in range(3)]).reshape((9,) + g.shape) / s
        k = s ** (3 / (4 / 3))
        rows["R2"].append(k * (sp.lebesgue(R2, 4 / 3, dV, True) + sp.lebesgue(gR2, 4 / 3, dV, True)))
    hinv = 1.0 / h_weight(t)
    out = {k: float(max(rows[k])) for k in ("c3", "c4", "c", "a", "a0")}
    out["r1"] = float(np.max(hinv * _tail(t, np.array(rows["R1"]), 1)))
    out["r11"] = float(np.max(hinv * _tail(t, np.array(rows["R11"]), 1)))
    out["r12"] = float(np.max(hinv * _tail(t, np.array(rows["R12"]), 1)))
    out["r2"] = float(np.max(hinv * _tail(t, np.array(rows["R2"]), 4 / 3)))
    return out


# ---------------------------------------------------------------------------
# norm budget
# ---------------------------------------------------------------------------


@dataclass
class NormBudget:
    C: tuple = (1.0,) * 7
    a: float = 1.0
    c: float = 1.0
    c3: float = 0.1
    c4: float = 0.1
    a0: float = 0.0
    r1: float = 1.0
    r2: float = 1.0
    r11: float = 0.0
    r12: float = 0.0
    lam: float = 3.0 / 8.0
    N: dict = field(default_factory=dict)
    feasible: bool = False
    conditions: dict = field(default_factory=dict)
    T_min: float = float("nan")


def _n3_map(b: NormBudget, N0, N2):
    C0, C1, C2, C3, C4, C5, C6 = b.C
    a, c, c3, c4, r1, r2 = b.a, b.c, b.c3, b.c4, b.r1, b.r2

    def f(N3):
        return C3 * (2 * (a + C6 * c4**2) * np.sqrt(N0 * (N3 + r1 + 1)) + c4 * C6 * (r2 + 1)
                     + c * N2 + c3**2 * N3 + 2 * c**2 * N0 + r1 + 1)
    return f


def solve_N3(b: NormBudget, N0, N2, tol=1e-14, max_iter=100000):
    """Fixed point N3 = f(N3) by monotone iteration from 0."""
    f = _n3_map(b, N0, N2)
    x = 0.0
    for _ in range(max_iter):
        y = f(x)
        if abs(y - x) <= tol * max(1.0, abs(y)):
            return y
        x = y
    raise BudgetInfeasible("N3 iteration did not converge")


def large_T_condition(b: NormBudget, T):
    """Left side of 4 C3 C4 (a + N2 hbar(T)) N6 hbar(T) < 1."""
    C3, C4 = b.C[3], b.C[4]
    hb = h_bar(T, b.lam)
    return 4 * C3 * C4 * (b.a + b.N[2] * hb) * b.N[6] * hb


def minimum_T(b: NormBudget, T_max=1e12):
    """Smallest T >= 1 with the large-T condition at every t >= T.

    hbar rises up to t = exp(1.2) and decreases after, so the left side
    past its peak is monotone and bisection applies there.
    """
    peak = np.exp(1.2)
    if large_T_condition(b, peak) < 1:
        return 1.0
    if large_T_condition(b, T_max) >= 1:
        return np.inf
    lo, hi = peak, T_max
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if large_T_condition(b, mid) < 1:
            hi = mid
        else:
            lo = mid
    return float(hi)


def solve_norm_budget(b: NormBudget):
    """Resolve N0..N6 from the constants and report feasibility."""
    C0, C1, C2, C3, C4, C5, C6 = b.C
    if min(b.C) <= 0:
        raise ValueError("constants C_i must be positive")
    a, c, c3, c4, r1, r2 = b.a, b.c, b.c3, b.c4, b.r1, b.r2
    small = C0 * (C2 * c4**2 + c3**2)
    b.conditions = {"smallness": small, "contraction": small, "C3c3^2": C3 * c3**2}
    if small >= 1:
        b.feasible = False
        raise BudgetInfeasible(f"C0 (C2 c4^2 + c3^2) = {small:.4g} >= 1")
    if C3 * c3**2 >= 1:
        b.feasible = False
        raise BudgetInfeasible(f"C3 c3^2 = {C3 * c3**2:.4g} >= 1")
    # N0 = C0 (c4 N2 + c3^2 N0 + r1 + 1), N2 = C2 (c4 N0 + r2 + 1)
    M = np.array([[1 - C0 * c3**2, -C0 * c4], [-C2 * c4, 1.0]])
    rhs = np.array([C0 * (r1 + 1), C2 * (r2 + 1)])
    N0, N2 = np.linalg.solve(M, rhs)
    N3 = solve_N3(b, N0, N2)
    N5 = 4 * (N3 + r1 + 1)
    N6 = C6 * (2 * c4 * np.sqrt(N0 * (N3 + r1 + 1)) + r2 + 1)
    N1 = C1 * (c4 * N2 + 2 * c**2 * N0 + a * np.sqrt(N0 * N5) + r1 + 1)
    N4 = C4 * (a * N5 + (a + 2 * c**2) * np.sqrt(N0 * N5) + c * (N6 + N2) + 2 * c**2 * N0 + r1 + 1)
    b.N = {0: float(N0), 1: float(N1), 2: float(N2), 3: float(N3), 4: float(N4), 5: float(N5), 6: float(N6)}
    b.feasible = True
    b.T_min = minimum_T(b)
    return b


# ---------------------------------------------------------------------------
# t0 study
# ---------------------------------------------------------------------------


@dataclass
class T0Study:
    """Converged runs for several t0 with their Cauchy differences.

    constants[i]  = max |N(t1) - N(t0)| / h(t0) over N in {N0, N2}
    pointwise[i]  = max(sup_t ||dv(t)||_2, sup_t ||dB; L4([t, t0], L4)||) / h(t0)
    for consecutive t0 < t1 (differences taken on [T, t0]).
    """

    t0s: list
    seminorms: list
    differences: list
    constants: list
    pointwise: list
    reports: list
    final: tuple = None


def t0_study(track: ProfileTrack, T, factors=(64, 128, 256), c_cfl=2.0, window=(1.1, 1.35), tol=1e-6, max_iter=25):
    """Fixed points for t0 = factor T (factors ascending) on nested time grids."""
    semis, reps, t0s, diffs, consts, pw = [], [], [], [], [], []
    prev = None
    for f in sorted(factors):
        t0 = f * T
        sub = track.restrict(t0)
        solver = ComovingSolver(sub, c_cfl, window)
        X, rep = fixed_point_iterate(solver, tol=tol, max_iter=max_iter)
        zero = SolutionPair.zero(sub.grid, sub.times)
        semis.append(contraction_seminorms(X, zero, sub.grid, solver.window))
        reps.append(rep)
        t0s.append(t0)
        if prev is not None:
            Xa, wa = prev
            m = len(Xa.times)
            t = Xa.times
            dV = sub.grid.cell_volume
            dv = np.array([sp.lebesgue(x - y, 2, dV) for x, y in zip(Xa.v, X.v[:m])])
            # the longer run keeps its B tail beyond the shorter t0
            b4 = np.array([s**0.75 * sp.lebesgue(y * wa, 4, dV, True) for s, y in zip(X.times, X.B)])
            d4 = np.array([s**0.75 * sp.lebesgue((x - y) * wa, 4, dV, True) for s, x, y in zip(t, Xa.B, X.B[:m])])
            tail_long = _tail(X.times, b4, 4)[m - 1]
            dB = (_tail(t, d4, 4) ** 4 + tail_long**4) ** 0.25
            h0 = float(h_weight(t[-1]))
            diffs.append((float(dv.max()), float(dB.max())))
            consts.append(max(abs(semis[-1][0] - semis[-2][0]), abs(semis[-1][1] - semis[-2][1])) / h0)
            pw.append(max(diffs[-1]) / h0)
        prev = (X, solver.window)
    return T0Study(t0s, semis, diffs, consts, pw, reps, (X, solver))
