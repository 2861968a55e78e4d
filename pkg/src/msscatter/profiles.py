"""
Asymptotic profiles of the Maxwell-Schrodinger system in Coulomb gauge.

Profile quantities live on the xi-grid, the reciprocal grid of the data
grid that carries u_+. Physical fields at time t are realized on the
dilated grid with the same sample count and box t * L_xi, on which
D0(t) is a relabelling of samples:

    u_a(t, x)  = (it)^{-3/2} exp(i x^2 / 2t) W(t, x / t),   W = exp(-i phi) w_+
    phi(t)     = ln t (g(|w_+|^2) - xi . tA1)
    A_1(t, x)  = t^{-1} tA1(x / t),   dA_1/dt = t^{-2} ttA1(x / t)
    tA1        =  int_1^inf nu^-3 omega^-1 sin(omega (nu - 1)) D0(nu) P xi |w_+|^2 dnu
    ttA1       = -int_1^inf nu^-3 cos(omega (nu - 1)) D0(nu) P xi |w_+|^2 dnu

The nu-integrals are done in Fourier space, where D0(nu) becomes a rescaling
of the wavenumber: FT[nu^-3 D0(nu) q](kappa) = q^(nu kappa). The Fourier
transform of the compact field q = xi |w_+|^2 at scaled wavenumbers is a
separable sum (one small matrix per axis), so no interpolation enters the
integral. A free magnetic wave A_0 is evaluated pointwise through a FreeWave
object, or by Fourier multipliers on the data grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import spectral as sp
from .families import FreeWave
from .spectral import Grid3


@dataclass
class AsymptoticState:
    """Asymptotic data (u_+, A_+, Adot_+) on a physical data grid."""

    grid: Grid3
    u_plus: np.ndarray
    A_plus: np.ndarray
    Adot_plus: np.ndarray
    magnetic: FreeWave | None = None

    @classmethod
    def from_families(cls, grid, u_plus, magnetic=None):
        """Sample the magnetic free wave at t = 0 and keep it for exact evaluation."""
        if magnetic is None:
            z = np.zeros((3,) + grid.shape)
            return cls(grid, np.asarray(u_plus, dtype=complex), z, z.copy(), None)
        A, dA = magnetic.sample(grid)
        return cls(grid, np.asarray(u_plus, dtype=complex), A, dA, magnetic)

    def divergence_defects(self):
        return (sp.VectorField(self.grid, self.A_plus).divergence_defect(),
                sp.VectorField(self.grid, self.Adot_plus).divergence_defect())


def build_w_plus(state):
    """w_+ = F u_+ (unitary Fourier transform) on the reciprocal grid.

    Returns (w_plus, xi_grid). The xi-grid has spacing 2 pi / L and box
    2 pi n / L, so Plancherel holds exactly for the discrete norms.
    """
    g = state.grid
    u = np.fft.ifftshift(state.u_plus)
    w = np.fft.fftshift(np.fft.fftn(u)) * g.cell_volume / (2 * np.pi) ** 1.5
    return w, g.reciprocal()


# ---------------------------------------------------------------------------
# tA1 and ttA1 by nu-quadrature in Fourier space
# ---------------------------------------------------------------------------


def _axis_ft(grid, scale):
    """Matrix of q -> sum_j q_j exp(-i scale kappa_m xi_j) dxi, band-truncated."""
    kap = grid.wavenumbers * scale
    E = np.exp(-1j * np.outer(kap, grid.coords)) * grid.spacing
    E[np.abs(kap) > np.pi / grid.spacing * (1 + 1e-12)] = 0.0
    return E


def _moment_transform(rho, grid, scale):
    """Continuous FT of xi_c rho at scale * kappa for c = 0, 1, 2."""
    E = _axis_ft(grid, scale)
    Ep = E * grid.coords[None, :]
    n = grid.n
    tz = rho @ E.T
    tzp = rho @ Ep.T
    tyz = np.matmul(E, tz)
    typz = np.matmul(Ep, tz)
    tyzp = np.matmul(E, tzp)
    gx = (Ep @ tyz.reshape(n, -1)).reshape(n, n, n)
    gy = (E @ typz.reshape(n, -1)).reshape(n, n, n)
    gz = (E @ tyzp.reshape(n, -1)).reshape(n, n, n)
    return np.stack([gx, gy, gz])


def _panels(nu_max):
    edges = [1.0]
    while edges[-1] < nu_max:
        edges.append(min(2 * edges[-1], nu_max))
    return edges


@dataclass
class TildeQuadrature:
    """Fourier coefficients of tA1 and ttA1 at wavenumbers scale * kappa_m.

    hat_sin / hat_cos are continuous Fourier transforms (no 2 pi factors)
    with the Leray projector applied; info records the quadrature.
    """

    grid: Grid3
    scale: float
    hat_sin: np.ndarray
    hat_cos: np.ndarray
    info: dict = field(default_factory=dict)

    def synthesize(self, which="sin", box_scale=None):
        """Field from the coefficients; see synthesize()."""
        c = self.hat_sin if which == "sin" else -self.hat_cos
        return synthesize(c, self.grid, box_scale)


def synthesize(coeffs, grid, box_scale=None):
    """Real samples of the function whose continuous FT at kappa_m / box_scale is coeffs.

    The samples sit at box_scale * xi_j, i.e. on grid.scaled(box_scale).
    """
    s = 1.0 if box_scale is None else box_scale
    S = np.exp(1j * np.outer(grid.coords, grid.wavenumbers)) / grid.L
    out = sp.apply_axes(coeffs, (S, S, S)).real
    return out / s**3


def tilde_quadrature(w_plus, grid, scale=1.0, nodes=64, tol=1e-6):
    """nu-integrals for tA1 and ttA1 at wavenumbers scale * kappa_m.

    Composite Gauss-Legendre on panels [1, 2, 4, ...] up to the nu where
    every scaled wavenumber has left the sampling band of the xi-grid; the
    integrand is zero beyond it. The reported band_edge is the size of the
    moment transform on the band edge relative to its peak, an upper bound
    for the truncated part of the integrand.
    """
    rho = np.abs(w_plus) ** 2
    kmag = grid.kmag * scale
    kmax_axis = np.pi / grid.spacing
    kmin = 2 * np.pi / grid.L * abs(scale)
    nu_max = max(kmax_axis / kmin, 1.0 + 1e-9)
    x, wts = leggauss(nodes)
    acc_s = np.zeros((3,) + grid.shape, dtype=complex)
    acc_c = np.zeros_like(acc_s)
    safe = np.where(kmag == 0, 1.0, kmag)
    edges = _panels(nu_max)
    count = 0
    for a, b in zip(edges[:-1], edges[1:]):
        for xi, wi in zip(x, wts):
            nu = 0.5 * (b - a) * xi + 0.5 * (a + b)
            w = 0.5 * (b - a) * wi
            G = _moment_transform(rho, grid, scale * nu)
            arg = kmag * (nu - 1.0)
            acc_s += (w * np.sin(arg) / safe) * G
            acc_c += (w * np.cos(arg)) * G
            count += 1
    G0 = _moment_transform(rho, grid, scale)
    peak = np.abs(G0).max()
    edge = _band_edge(rho, grid)
    band_edge = edge / peak if peak > 0 else 0.0
    hs = sp.leray_hat(grid, acc_s)
    hc = sp.leray_hat(grid, acc_c)
    hs[:, 0, 0, 0] = 0.0
    hc[:, 0, 0, 0] = 0.0
    info = {"nu_max": float(nu_max), "panels": len(edges) - 1, "nodes": count,
            "band_edge": float(band_edge), "scale": float(scale)}
    if band_edge > tol:
        raise ValueError(f"tA1 quadrature: band-edge tail {band_edge:.2e} exceeds {tol:.1e}; refine the grid")
    return TildeQuadrature(grid, scale, hs, hc, info)


def _band_edge(rho, grid):
    """max |FT(xi rho)| over wavenumbers with one component on the band edge."""
    G = _moment_transform(rho, grid, 1.0)
    h = grid.n // 2
    return max(np.abs(G[:, h]).max(), np.abs(G[:, :, h]).max(), np.abs(G[:, :, :, h]).max())


def build_tilde_A1(w_plus, grid, nodes=64, tol=1e-8):
    """tA1 on the xi-grid, with quadrature info."""
    q = tilde_quadrature(w_plus, grid, 1.0, nodes, tol)
    return q.synthesize("sin"), q.info


def build_tildetilde_A1(w_plus, grid, nodes=64, tol=1e-8):
    """ttA1 on the xi-grid, with quadrature info."""
    q = tilde_quadrature(w_plus, grid, 1.0, nodes, tol)
    return q.synthesize("cos"), q.info


def build_phase(w_plus, tilde_A1, t, grid):
    """phi(t) = ln t (g(|w_+|^2) - xi . tA1), real."""
    if t < 1:
        raise ValueError(f"phase defined for t >= 1, got t={t}")
    return np.log(t) * _long_range(w_plus, tilde_A1, grid)


def _long_range(w_plus, tilde_A1, grid):
    g = sp.coulomb(np.abs(w_plus) ** 2, grid)
    xi = grid.X
    return g - sum(xi[i] * tilde_A1[i] for i in range(3))


# ---------------------------------------------------------------------------
# M, D, D0, J
# ---------------------------------------------------------------------------


def physical_grid(xi_grid, t, refine=1):
    """Grid carrying fields at time t: box t L_xi, refine times more points."""
    return Grid3(xi_grid.n * refine, xi_grid.L * t)


def apply_MD(f, t, xi_grid, refine=1):
    """(M(t) D(t) f)(x) = (it)^{-3/2} exp(i x^2 / 2t) f(x / t) on the dilated grid."""
    xg = physical_grid(xi_grid, t, refine)
    fr = sp.refine(f, xi_grid, refine)
    return (1j * t) ** -1.5 * np.exp(0.5j * xg.r2 / t) * fr


def apply_J(v, t, grid):
    """J(t) v = x v + i t grad v, as a (3, n, n, n) array."""
    if t <= 0:
        raise ValueError("J(t) needs t > 0")
    gv = grid.grad(v)
    return np.stack([grid.X[i] * v + 1j * t * gv[i] for i in range(3)])


def gauge_grad(f, t, xi_grid):
    """(i xi + t^{-1} grad) f: the profile-frame image of the gradient."""
    gf = xi_grid.grad(f)
    return np.stack([1j * xi_grid.X[i] * f + gf[i] / t for i in range(3)])


def check_commutations(f, t, xi_grid, refine=1, h=None):
    """Relative defects of the dilation/phase commutation identities.

    grad MD   = MD (i xi + t^-1 grad)
    i d_t MD  = MD (i d_t + xi^2 / 2 - i t^-1 (xi . grad + 3/2))
    J MD      = i MD grad
    (i d_t + Delta / 2) MD = MD (i d_t + (2 t^2)^-1 Delta)

    f is time independent and lives on the xi-grid. Left sides use spectral
    derivatives on the physical grid and a fourth-order difference in t.
    """
    xg = physical_grid(xi_grid, t, refine)
    fine = Grid3(xi_grid.n * refine, xi_grid.L)
    ff = sp.refine(f, xi_grid, refine)
    u = apply_MD(f, t, xi_grid, refine)

    def rel(a, b):
        den = np.sqrt(np.sum(np.abs(b) ** 2))
        num = np.sqrt(np.sum(np.abs(a - b) ** 2))
        return 0.0 if den == 0 and num == 0 else float(num / max(den, 1e-300))

    def md(g):
        return (1j * t) ** -1.5 * np.exp(0.5j * xg.r2 / t) * g

    out = {}
    out["grad"] = rel(xg.grad(u), np.stack([md(c) for c in gauge_grad(ff, t, fine)]))
    out["J"] = rel(apply_J(u, t, xg), np.stack([1j * md(c) for c in fine.grad(ff)]))

    h = 1e-2 * t if h is None else h

    def u_at(s):
        m = sp.interp_matrix(fine.n, fine.L, fine.coords * t / s)
        fs = sp.apply_axes(ff, (m, m, m))
        return (1j * s) ** -1.5 * np.exp(0.5j * xg.r2 / s) * fs

    dtu = (-u_at(t + 2 * h) + 8 * u_at(t + h) - 8 * u_at(t - h) + u_at(t - 2 * h)) / (12 * h)
    X = fine.X
    xgradf = sum(X[i] * fine.partial(ff, i) for i in range(3))
    rhs_t = md(0.5 * fine.r2 * ff - 1j / t * (xgradf + 1.5 * ff))
    out["dt"] = rel(1j * dtu, rhs_t)
    out["schrodinger"] = rel(1j * dtu + 0.5 * xg.lap(u), md(fine.lap(ff) / (2 * t * t)))
    return out


# ---------------------------------------------------------------------------
# free magnetic wave
# ---------------------------------------------------------------------------


def build_A0(state, t):
    """Free wave A_0 = cos(omega t) A_+ + omega^-1 sin(omega t) Adot_+ and its time derivative."""
    g = state.grid
    Ah = g.fft(state.A_plus)
    Adh = g.fft(state.Adot_plus)
    w = g.kmag
    A0 = g.ifft(np.cos(w * t) * Ah + sp.omega_multiplier(g, "sinc", t) * Adh).real
    dA0 = g.ifft(-w * np.sin(w * t) * Ah + np.cos(w * t) * Adh).real
    return A0, dA0


def build_A1(tilde_A1, t, tildetilde_A1=None):
    """A_1 = t^-1 D0(t) tA1 and dA_1/dt = t^-2 D0(t) ttA1 on the dilated grid.

    On the grid of box t L_xi the dilation is a relabelling of samples, so
    the returned arrays are exact rescalings.
    """
    if t < 1:
        raise ValueError(f"A_1 defined for t >= 1, got t={t}")
    A1 = tilde_A1 / t
    dA1 = None if tildetilde_A1 is None else tildetilde_A1 / t**2
    return A1, dA1


# ---------------------------------------------------------------------------
# the profile object
# ---------------------------------------------------------------------------


@dataclass
class FrameSample:
    """Profile-frame fields at one time (all on the xi-grid)."""

    t: float
    W: np.ndarray
    grad_W: np.ndarray
    lap_W: np.ndarray
    A0: np.ndarray       # A_0(t, t xi)
    dA0: np.ndarray      # dA_0/dt(t, t xi)
    Aa: np.ndarray       # A_a(t, t xi) = A_0 + t^-1 tA1
    dW: np.ndarray       # dW/dt


@dataclass
class ProfileBundle:
    """All asymptotic objects at time t.

    Profile-frame fields are on xi_grid; physical fields on x_grid (box
    t L_xi with refine * n points per axis).
    """

    t: float
    xi_grid: Grid3
    x_grid: Grid3
    refine: int
    w_plus: np.ndarray
    phase: np.ndarray
    tilde_A1: np.ndarray
    tildetilde_A1: np.ndarray
    frame: FrameSample
    u_a: np.ndarray
    A0: np.ndarray
    dA0: np.ndarray
    A1: np.ndarray
    dtA1: np.ndarray
    dt_u_a: np.ndarray

    @property
    def A_a(self):
        return self.A0 + self.A1


class Profile:
    """Time-independent profile data with constructors for every time.

    Parameters
    ----------
    w_plus : profile function on xi_grid
    xi_grid : reciprocal grid of the data grid
    magnetic : FreeWave for exact A_0 evaluation, or None
    state : AsymptoticState used when magnetic is None and A_+ != 0
    nodes : Gauss-Legendre nodes per nu-panel
    """

    def __init__(self, w_plus, xi_grid, magnetic=None, state=None, nodes=64, tilde=None):
        self.w = np.asarray(w_plus, dtype=complex)
        self.grid = xi_grid
        self.magnetic = magnetic
        self.state = state
        if tilde is None:
            q = tilde_quadrature(self.w, xi_grid, 1.0, nodes)
            tilde = (q.synthesize("sin"), q.synthesize("cos"), q.info)
        self.tA1, self.ttA1, self.quad_info = tilde
        self.rho = np.abs(self.w) ** 2
        self.g = sp.coulomb(self.rho, xi_grid)
        self.long_range = self.g - sum(xi_grid.X[i] * self.tA1[i] for i in range(3))

    @classmethod
    def from_state(cls, state, nodes=64):
        w, xg = build_w_plus(state)
        return cls(w, xg, magnetic=state.magnetic, state=state, nodes=nodes)

    def phase(self, t):
        return np.log(t) * self.long_range

    def W(self, t, phased=True):
        return np.exp(-1j * self.phase(t)) * self.w if phased else self.w.copy()

    def A0_at(self, t, X):
        """(A_0, dA_0/dt) at time t and points X (3, ...)."""
        if self.magnetic is not None:
            return self.magnetic.fields(t, X)
        if self.state is None or not (np.any(self.state.A_plus) or np.any(self.state.Adot_plus)):
            z = np.zeros_like(X, dtype=float)
            return z, z.copy()
        return _grid_wave_at(self.state, t, X)

    def frame(self, t, phased=True):
        """Profile-frame sample at time t."""
        g = self.grid
        W = self.W(t, phased)
        gW = g.grad(W)
        lW = g.lap(W)
        X = g.position_array() * t
        A0, dA0 = self.A0_at(t, X)
        Aa = A0 + self.tA1 / t
        dW = -1j * self.long_range * W / t if phased else np.zeros_like(W)
        return FrameSample(t, W, gW, lW, A0, dA0, Aa, dW)

    def bundle(self, t, refine=1, phased=True):
        """Physical realization at time t on the dilated (and refined) grid."""
        if t < 1:
            raise ValueError(f"profiles are built for t >= 1, got t={t}")
        g = self.grid
        fr = self.frame(t, phased)
        xg = physical_grid(g, t, refine)
        fine = Grid3(g.n * refine, g.L)
        R = lambda f: sp.refine(f, g, refine)
        M = (1j * t) ** -1.5 * np.exp(0.5j * xg.r2 / t)
        u_a = M * R(fr.W)
        A0, dA0 = self.A0_at(t, xg.position_array())
        A1, dA1 = build_A1(R(self.tA1), t, R(self.ttA1))
        # d/dt of (it)^-3/2 exp(i x^2/2t) W(t, x/t), closed form
        xi = g.X
        Y = fr.dW - sum(xi[i] * fr.grad_W[i] for i in range(3)) / t
        dt_u = u_a * (-1.5 / t - 0.5j * xg.r2 / t**2) + M * R(Y)
        del fine
        return ProfileBundle(t, g, xg, refine, self.w, self.phase(t) if phased else np.zeros(g.shape),
                             self.tA1, self.ttA1, fr, u_a, A0, dA0, A1, dA1, dt_u)


def _grid_wave_at(state, t, X):
    """Trigonometric interpolation of the multiplier solution at tensor points X."""
    A0, dA0 = build_A0(state, t)
    g = state.grid
    mats = [sp.interp_matrix(g.n, g.L, _axis_points(X, i)) for i in range(3)]
    return sp.apply_axes(A0, mats), sp.apply_axes(dA0, mats)


def _axis_points(X, i):
    sl = [0, 0, 0]
    sl[i] = slice(None)
    return np.asarray(X[i][tuple(sl)]).ravel()


def md_scaling_norm(f, r, t, xi_grid):
    """||M D(t) f||_r = t^{-delta(r)} ||f||_r, exact on the dilated grid."""
    return t ** -sp.delta(r) * sp.lebesgue(f, r, xi_grid.cell_volume)
