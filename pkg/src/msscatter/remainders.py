"""
Remainders R1, R2 of the asymptotic profile, by two routes, and their decay.

Definition route, on the physical grid at time t:

    R1 = i d_t u_a + (1/2) Delta_{A_a} u_a - g(|u_a|^2) u_a
    R2 = box A_a - P Im(conj(u_a) grad_{A_a} u_a),   box A_a = P (x/t) |u_a|^2

Closed route, through the profile frame (u_a = MD W):

    R11 = (2t^2)^-1 MD Delta W
    R12 = t^-1 (x.A_0) u_a - t^-1 A_a . J u_a - (1/2) |A_a|^2 u_a,   J u_a = i MD grad W
    R2  = P (t^-1 Re conj(u_a) J u_a + A_a |u_a|^2)

Norms at large t are taken in the profile frame, where MD is an isometry of
L2 and D0(t) scales L^r norms by t^{3/r}.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .profiles import Profile, ProfileBundle


def _md(b: ProfileBundle, f):
    """M D(t) applied to a profile-frame field, realized on the bundle's grid."""
    xg = b.x_grid
    return (1j * b.t) ** -1.5 * np.exp(0.5j * xg.r2 / b.t) * sp.refine(f, b.xi_grid, b.refine)


def R1_from_definition(b: ProfileBundle):
    """R1 from its definition, with spectral derivatives on the physical grid."""
    xg, u, A = b.x_grid, b.u_a, b.A_a
    gu = xg.grad(u)
    lapA = xg.lap(u) - 2j * sum(A[i] * gu[i] for i in range(3)) - np.sum(A * A, axis=0) * u
    V = sp.coulomb(np.abs(u) ** 2, xg)
    return 1j * b.dt_u_a + 0.5 * lapA - V * u


def J_u_a(b: ProfileBundle):
    """J u_a = i MD grad W."""
    return np.stack([1j * _md(b, c) for c in b.frame.grad_W])


def R1_closed(b: ProfileBundle):
    """(R11, R12) from the reduced forms."""
    t, xg, u = b.t, b.x_grid, b.u_a
    R11 = _md(b, b.frame.lap_W) / (2 * t * t)
    X = xg.X
    xA0 = sum(X[i] * b.A0[i] for i in range(3))
    Ju = J_u_a(b)
    A = b.A_a
    R12 = xA0 * u / t - sum(A[i] * Ju[i] for i in range(3)) / t - 0.5 * np.sum(A * A, axis=0) * u
    return R11, R12


def box_A_a(b: ProfileBundle):
    """box A_a = P (x/t)|u_a|^2 (A_0 is a free wave, A_1 obeys this by construction)."""
    xg = b.x_grid
    rho = np.abs(b.u_a) ** 2
    return sp.leray_project(np.stack([xg.X[i] * rho / b.t for i in range(3)]), xg)


def R2_from_definition(b: ProfileBundle):
    xg, u, A = b.x_grid, b.u_a, b.A_a
    gu = xg.grad(u)
    cur = np.stack([np.imag(np.conj(u) * (gu[i] - 1j * A[i] * u)) for i in range(3)])
    return box_A_a(b) - sp.leray_project(cur, xg)


def R2_closed(b: ProfileBundle):
    xg, u, A = b.x_grid, b.u_a, b.A_a
    Ju = J_u_a(b)
    rho = np.abs(u) ** 2
    F = np.stack([np.real(np.conj(u) * Ju[i]) / b.t + A[i] * rho for i in range(3)])
    return sp.leray_project(F, xg)


def relative_l2(a, b):
    den = np.sqrt(np.sum(np.abs(b) ** 2))
    num = np.sqrt(np.sum(np.abs(a - b) ** 2))
    if den == 0:
        return 0.0 if num == 0 else np.inf
    return float(num / den)


@dataclass
class RemainderSample:
    """Both routes at one time and their relative discrepancies."""

    t: float
    R1_def: np.ndarray
    R1_closed: np.ndarray
    R2_def: np.ndarray
    R2_closed: np.ndarray
    cross_defect_R1: float
    cross_defect_R2: float
    norms: dict = field(default_factory=dict)


def remainder_sample(profile: Profile, t, refine=1):
    """Evaluate R1 and R2 by both routes at time t and compare them."""
    b = profile.bundle(t, refine)
    r1 = R1_from_definition(b)
    R11, R12 = R1_closed(b)
    r2 = R2_from_definition(b)
    r2c = R2_closed(b)
    dV = b.x_grid.cell_volume
    norms = {"R1_def_L2": sp.lebesgue(r1, 2, dV), "R11_L2": sp.lebesgue(R11, 2, dV),
             "R12_L2": sp.lebesgue(R12, 2, dV), "R2_def_L2": sp.lebesgue(r2, 2, dV, True),
             "R2_closed_L2": sp.lebesgue(r2c, 2, dV, True)}
    den1 = norms["R11_L2"] + norms["R12_L2"]
    d1 = float(np.sqrt(np.sum(np.abs(r1 - R11 - R12) ** 2) * dV) / den1) if den1 > 0 else 0.0
    return RemainderSample(t, r1, R11 + R12, r2, r2c, d1, relative_l2(r2, r2c), norms)


# ---------------------------------------------------------------------------
# profile-frame remainder norms (any t)
# ---------------------------------------------------------------------------


def frame_remainders(profile: Profile, t, phased=True):
    """Profile-frame images of R1 (general phase), R11, R12 and R2 at time t.

    Returns a dict of arrays on the xi-grid with
        R1 = MD R1t, R11 = MD R11t, R12 = MD R12t, R2 = t^-3 D0(t) S2t.
    R1t uses d_t W, so it holds for any phase; with the correct phase it
    equals R11t + R12t.
    """
    g = profile.grid
    fr = profile.frame(t, phased)
    W, gW = fr.W, fr.grad_W
    xi = g.X
    A0, Aa = fr.A0, fr.Aa
    R11 = fr.lap_W / (2 * t * t)
    xiA0 = sum(xi[i] * A0[i] for i in range(3))
    Aa2 = np.sum(Aa * Aa, axis=0)
    R12 = xiA0 * W - 1j / t * sum(Aa[i] * gW[i] for i in range(3)) - 0.5 * Aa2 * W
    # long-range terms: t^-1 (xi.tA1) W - t^-1 g(|w_+|^2) W
    R1 = 1j * fr.dW + R11 - profile.long_range * W / t + R12
    rho = np.abs(W) ** 2
    cur = np.stack([np.real(np.conj(W) * 1j * gW[i]) / t + Aa[i] * rho for i in range(3)])
    S2 = sp.leray_project(cur, g)
    return {"R1": R1, "R11": R11, "R12": R12, "S2": S2, "frame": fr}


def frame_norms(profile: Profile, t, phased=True):
    """Norms of the remainders at time t from the profile frame."""
    g = profile.grid
    dV = g.cell_volume
    fr = frame_remainders(profile, t, phased)
    S2 = fr["S2"]
    gS2 = np.stack([g.grad(S2[i]) for i in range(3)])        # (i, j, ...) = d_j S2_i
    gR11 = np.stack([1j * g.X[i] * fr["R11"] + g.partial(fr["R11"], i) / t for i in range(3)])

    def d0(f, r, vector=False):
        return t ** (3.0 / r - 3.0) * sp.lebesgue(f, r, dV, vector)

    return {
        "R1_L2": sp.lebesgue(fr["R1"], 2, dV),
        "R11_L2": sp.lebesgue(fr["R11"], 2, dV),
        "R12_L2": sp.lebesgue(fr["R12"], 2, dV),
        "grad_R11_L2": sp.lebesgue(gR11, 2, dV, True),
        "R2_L2": d0(S2, 2, True),
        "R2_L4/3": d0(S2, 4.0 / 3.0, True),
        "grad_R2_L4/3": d0(gS2.reshape((9,) + g.shape), 4.0 / 3.0, True) / t,
    }


# ---------------------------------------------------------------------------
# decay traces and fits
# ---------------------------------------------------------------------------


@dataclass
class DecayTrace:
    """Time series of one named norm."""

    name: str
    t: np.ndarray
    values: np.ndarray
    route: str = "closed"


@dataclass
class DecayFit:
    exponent: float       # alpha in c t^alpha (1 + ln t)^beta
    log_power: float      # beta
    residual: float       # rms of the log residuals
    slope: float          # plain log-log slope, for reference
    n: int


def decay_fit(trace, t_min=None, t_max=None):
    """Least squares of ln value against (1, ln t, ln(1 + ln t)).

    Needs at least 8 samples spanning 1.5 decades inside [t_min, t_max].
    """
    t = np.asarray(trace.t, dtype=float)
    v = np.asarray(trace.values, dtype=float)
    keep = np.ones_like(t, dtype=bool)
    if t_min is not None:
        keep &= t >= t_min * (1 - 1e-12)
    if t_max is not None:
        keep &= t <= t_max * (1 + 1e-12)
    t, v = t[keep], v[keep]
    if t.size < 8 or np.log10(t.max() / t.min()) < 1.5 - 1e-9:
        raise ValueError(f"trace {trace.name!r}: need >= 8 samples over >= 1.5 decades")
    if np.any(v <= 0):
        raise ValueError(f"trace {trace.name!r}: values must be positive for a log fit")
    lt = np.log(t)
    y = np.log(v)
    X = np.column_stack([np.ones_like(lt), lt, np.log1p(lt)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    slope = np.polyfit(lt, y, 1)[0]
    return DecayFit(float(coef[1]), float(coef[2]), float(np.sqrt(np.mean(res**2))), float(slope), int(t.size))


def decay_traces(profile: Profile, times, phased=True):
    """Profile-frame norm traces over the given times."""
    rows = [frame_norms(profile, t, phased) for t in times]
    names = rows[0].keys()
    t = np.asarray(times, dtype=float)
    return {k: DecayTrace(k, t, np.array([r[k] for r in rows])) for k in names}


def write_traces_csv(path, traces):
    """CSV with columns t, name, value, route."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "name", "value", "route"])
        for tr in traces:
            for t, v in zip(tr.t, tr.values):
                w.writerow([repr(float(t)), tr.name, repr(float(v)), tr.route])


def write_fits_json(path, fits):
    """JSON summary {name: {exponent, log_power, residual}}."""
    out = {k: {"exponent": f.exponent, "log_power": f.log_power, "residual": f.residual,
               "slope": f.slope, "samples": f.n} for k, f in fits.items()}
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# verification of box A_1 = P (x/t)|u_a|^2 by finite differences
# ---------------------------------------------------------------------------


def check_box_A1(w_plus, xi_grid, t=4.0, dt=1e-2, nodes=64):
    """Relative L2 defect of (d_t^2 - Delta) A_1 - P (x/t)|u_a|^2 at time t.

    A_1 is evaluated on the fixed physical grid of box t L_xi at t and t +- dt
    from its Fourier coefficients t'^2 tA1^(t' k); the second time derivative
    is a centred difference.
    """
    from .profiles import tilde_quadrature

    coeff = {}
    for s in (t - dt, t, t + dt):
        q = tilde_quadrature(w_plus, xi_grid, s / t, nodes, tol=np.inf)
        coeff[s] = s * s * q.hat_sin
    xg = xi_grid.scaled(t)
    d2 = (coeff[t + dt] - 2 * coeff[t] + coeff[t - dt]) / dt**2
    k2 = (xi_grid.kmag / t) ** 2
    from .profiles import synthesize
    box = synthesize(d2 + k2 * coeff[t], xi_grid, box_scale=t)
    rho = np.abs(w_plus) ** 2 / t**3            # |u_a|^2 on the dilated grid
    rhs = sp.leray_project(np.stack([xg.X[i] * rho / t for i in range(3)]), xg)
    return relative_l2(box, rhs)


def check_dt_A1(w_plus, xi_grid, t=2.0, dt=1e-3, nodes=64):
    """Relative defect of d_t A_1 (4th-order difference) against t^-2 D0(t) ttA1."""
    from .profiles import synthesize, tilde_quadrature

    def A1hat(s):
        q = tilde_quadrature(w_plus, xi_grid, s / t, nodes, tol=np.inf)
        return s * s * q.hat_sin, q

    h = {k: A1hat(t + k * dt)[0] for k in (-2, -1, 1, 2)}
    dA = (-h[2] + 8 * h[1] - 8 * h[-1] + h[-2]) / (12 * dt)
    _, q0 = A1hat(t)
    lhs = synthesize(dA, xi_grid, box_scale=t)
    rhs = synthesize(-q0.hat_cos * t, xi_grid, box_scale=t)
    return relative_l2(lhs, rhs)
