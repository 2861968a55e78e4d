"""
Periodic-box Fourier calculus in three dimensions.

A cubic box of side L with n points per axis stands in for R^3. Grid points
are centred, x_j = (j - n/2) dx, so the box centre sits at index n/2 and is
the origin. All transforms are unitary (norm="ortho"), so the discrete L2
norm is the same in both spaces.

Conventions
-----------
    * Scalar fields are complex arrays of shape (n, n, n).
    * Vector fields are arrays of shape (3, n, n, n).
    * Odd derivatives drop the Nyquist mode, even ones keep it.
    * P, g = -Delta^{-1} and negative powers of omega = |k| kill k = 0.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft
from scipy.integrate import cumulative_trapezoid

PHYSICAL = "physical"
FREQUENCY = "frequency"


def delta(r):
    """Scaling exponent delta(r) = 3/2 - 3/r of free waves in L^r."""
    r = float(r)
    if r < 1:
        raise ValueError(f"exponent r={r} < 1")
    return 1.5 if np.isinf(r) else 1.5 - 3.0 / r


@dataclass(frozen=True)
class Grid3:
    """Uniform periodic grid with n points per axis on a box of side L."""

    n: int
    L: float

    def __post_init__(self):
        n = int(self.n)
        if n < 2 or n & (n - 1):
            raise ValueError(f"n={self.n} must be a power of two")
        if not self.L > 0:
            raise ValueError(f"box length L={self.L} must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def spacing(self):
        return self.L / self.n

    dx = spacing

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def cell_volume(self):
        return self.spacing**3

    @property
    def volume(self):
        return self.L**3

    @cached_property
    def coords(self):
        """1D centred coordinates (j - n/2) dx."""
        return (np.arange(self.n) - self.n // 2) * self.spacing

    @cached_property
    def wavenumbers(self):
        """1D wavenumbers in FFT order, 2 pi / L times integers, Nyquist negative."""
        return 2 * np.pi * sfft.fftfreq(self.n, d=self.spacing)

    @cached_property
    def dk(self):
        """Wavenumbers used for odd derivatives (Nyquist set to zero)."""
        k = self.wavenumbers.copy()
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def X(self):
        """Broadcastable coordinate arrays (x, y, z)."""
        x = self.coords
        return (x[:, None, None], x[None, :, None], x[None, None, :])

    @cached_property
    def K(self):
        k = self.wavenumbers
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def KD(self):
        k = self.dk
        return (k[:, None, None], k[None, :, None], k[None, None, :])

    @cached_property
    def k2(self):
        kx, ky, kz = self.K
        return kx**2 + ky**2 + kz**2

    @cached_property
    def kmag(self):
        return np.sqrt(self.k2)

    @cached_property
    def r2(self):
        x, y, z = self.X
        return x**2 + y**2 + z**2

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask: keep |k_i| < (2/3) k_nyquist on every axis."""
        kc = (2.0 / 3.0) * np.pi / self.spacing
        m = np.abs(self.wavenumbers) < kc
        return m[:, None, None] & m[None, :, None] & m[None, None, :]

    def position_array(self):
        """Coordinates as a (3, n, n, n) array."""
        return np.stack(np.broadcast_arrays(*self.X)).astype(float)

    def scaled(self, factor):
        """Same sample count on a box stretched by factor."""
        return Grid3(self.n, self.L * factor)

    def reciprocal(self):
        """Grid of the Fourier variable: spacing 2 pi / L, centred like self."""
        return Grid3(self.n, 2 * np.pi * self.n / self.L)

    # transforms act on the last three axes
    def fft(self, f):
        return sfft.fftn(f, axes=(-3, -2, -1), norm="ortho")

    def ifft(self, f):
        return sfft.ifftn(f, axes=(-3, -2, -1), norm="ortho")

    def grad(self, f):
        """Spectral gradient of a scalar; returns (3, n, n, n)."""
        fh = self.fft(f)
        out = np.stack([self.ifft(1j * k * fh) for k in self.KD])
        return out.real if np.isrealobj(f) else out

    def div(self, F):
        Fh = self.fft(F)
        out = self.ifft(sum(1j * k * Fh[i] for i, k in enumerate(self.KD)))
        return out.real if np.isrealobj(F) else out

    def lap(self, f):
        out = self.ifft(-self.k2 * self.fft(f))
        return out.real if np.isrealobj(f) else out

    def partial(self, f, axis):
        out = self.ifft(1j * self.KD[axis] * self.fft(f))
        return out.real if np.isrealobj(f) else out

    def dealias(self, f):
        out = self.ifft(self.dealias_mask * self.fft(f))
        return out.real if np.isrealobj(f) else out

    def inner(self, f, g):
        """Discrete L2 inner product <f, g> = sum conj(f) g dV."""
        return np.vdot(f, g) * self.cell_volume


@dataclass
class ScalarField:
    """Complex scalar samples on a grid, tagged with the space they live in."""

    grid: Grid3
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        if self.space not in (PHYSICAL, FREQUENCY):
            raise ValueError(f"unknown space {self.space!r}")


@dataclass
class VectorField:
    """Three-component field; real in physical space."""

    grid: Grid3
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (3,) + self.grid.shape:
            raise ValueError(f"values shape {v.shape} != (3,) + grid {self.grid.shape}")
        if self.space not in (PHYSICAL, FREQUENCY):
            raise ValueError(f"unknown space {self.space!r}")
        if self.space == PHYSICAL and np.iscomplexobj(v):
            if np.abs(v.imag).max(initial=0.0) > 1e-12 * max(np.abs(v).max(initial=0.0), 1e-300):
                raise ValueError("physical vector field must be real")
            v = v.real
        self.values = v

    def divergence_defect(self):
        """max |div F| / max |F|, evaluated spectrally."""
        vals = self.values if self.space == PHYSICAL else self.grid.ifft(self.values).real
        scale = np.abs(vals).max(initial=0.0)
        if scale == 0:
            return 0.0
        return float(np.abs(self.grid.div(vals)).max() / scale)


def transform(f, direction):
    """Unitary DFT between physical and frequency space.

    direction is "forward" (physical -> frequency) or "inverse".
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    want = PHYSICAL if direction == "forward" else FREQUENCY
    if f.space != want:
        raise ValueError(f"{direction} transform needs a {want}-space field")
    g = f.grid
    if direction == "forward":
        return type(f)(g, g.fft(f.values), FREQUENCY)
    vals = g.ifft(f.values)
    if isinstance(f, VectorField):
        vals = vals.real
    return type(f)(g, vals, PHYSICAL)


def _field_io(F, grid):
    """Split a field-or-array argument into (grid, physical values, rewrap)."""
    if isinstance(F, (ScalarField, VectorField)):
        cls, g = type(F), F.grid
        vals = F.values if F.space == PHYSICAL else g.ifft(F.values)
        if cls is VectorField:
            vals = np.real(vals)

        def wrap(out):
            field = cls(g, out, PHYSICAL)
            return field if F.space == PHYSICAL else transform(field, "forward")

        return g, vals, wrap
    if grid is None:
        raise ValueError("grid is required for bare arrays")
    return grid, np.asarray(F), lambda out: out


def leray_hat(grid, Fh):
    """Leray projector on Fourier coefficients of shape (3, n, n, n).

    Uses the derivative wavenumbers (Nyquist component zero), so projected
    real fields are divergence free for grid.div. Modes with no derivative
    wavenumber (the mean and pure Nyquist modes) are removed.
    """
    K = grid.KD
    k2 = K[0] ** 2 + K[1] ** 2 + K[2] ** 2
    dead = k2 == 0
    k2 = np.where(dead, 1.0, k2)
    kdotF = sum(K[i] * Fh[i] for i in range(3)) / k2
    out = np.stack([Fh[i] - K[i] * kdotF for i in range(3)])
    out[:, dead] = 0.0
    return out


def leray_project(F, grid=None):
    """P F = F - grad Delta^{-1} div F, with the mean mode removed."""
    g, vals, wrap = _field_io(F, grid)
    if vals.shape[0] != 3 or vals.shape[1:] != g.shape:
        raise ValueError("leray_project needs a (3, n, n, n) field on the grid")
    out = g.ifft(leray_hat(g, g.fft(vals)))
    if np.isrealobj(vals):
        out = out.real
    return wrap(out)


def coulomb(rho, grid=None):
    """Hartree potential g(rho) = -Delta^{-1} rho, periodic, mean mode dropped."""
    g, vals, wrap = _field_io(rho, grid)
    k2 = g.k2.copy()
    k2[0, 0, 0] = 1.0
    h = g.fft(vals) / k2
    h[..., 0, 0, 0] = 0.0
    out = g.ifft(h)
    if np.isrealobj(vals):
        out = out.real
    return wrap(out)


def omega_multiplier(grid, kind, t):
    """Multiplier of cos(omega t), omega^{-1} sin(omega t) or omega^t on the grid."""
    w = grid.kmag
    if kind == "cos":
        return np.cos(w * t)
    if kind == "sinc":
        with np.errstate(invalid="ignore", divide="ignore"):
            m = np.sin(w * t) / w
        m[0, 0, 0] = t
        return m
    if kind == "pow":
        with np.errstate(divide="ignore"):
            m = w**t
        if t < 0:
            m[0, 0, 0] = 0.0
        return m
    raise ValueError(f"unknown multiplier kind {kind!r}")


def omega_apply(F, kind, t, grid=None):
    """Apply a function of omega = |k| per Fourier mode.

    kind is "cos" (cos omega t), "sinc" (omega^{-1} sin omega t, equal to t at
    k = 0) or "pow" (omega^t). Negative powers require a zero-mean field.
    """
    g, vals, wrap = _field_io(F, grid)
    h = g.fft(vals)
    if kind == "pow" and t < 0:
        mean = np.abs(h[..., 0, 0, 0]).max()
        if mean > 1e-12 * max(np.abs(h).max(), 1e-300):
            raise ValueError("negative power of omega on a field with nonzero mean")
    out = g.ifft(omega_multiplier(g, kind, t) * h)
    if np.isrealobj(vals):
        out = out.real
    return wrap(out)


@dataclass(frozen=True)
class NormSpec:
    """Which norm: lebesgue L^r, sobolev_Hk, weighted_Hks, sobolev_Wrk."""

    kind: str = "lebesgue"
    r: float = 2.0
    k: float = 0
    s: float = 0

    def __post_init__(self):
        if self.kind not in ("lebesgue", "sobolev_Hk", "weighted_Hks", "sobolev_Wrk"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if float(self.r) < 1:
            raise ValueError(f"exponent r={self.r} < 1")

    @property
    def delta(self):
        return delta(self.r)


def lebesgue(f, r, dV, vector=False):
    """L^r norm of samples by Riemann sum; vector fields use |F| pointwise."""
    if r < 1:
        raise ValueError(f"exponent r={r} < 1")
    a = np.sqrt(np.sum(np.abs(f) ** 2, axis=0)) if vector else np.abs(f)
    if np.isinf(r):
        return float(a.max(initial=0.0))
    if r == 2:
        return float(np.sqrt(np.sum(a * a) * dV))
    return float((np.sum(a**r) * dV) ** (1.0 / r))


def _bessel(grid, fh, k):
    return grid.ifft((1.0 + grid.k2) ** (k / 2.0) * fh)


def norm(f, spec=NormSpec(), grid=None):
    """Norm of a field (ScalarField, VectorField or bare array plus grid)."""
    if isinstance(f, (ScalarField, VectorField)):
        g = f.grid
        vals = f.values if f.space == PHYSICAL else g.ifft(f.values)
    else:
        if grid is None:
            raise ValueError("grid is required for bare arrays")
        g, vals = grid, np.asarray(f)
    vector = vals.ndim == 4
    dV = g.cell_volume
    if spec.kind == "lebesgue":
        return lebesgue(vals, spec.r, dV, vector)
    if spec.kind == "sobolev_Hk":
        return lebesgue(_bessel(g, g.fft(vals), spec.k), 2, dV, vector)
    if spec.kind == "weighted_Hks":
        w = (1.0 + g.r2) ** (spec.s / 2.0)
        return lebesgue(w * _bessel(g, g.fft(vals), spec.k), 2, dV, vector)
    # sobolev_Wrk: sum over multi-indices |alpha| <= k of ||d^alpha f||_r
    k = int(spec.k)
    fh = g.fft(vals)
    total = 0.0
    for order in range(k + 1):
        for alpha in itertools.combinations_with_replacement(range(3), order):
            m = 1.0
            for ax in alpha:
                m = m * (1j * g.KD[ax])
            total += lebesgue(g.ifft(m * fh), spec.r, dV, vector)
    return total


@dataclass
class TimeNorm:
    """Mixed norm ||f; L^q(J, X)|| over J = [t, t_end], with dyadic blocks."""

    value: float
    q: float
    t: float
    t_end: float
    blocks: list


def _integrate_q(t, y):
    return float(np.trapezoid(y, t)) if len(t) > 1 else 0.0


def time_block_norm(times, values, q, t=None):
    """L^q norm in time of sampled spatial norms over [t, times[-1]].

    The integral of values^q is the trapezoid rule on the sample times;
    blocks are I_j = [t 2^j, t 2^(j+1)] clipped to the last sample, with the
    integrand interpolated linearly at block ends that fall between samples.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.shape != values.shape:
        raise ValueError("times and values must be 1D arrays of equal length")
    t = times[0] if t is None else float(t)
    t_end = times[-1]
    if not (t < t_end) or t < times[0] - 1e-12 * abs(times[0]):
        raise ValueError(f"empty or uncovered interval [{t}, {t_end}]")
    inf = np.isinf(q)
    y = values if inf else values ** float(q)

    def piece(a, b):
        inside = (times > a) & (times < b)
        ts = np.concatenate([[a], times[inside], [b]])
        ys = np.concatenate([[np.interp(a, times, y)], y[inside], [np.interp(b, times, y)]])
        return float(ys.max()) if inf else _integrate_q(ts, ys)

    blocks = []
    a = t
    while a < t_end * (1 - 1e-14):
        b = min(2 * a, t_end)
        blocks.append((a, b, piece(a, b)))
        a = b
    if inf:
        total = max(v for _, _, v in blocks)
        return TimeNorm(total, q, t, t_end, blocks)
    total = sum(v for _, _, v in blocks)
    root = 1.0 / float(q)
    return TimeNorm(total**root, q, t, t_end, [(a, b, v**root) for a, b, v in blocks])


def tail_norms(times, values, q):
    """||f; L^q([t_i, t_end])|| for every sample t_i (inf: running sup)."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.isinf(q):
        return np.maximum.accumulate(values[::-1])[::-1]
    y = values ** float(q)
    cum = cumulative_trapezoid(y, times, initial=0.0)
    return np.maximum(cum[-1] - cum, 0.0) ** (1.0 / float(q))


# ---------------------------------------------------------------------------
# trigonometric interpolation, dilation and refinement
# ---------------------------------------------------------------------------


def interp_matrix(n, L, targets, outside_zero=True):
    """Matrix evaluating the trigonometric interpolant of n centred samples.

    Row j evaluates at targets[j]. The Nyquist mode enters as a cosine so
    real samples give real values. Targets outside [-L/2, L/2] give zero
    rows when outside_zero is set (fields are treated as compactly held).
    """
    targets = np.asarray(targets, dtype=float)
    dx = L / n
    x = (np.arange(n) - n // 2) * dx
    d = targets[:, None] - x[None, :]
    m = np.arange(1, n // 2)
    kn = 2 * np.pi / L
    mat = 1.0 + 2.0 * np.cos(kn * d[..., None] * m).sum(axis=-1)
    mat += np.cos(kn * (n // 2) * d)
    mat /= n
    if outside_zero:
        mat[np.abs(targets) > L / 2 * (1 + 1e-12)] = 0.0
    return mat


def apply_axes(f, mats):
    """Apply one matrix per spatial axis to the last three axes of f."""
    out = np.asarray(f)
    for i, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [out.ndim - 3 + i])), 0, out.ndim - 3 + i)
    return out


def dilation_matrix(grid, s):
    """1D matrix of D0(s): (D0(s) f)(x) = f(x / s), zero outside the box."""
    return interp_matrix(grid.n, grid.L, grid.coords / s)


def dilate(f, grid, s):
    """Evaluate f(x / s) on the same grid."""
    m = dilation_matrix(grid, s)
    return apply_axes(f, (m, m, m))


def refine(f, grid, m):
    """Trigonometric refinement of samples onto an m-times finer grid."""
    if m == 1:
        return np.asarray(f)
    fine = Grid3(grid.n * m, grid.L)
    mat = interp_matrix(grid.n, grid.L, fine.coords)
    return apply_axes(f, (mat, mat, mat))


# ---------------------------------------------------------------------------
# binary snapshots
# ---------------------------------------------------------------------------

MAGIC = b"MSFLD1"


def write_snapshot(path, field):
    """Write a ScalarField or VectorField in the MSFLD1 layout (x fastest)."""
    vals = field.values
    comps = [vals] if isinstance(field, ScalarField) else list(vals)
    flag = 0 if field.space == PHYSICAL else 1
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IdBB", field.grid.n, field.grid.L, flag, len(comps)))
        for c in comps:
            fh.write(np.asarray(c, dtype="<c16").ravel(order="F").tobytes())


def read_snapshot(path):
    """Read an MSFLD1 file back into a ScalarField or VectorField."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not an MSFLD1 snapshot")
        n, L, flag, ncomp = struct.unpack("<IdBB", fh.read(struct.calcsize("<IdBB")))
        raw = np.frombuffer(fh.read(), dtype="<c16")
    if raw.size != ncomp * n**3:
        raise ValueError(f"{path}: expected {ncomp * n**3} values, found {raw.size}")
    grid = Grid3(n, L)
    comps = [raw[i * n**3:(i + 1) * n**3].reshape((n, n, n), order="F") for i in range(ncomp)]
    space = PHYSICAL if flag == 0 else FREQUENCY
    if ncomp == 1:
        return ScalarField(grid, comps[0].astype(complex), space)
    vals = np.stack(comps)
    return VectorField(grid, vals.real if space == PHYSICAL else vals, space)
