"""
Named analytic data families for asymptotic states.

Schrodinger data u_+ are Gaussian packets on the data grid. Magnetic data
(A_+, Adot_+) are free waves that can be evaluated exactly at any point
and time, which the co-moving profile frame needs at t of order 10^3:

    divergence-free-mode   A = e cos(k.x) cos(|k| t)      (periodic tests)
    gaussian-curl          A = curl(psi(t, |x - c|) e)    (localized data)

For gaussian-curl, psi solves the radial wave equation with Gaussian
displacement or velocity data, psi(t, r) = (F(t + r) - F(t - r)) / (2 r),
with F(s) = s G(s) for displacement data G and F(s) = a^2 (1 - G(s)) for
velocity data G, G(s) = exp(-s^2 / 2a^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.special import eval_hermite

from .spectral import Grid3


def gaussian(grid, center=(0.0, 0.0, 0.0), width=1.0, amplitude=1.0, momentum=(0.0, 0.0, 0.0)):
    """amplitude * exp(i p.x - |x - c|^2 / (2 width^2)) on the grid."""
    X = grid.X
    r2 = sum((X[i] - center[i]) ** 2 for i in range(3))
    phase = sum(momentum[i] * X[i] for i in range(3))
    return amplitude * np.exp(1j * phase - r2 / (2.0 * width**2))


def offset_double_gaussian(grid, centers=((-1.0, 0.0, 0.0), (1.0, 0.0, 0.0)), width=1.0,
                           amplitudes=(1.0, 0.6), momenta=((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))):
    """Sum of two Gaussian packets with their own centres and momenta."""
    return sum(gaussian(grid, c, width, a, p) for c, a, p in zip(centers, amplitudes, momenta))


class FreeWave:
    """Free vector wave with divergence-free data, evaluated pointwise."""

    def fields(self, t, X):
        """Return (A, dA/dt) at time t and points X of shape (3, ...)."""
        raise NotImplementedError

    def sample(self, grid):
        """(A_+, Adot_+) at t = 0 on a grid."""
        X = grid.position_array()
        A, dA = self.fields(0.0, X)
        return A, dA

    def __add__(self, other):
        return Superposition([self, other])


@dataclass
class Superposition(FreeWave):
    waves: list = field(default_factory=list)

    def fields(self, t, X):
        A = np.zeros_like(X, dtype=float)
        dA = np.zeros_like(X, dtype=float)
        for w in self.waves:
            a, d = w.fields(t, X)
            A += a
            dA += d
        return A, dA

    def __add__(self, other):
        return Superposition(self.waves + [other])


@dataclass
class NoWave(FreeWave):
    def fields(self, t, X):
        return np.zeros_like(X, dtype=float), np.zeros_like(X, dtype=float)


@dataclass
class DivergenceFreeMode(FreeWave):
    """amplitude * e cos(k.x) with k = 2 pi m / L and e orthogonal to k.

    velocity=True places the mode in Adot_+ instead of A_+.
    """

    mode: tuple = (1, 0, 0)
    polarization: tuple = (0.0, 1.0, 0.0)
    amplitude: float = 1.0
    box: float = 2 * np.pi
    velocity: bool = False

    def __post_init__(self):
        k = 2 * np.pi * np.asarray(self.mode, dtype=float) / self.box
        if not np.any(k):
            raise ValueError("mode must be nonzero")
        e = np.asarray(self.polarization, dtype=float)
        e = e - k * (e @ k) / (k @ k)
        if np.linalg.norm(e) < 1e-12:
            raise ValueError("polarization is parallel to k")
        self._k = k
        self._e = e / np.linalg.norm(e)

    def fields(self, t, X):
        k, e = self._k, self._e
        w = np.linalg.norm(k)
        c = np.cos(np.tensordot(k, X, axes=1))
        if self.velocity:
            a, da = np.sin(w * t) / w, np.cos(w * t)
        else:
            a, da = np.cos(w * t), -w * np.sin(w * t)
        shape = (3,) + (1,) * (X.ndim - 1)
        E = self.amplitude * e.reshape(shape) * c
        return E * a, E * da


def _gauss_derivative(m, s, a):
    """m-th derivative of exp(-s^2 / 2a^2)."""
    y = s / (a * np.sqrt(2.0))
    return (-1.0 / (a * np.sqrt(2.0))) ** m * eval_hermite(m, y) * np.exp(-y * y)


@dataclass
class GaussianCurl(FreeWave):
    """A = amplitude * curl(psi(t, |x - c|) e) with Gaussian radial data.

    The Cartesian field is (psi_r / r)(t, r) (x - c) x e. Setting
    velocity=True puts the Gaussian in the time derivative of psi.
    """

    amplitude: float = 1.0
    width: float = 1.0
    center: tuple = (0.0, 0.0, 0.0)
    axis: tuple = (0.0, 0.0, 1.0)
    velocity: bool = False
    series_radius: float = 0.1

    def _F(self, j, s):
        """j-th derivative of the radial generating function F."""
        a = self.width
        if self.velocity:
            if j == 0:
                return a * a * (1.0 - _gauss_derivative(0, s, a))
            return -a * a * _gauss_derivative(j, s, a)
        return -a * a * _gauss_derivative(j + 1, s, a)

    def _psi_r_over_r(self, t, r, j):
        """(d/dt)^j of psi_r / r."""
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < self.series_radius * self.width
        rs = r[small]
        acc = np.zeros_like(rs)
        for m in range(1, 7):
            acc += 2 * m * self._F(j + 2 * m + 1, t) * rs ** (2 * m - 2) / factorial(2 * m + 1)
        out[small] = acc
        rb = r[~small]
        Fp = self._F(j + 1, t + rb) + self._F(j + 1, t - rb)
        F0 = self._F(j, t + rb) - self._F(j, t - rb)
        out[~small] = Fp / (2 * rb**2) - F0 / (2 * rb**3)
        return out

    def fields(self, t, X):
        c = np.asarray(self.center, dtype=float).reshape((3,) + (1,) * (X.ndim - 1))
        e = np.asarray(self.axis, dtype=float)
        e = e / np.linalg.norm(e)
        Y = X - c
        r = np.sqrt(np.sum(Y * Y, axis=0))
        cross = np.stack([Y[1] * e[2] - Y[2] * e[1], Y[2] * e[0] - Y[0] * e[2], Y[0] * e[1] - Y[1] * e[0]])
        q0 = self._psi_r_over_r(t, r, 0)
        q1 = self._psi_r_over_r(t, r, 1)
        return self.amplitude * q0 * cross, self.amplitude * q1 * cross


def magnetic_from_spec(spec):
    """Build a FreeWave from a config dictionary {family: ..., **params}."""
    spec = dict(spec)
    fam = spec.pop("family", "none")
    if fam == "none":
        return NoWave()
    if fam == "divergence-free-mode":
        return DivergenceFreeMode(**_tuples(spec))
    if fam == "gaussian-curl":
        return GaussianCurl(**_tuples(spec))
    if fam == "sum":
        return Superposition([magnetic_from_spec(s) for s in spec["waves"]])
    raise ValueError(f"unknown magnetic family {fam!r}")


def schrodinger_from_spec(grid: Grid3, spec):
    """Build u_+ on the data grid from a config dictionary."""
    spec = dict(spec)
    fam = spec.pop("family", "gaussian")
    if fam == "gaussian":
        return gaussian(grid, **_tuples(spec))
    if fam == "offset-double-gaussian":
        return offset_double_gaussian(grid, **_tuples(spec))
    if fam == "zero":
        return np.zeros(grid.shape, dtype=complex)
    raise ValueError(f"unknown Schrodinger family {fam!r}")


def _tuples(d):
    return {k: tuple(map(_tuple_or_value, v)) if isinstance(v, list) else v for k, v in d.items()}


def _tuple_or_value(v):
    return tuple(v) if isinstance(v, list) else v
