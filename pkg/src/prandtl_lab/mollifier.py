"""Smoothing operators S_theta and their empirical estimates.

S_theta convolves with rho_theta(s) = theta rho(theta s) along each axis. In
t and y the kernel is shifted by +1/theta, so the output at t reads samples
in [t, t + 2/theta]; x is periodic and unshifted. The lattice operator is the
exact convolution of rho_theta with the piecewise-linear interpolant of the
samples, which gives one stencil per axis applied as a matrix product.
"""

from __future__ import annotations

import math
import warnings
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import MonotonicityError, ValidationError
from .grid import Field, GridSpec, diff

EXTENSIONS = ("edge", "zero")
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def bump(s) -> np.ndarray:
    """Unnormalized C-infinity bump exp(-1/(1-s^2)) on |s| < 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


BUMP_MASS = quad(lambda s: float(bump(s)), -1, 1, epsabs=1e-14, epsrel=1e-14)[0]


def rho(s) -> np.ndarray:
    """Normalized bump: support [-1, 1], unit mass."""
    return bump(s) / BUMP_MASS


def theta(n: int, theta0: float) -> tuple[float, float]:
    """theta_n = sqrt(theta0^2 + n) and the increment theta_{n+1} - theta_n."""
    if theta0 <= 0 or n < 0:
        raise ValidationError("need theta0 > 0 and n >= 0")
    th = math.sqrt(theta0**2 + n)
    return th, math.sqrt(theta0**2 + n + 1) - th


def _segment(lo, hi, f):
    if hi <= lo:
        return 0.0
    half = 0.5 * (hi - lo)
    s = lo + half * (_GL_X + 1.0)
    return float(half * np.sum(_GL_W * f(s)))


@lru_cache(maxsize=256)
def stencil(theta_h: float, shifted: bool) -> tuple[np.ndarray, np.ndarray]:
    """Offsets m and weights w_m for kernel scale 1/theta on a unit-spaced lattice.

    ``theta_h`` is theta times the grid spacing. With the shift, the kernel
    variable u = theta (s - t) runs over [0, 2] and weights rho(1 - u);
    without it, u runs over [-1, 1] with weight rho(u). The hat function of
    node m is centred at u = theta_h m.
    """
    lo, hi = (0.0, 2.0) if shifted else (-1.0, 1.0)
    kern = (lambda u: rho(1.0 - u)) if shifted else rho
    m_lo = math.floor(lo / theta_h) - 1
    m_hi = math.ceil(hi / theta_h) + 1
    offsets, weights = [], []
    for m in range(m_lo, m_hi + 1):
        c = theta_h * m

        def left(u, c=c):
            return kern(u) * (1.0 - (c - u) / theta_h)

        def right(u, c=c):
            return kern(u) * (1.0 - (u - c) / theta_h)

        w = (_segment(max(lo, c - theta_h), min(hi, c), left)
             + _segment(max(lo, c), min(hi, c + theta_h), right))
        if w > 0.0:
            offsets.append(m)
            weights.append(w)
    weights = np.array(weights)
    return np.array(offsets), weights / weights.sum()


def _axis_matrix(n: int, h: float, th: float, shifted: bool, periodic: bool, extension: str):
    offsets, weights = stencil(round(th * h, 14), shifted)
    M = np.zeros((n, n))
    rows = np.arange(n)
    for m, w in zip(offsets, weights):
        cols = rows + m
        if periodic:
            np.add.at(M, (rows, cols % n), w)
        elif extension == "edge":
            np.add.at(M, (rows, np.clip(cols, 0, n - 1)), w)
        else:
            ok = (cols >= 0) & (cols < n)
            np.add.at(M, (rows[ok], cols[ok]), w)
    return M


def smoothing_matrices(spec: GridSpec, th: float, extension: str = "edge"):
    """Per-axis (t, x, y) matrices of S_theta."""
    if extension not in EXTENSIONS:
        raise ValidationError(f"far_extension must be one of {EXTENSIONS}")
    if th <= 0:
        raise ValidationError("theta must be positive")
    spacing = max(spec.dt, spec.dx, spec.dy)
    if 1.0 / th < 2 * spacing * (1 - 1e-9):
        # constant text so the default filter reports it once per call site
        warnings.warn("kernel width 1/theta is below two grid spacings; "
                      "S_theta is close to a shifted identity", stacklevel=3)
    return (_axis_matrix(spec.n_t, spec.dt, th, True, False, extension),
            _axis_matrix(spec.n_x, spec.dx, th, False, True, extension),
            _axis_matrix(spec.n_y, spec.dy, th, True, False, extension))


def smooth_array(a: np.ndarray, spec: GridSpec, th: float, extension: str = "edge") -> np.ndarray:
    Mt, Mx, My = smoothing_matrices(spec, th, extension)
    out = a @ My.T
    out = np.einsum("ij,...jk->...ik", Mx, out)
    if out.ndim == 3:
        out = np.einsum("ij,jkl->ikl", Mt, out)
    return out


def smooth(f: Field, th: float, extension: str = "edge") -> Field:
    """S_theta f.

    ``extension`` decides what the kernel reads beyond t = T and y = Y:
    ``"edge"`` holds the boundary value, ``"zero"`` reads zero.
    """
    return Field(f.spec, smooth_array(f.samples, f.spec, th, extension))


def smooth_difference(f: Field, n: int, theta0: float, extension: str = "edge") -> Field:
    if n < 1:
        raise ValidationError("smooth_difference needs n >= 1")
    th_n, _ = theta(n, theta0)
    th_m, _ = theta(n - 1, theta0)
    return smooth(f, th_n, extension) - smooth(f, th_m, extension)


def commutator_weighted(f: Field, shear, th: float, variant: str = "c1", extension: str = "edge") -> Field:
    """Weighted commutators of S_theta with 1/d_y u_s.

    c1: S(d_y f)/d_y u_s - S(d_y f / d_y u_s)
    c2: d_y[(d_y S f)/d_y u_s - d_y S(f / d_y u_s)]
    """
    spec = f.spec
    a = shear.d_y_u_s.samples
    if np.any(a <= 0):
        raise MonotonicityError("d_y u_s has non-positive nodes; commutator undefined")
    if not f.has_time:
        a = a[0]
    S = lambda arr: smooth_array(arr, spec, th, extension)
    dy = lambda arr: diff(arr, spec.dy, -1, 1)
    if variant == "c1":
        b = dy(f.samples)
        out = S(b) / a - S(b / a)
    elif variant == "c2":
        out = dy(dy(S(f.samples)) / a - dy(S(f.samples / a)))
    else:
        raise ValidationError("variant must be 'c1' or 'c2'")
    return Field(spec, out)


def delta_theta_sum(theta0: float, j: int, power: int) -> tuple[float, float]:
    """Left and right sides of the Delta-theta summation inequality.

    Returns (sum_{p<j} theta_p^power dtheta_p, bound) where the bound is
    theta_j^(power+1) for power >= 0 and 1 for power <= -2.
    """
    if -2 < power < 0:
        raise ValidationError("power must be >= 0 or <= -2")
    total = 0.0
    for p in range(j):
        th, dth = theta(p, theta0)
        total += th**power * dth
    bound = theta(j, theta0)[0] ** (power + 1) if power >= 0 else 1.0
    return total, bound
