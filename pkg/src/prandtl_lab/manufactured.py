"""Manufactured solutions over the erf shear flow, built from closed forms.

Nothing here uses lattice stencils: the forcings are evaluated from exact
derivatives, with the one non-elementary integral done by Gauss-Legendre.
The shear flow is erf(y / (2 sqrt(w^2 + t))), so these oracles only apply to
the canonical profile family.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .grid import Field, GridSpec
from .shear import closed_form_erf

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(64)


def _cumulative_gl(func, y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """int_0^y func(t, s) ds on the (t, y) lattice, 64-point rule per node."""
    half = 0.5 * y[None, :, None]
    s = half * (_NODES + 1.0)
    vals = func(t[:, None, None], s)
    return np.sum(half * _WEIGHTS * vals, axis=-1)


def w_solution(spec: GridSpec, width: float = 1.0, mode: int = 1):
    """w* = t sin(k x) y e^{-y} and the forcing f that produces it.

    Over the pure shear background v~ = 0, zeta = 0, eta = alpha, and
    f~ = int_0^y (w*_t + u_s w*_x) - 2 alpha w* - w*_y, which also meets
    the wall condition. Returns (w*, u*, f) as Fields with u* = d_y u_s int w*.
    """
    k = 2 * math.pi * mode / spec.L_x
    t, x, y = spec.mesh()
    s2 = width**2 + t
    alpha = -y / (2 * s2)
    g = y * np.exp(-y)
    w = t * np.sin(k * x) * g
    w_y = t * np.sin(k * x) * (1 - y) * np.exp(-y)
    int_g = 1 - (1 + y) * np.exp(-y)
    int_us_g = _cumulative_gl(lambda tt, s: erf(s / (2 * np.sqrt(width**2 + tt))) * s * np.exp(-s),
                              spec.y, spec.t)[:, None, :]
    f_tilde = np.sin(k * x) * int_g + t * k * np.cos(k * x) * int_us_g - 2 * alpha * w - w_y
    a = closed_form_erf(t, y, width, p=1)
    u = a * t * np.sin(k * x) * int_g
    shape = spec.shape
    return (Field(spec, np.broadcast_to(w, shape)), Field(spec, np.broadcast_to(u, shape)),
            Field(spec, np.broadcast_to(f_tilde * a, shape)))


def uv_solution(spec: GridSpec, width: float = 1.0, mode: int = 1):
    """u* = t sin(k x)(1 - e^{-y}) e^{-y}, its v*, and the forcing over the erf shear."""
    k = 2 * math.pi * mode / spec.L_x
    t, x, y = spec.mesh()
    e1, e2 = np.exp(-y), np.exp(-2 * y)
    prof = e1 - e2
    u = t * np.sin(k * x) * prof
    u_t = np.sin(k * x) * prof
    u_x = t * k * np.cos(k * x) * prof
    u_yy = t * np.sin(k * x) * (e1 - 4 * e2)
    v = -t * k * np.cos(k * x) * ((1 - e1) - 0.5 * (1 - e2))
    us = closed_form_erf(t, y, width)
    a = closed_form_erf(t, y, width, p=1)
    f = u_t + us * u_x + v * a - u_yy
    shape = spec.shape
    return tuple(Field(spec, np.broadcast_to(arr, shape)) for arr in (u, v, f))


def nonlinear_solution(spec: GridSpec, width: float = 1.0, mode: int = 1, amplitude: float = 1.0):
    """u = u_s + A u*, v = A v* with u*, v* of :func:`uv_solution`, and the Prandtl forcing."""
    k = 2 * math.pi * mode / spec.L_x
    t, x, y = spec.mesh()
    e1, e2 = np.exp(-y), np.exp(-2 * y)
    prof = e1 - e2
    p = amplitude * t * np.sin(k * x) * prof
    p_t = amplitude * np.sin(k * x) * prof
    p_x = amplitude * t * k * np.cos(k * x) * prof
    p_y = amplitude * t * np.sin(k * x) * (-e1 + 2 * e2)
    p_yy = amplitude * t * np.sin(k * x) * (e1 - 4 * e2)
    v = -amplitude * t * k * np.cos(k * x) * ((1 - e1) - 0.5 * (1 - e2))
    us = closed_form_erf(t, y, width)
    a = closed_form_erf(t, y, width, p=1)
    f = p_t + (us + p) * p_x + v * (a + p_y) - p_yy
    shape = spec.shape
    return tuple(Field(spec, np.broadcast_to(arr, shape)) for arr in (us + p, v, f))
