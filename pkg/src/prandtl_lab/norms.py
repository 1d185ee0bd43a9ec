"""Weighted anisotropic Sobolev functionals on lattice fields.

A y-derivative of order ``k2`` counts as ``floor((k2 + 1) / 2)`` tangential
orders, so the A/C/D norms of order ``k`` range over
``k1 + (k2 + 1) // 2 <= k``. Tangential derivatives are all multi-indices
``(b0, b1)`` in (t, x) of total order ``k1``; by default every multi-index
contributes its own term (``tangential_index_mode="sum"``), the ``"max"``
mode keeps only the largest per total order.

Suprema are lattice maxima. High y-derivatives come from composing the
order-1 and order-2 stencils of :mod:`prandtl_lab.grid`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import trapezoid

from .errors import ValidationError
from .grid import Field, GridSpec, diff, diff_n, integrate

K_MAX = 3
NORM_NAMES = ("A", "B", "C", "D", "A_dot", "C_dot", "D_dot", "Linf_ell")
INDEX_MODES = ("sum", "max")


class Derivatives:
    """Memoized mixed derivatives d_t^b0 d_x^b1 d_y^k2 of one sample array."""

    def __init__(self, samples: np.ndarray, spec: GridSpec):
        self.spec = spec
        self.has_time = samples.ndim == 3
        self._cache = {(0, 0, 0): np.asarray(samples)}

    def __call__(self, b0: int, b1: int, k2: int) -> np.ndarray:
        key = (b0, b1, k2)
        if key in self._cache:
            return self._cache[key]
        if b0 and not self.has_time:
            out = np.zeros_like(self._cache[(0, 0, 0)])
        elif b0:
            out = self._bounded(self(0, b1, k2), self.spec.dt, 0, b0)
        elif b1:
            step = 2 if b1 >= 2 else 1
            ax = 1 if self.has_time else 0
            out = diff(self(0, b1 - step, k2), self.spec.dx, ax, step, periodic=True)
        else:
            out = self._bounded(self(0, 0, 0), self.spec.dy, -1, k2)
        self._cache[key] = out
        return out

    @staticmethod
    def _bounded(a: np.ndarray, h: float, axis: int, m: int) -> np.ndarray:
        # direct stencils on the bounded t and y axes; composition only on very short axes
        if a.shape[axis] >= max(2 * ((m + 1) // 2) + 1, m + 2):
            return diff_n(a, h, axis, m)
        out = a
        while m > 0:
            step = 2 if m >= 2 else 1
            out = diff(out, h, axis, step)
            m -= step
        return out


def _as_parts(f) -> tuple[np.ndarray, GridSpec]:
    if isinstance(f, Field):
        return f.samples, f.spec
    raise ValidationError("expected a Field")


def _check_k(k: int):
    if int(k) != k or k < 0:
        raise ValidationError(f"norm order must be a non-negative integer, got {k}")
    if k > K_MAX:
        raise ValidationError(f"norm order {k} exceeds the supported maximum {K_MAX}")


def tangential_indices(k1: int):
    return [(b0, k1 - b0) for b0 in range(k1 + 1)]


def index_set(k: int, homogeneous: bool = False):
    """(k1, k2) pairs with k1 + floor((k2 + 1) / 2) <= k."""
    pairs = []
    for k1 in range(k + 1):
        for k2 in range(2 * (k - k1) + 1):
            if homogeneous and k1 == 0 and k2 == 0:
                continue
            pairs.append((k1, k2))
    return pairs


def _weights(spec: GridSpec, has_time: bool, ell: float, lam: float = 0.0) -> np.ndarray:
    w = (1.0 + spec.y**2) ** (0.5 * ell)
    if has_time:
        w = w[None, None, :] * np.exp(-lam * spec.t)[:, None, None]
    return w


def _l2sq(a, spec):
    return integrate(a * a, spec)


def _l2y_linf_tx(a, spec):
    axes = tuple(range(a.ndim - 1))
    m = np.max(np.abs(a), axis=axes)
    return float(np.sqrt(trapezoid(m * m, dx=spec.dy)))


def _linfy_l2_tx(a, spec):
    # L2 over (t, x) at each y, then max over y
    q = np.sum(a * a, axis=-2) * spec.dx
    if a.ndim == 3:
        q = trapezoid(q, dx=spec.dt, axis=0)
    return float(np.sqrt(np.max(q)))


def seminorm_terms(f: Field, k: int, ell: float, lam: float = 0.0, mode: str = "sum",
                   homogeneous: bool = False, _der: Derivatives | None = None) -> dict:
    """Squared weighted L2 seminorm of every term in the A^k index set.

    Keys are ``(b0, b1, k2)``. In ``"max"`` mode one key per ``(k1, k2)``.
    """
    _check_k(k)
    if mode not in INDEX_MODES:
        raise ValidationError(f"tangential_index_mode must be one of {INDEX_MODES}")
    samples, spec = _as_parts(f)
    der = _der or Derivatives(samples, spec)
    wt = _weights(spec, der.has_time, ell, lam)
    out = {}
    for k1, k2 in index_set(k, homogeneous):
        terms = {(b0, b1, k2): _l2sq(wt * der(b0, b1, k2), spec) for b0, b1 in tangential_indices(k1)}
        if mode == "max":
            key = max(terms, key=terms.get)
            terms = {key: terms[key]}
        out.update(terms)
    return out


def norm_A(f: Field, k: int, ell: float, mode: str = "sum", homogeneous: bool = False) -> float:
    return float(np.sqrt(sum(seminorm_terms(f, k, ell, mode=mode, homogeneous=homogeneous).values())))


def norm_A_dot(f: Field, k: int, ell: float, mode: str = "sum") -> float:
    return norm_A(f, k, ell, mode, homogeneous=True)


def norm_B(f: Field, k1: int, k2: int, lam: float, ell: float, mode: str = "sum") -> float:
    """sqrt of the sum over m <= k1, q <= k2 of |e^{-lam t} <y>^ell d_T^m d_y^q f|^2."""
    _check_k(k1)
    if int(k2) != k2 or not 0 <= k2 <= 2 * K_MAX:
        raise ValidationError(f"B-norm y-order must be in [0, {2 * K_MAX}], got {k2}")
    samples, spec = _as_parts(f)
    der = Derivatives(samples, spec)
    wt = _weights(spec, der.has_time, ell, lam)
    total = 0.0
    for m in range(k1 + 1):
        for q in range(k2 + 1):
            vals = [_l2sq(wt * der(b0, b1, q), spec) for b0, b1 in tangential_indices(m)]
            total += max(vals) if mode == "max" else sum(vals)
    return float(np.sqrt(total))


def norm_B_sup_t(f: Field, k1: int, k2: int, lam: float, ell: float) -> float:
    """The L^infty-in-time companion of the B norm."""
    samples, spec = _as_parts(f)
    der = Derivatives(samples, spec)
    if not der.has_time:
        return norm_B(f, k1, k2, lam, ell)
    wt = _weights(spec, True, ell, lam)
    total = 0.0
    for m in range(k1 + 1):
        for q in range(k2 + 1):
            for b0, b1 in tangential_indices(m):
                g = wt * der(b0, b1, q)
                per_t = trapezoid(g * g, dx=spec.dy, axis=-1).sum(axis=-1) * spec.dx
                total += float(np.max(per_t))
    return float(np.sqrt(total))


def _mixed(f: Field, k: int, ell: float, reducer, homogeneous: bool, mode: str) -> float:
    _check_k(k)
    samples, spec = _as_parts(f)
    der = Derivatives(samples, spec)
    wt = _weights(spec, der.has_time, ell)
    total = 0.0
    for k1, k2 in index_set(k, homogeneous):
        vals = [reducer(wt * der(b0, b1, k2), spec) for b0, b1 in tangential_indices(k1)]
        total += max(vals) if mode == "max" else sum(vals)
    return float(total)


def norm_C(f: Field, k: int, ell: float, mode: str = "sum", homogeneous: bool = False) -> float:
    """Sum of L2_y(L^infty_{t,x}) norms over the A^k index set."""
    return _mixed(f, k, ell, _l2y_linf_tx, homogeneous, mode)


def norm_D(f: Field, k: int, ell: float, mode: str = "sum", homogeneous: bool = False) -> float:
    """Sum of L^infty_y(L2_{t,x}) norms over the A^k index set."""
    return _mixed(f, k, ell, _linfy_l2_tx, homogeneous, mode)


def norm_Linf(f: Field, ell: float = 0.0) -> float:
    samples, spec = _as_parts(f)
    return float(np.max(np.abs(_weights(spec, samples.ndim == 3, ell) * samples)))


@dataclass
class NormReport:
    k: int
    ell: float
    lam: float = 0.0
    values: dict = dc_field(default_factory=dict)
    lambda_k_diag: float | None = None

    def to_json(self) -> str:
        payload = {name: {"k": self.k, "ell": self.ell, "value": v} for name, v in self.values.items()}
        payload["B"]["lambda"] = self.lam
        if self.lambda_k_diag is not None:
            payload["lambda_k_diag"] = {"k": self.k, "ell": self.ell, "value": self.lambda_k_diag}
        return json.dumps(payload, indent=2)


def norm_report(f: Field, k: int, ell: float, lam: float = 0.0, mode: str = "sum") -> NormReport:
    values = {
        "A": norm_A(f, k, ell, mode),
        "B": norm_B(f, k, 0, lam, ell, mode),
        "C": norm_C(f, k, ell, mode),
        "D": norm_D(f, k, ell, mode),
        "A_dot": norm_A(f, k, ell, mode, homogeneous=True),
        "C_dot": norm_C(f, k, ell, mode, homogeneous=True),
        "D_dot": norm_D(f, k, ell, mode, homogeneous=True),
        "Linf_ell": norm_Linf(f, ell),
    }
    return NormReport(k=k, ell=ell, lam=lam, values=values)


def lambda_diagnostic(bg, shear, k: int, ell: float) -> float:
    """Aggregate size of a linearization background at order k.

    Sum of |u_bg - u_s|_A, |u_s|_C, |v_bg|_D, |eta_bar|_C, |eta - eta_bar|_A
    (all unweighted) and |zeta|_A with weight ell.
    """
    _check_k(k)
    if np.any(shear.d_y_u_s.samples <= 0):
        raise ValidationError("shear flow is not monotone; lambda diagnostic undefined")
    if np.any(bg.d_y_u_tilde.samples <= 0):
        raise ValidationError("background is not monotone; lambda diagnostic undefined")
    return (norm_A(bg.u_tilde - shear.u_s, k, 0.0)
            + norm_C(shear.u_s, k, 0.0)
            + norm_D(bg.v_tilde, k, 0.0)
            + norm_C(bg.eta_bar, k, 0.0)
            + norm_A(bg.eta - bg.eta_bar, k, 0.0)
            + norm_A(bg.zeta, k, ell))


def lambda_30(bg, shear, ell: float) -> float:
    """The (k1, k2) = (3, 0) piece of the background size, used by the L2 energy gate."""
    spec = bg.u_tilde.spec
    return (norm_B(bg.u_tilde - shear.u_s, 3, 0, 0.0, 0.0)
            + norm_B(shear.u_s, 3, 0, 0.0, 0.0) / np.sqrt(spec.L_x)
            + _tangential_mixed(bg.v_tilde, 3, _linfy_l2_tx)
            + _tangential_mixed(bg.eta_bar, 3, _l2y_linf_tx)
            + norm_B(bg.eta - bg.eta_bar, 3, 0, 0.0, 0.0)
            + norm_B(bg.zeta, 3, 0, 0.0, ell))


def _tangential_mixed(f: Field, k1: int, reducer) -> float:
    der = Derivatives(f.samples, f.spec)
    return float(sum(reducer(der(b0, b1, 0), f.spec)
                     for m in range(k1 + 1) for b0, b1 in tangential_indices(m)))


def morse_check(f: Field, g: Field, k: int, ell: float) -> float:
    """|fg|_A / (|f|_A |g|_inf + |f|_inf |g|_{A dot}); 0 when both vanish."""
    num = norm_A(f * g, k, ell)
    den = norm_A(f, k, ell) * norm_Linf(g) + norm_Linf(f) * norm_A(g, k, ell, homogeneous=True)
    if den == 0.0:
        return 0.0
    return num / den
