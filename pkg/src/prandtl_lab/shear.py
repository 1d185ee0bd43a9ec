"""Monotone shear flows evolved by the heat equation on the half-line.

The shear flow u_s(t, y) solves u_t = u_yy with u(t, 0) = 0 and u -> 1 at
infinity. It is computed from the odd-reflection heat kernel written in the
variable xi = (y' - y) / (2 sqrt t); for the p-th y-derivative the reflected
term carries the sign (-1)^(p+1), valid when the even derivatives of the
initial profile vanish at the wall.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.special import erf

from .errors import MonotonicityError, QuadratureError, ValidationError
from .grid import Field, GridSpec, diff

XI_MAX = 8.0
N_QUAD = 256
PROFILES = ("erf_canonical", "exp_saturating", "custom_table")


@dataclass(frozen=True)
class ShearProfile:
    """Initial shear profile u0_s(y) with derivatives up to order 4."""

    name: str = "erf_canonical"
    width: float = 1.0
    rate: float = 1.0
    table_y: tuple = ()
    table_u: tuple = ()
    _spline: object = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.name not in PROFILES:
            raise ValidationError(f"unknown shear profile {self.name!r}; choose from {PROFILES}")
        if self.width <= 0 or self.rate <= 0:
            raise ValidationError("profile width and rate must be positive")
        if self.name == "custom_table":
            y = np.asarray(self.table_y, dtype=float)
            u = np.asarray(self.table_u, dtype=float)
            if y.size < 8 or y.shape != u.shape or y[0] != 0.0 or np.any(np.diff(y) <= 0):
                raise ValidationError("custom_table needs >= 8 increasing nodes starting at y=0")
            object.__setattr__(self, "_spline", make_interp_spline(y, u, k=5))

    @property
    def compatible(self) -> bool:
        """Whether even derivatives vanish at the wall (exp_saturating does not)."""
        return self.name != "exp_saturating"

    def derivative(self, y, p: int = 0) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if not 0 <= p <= 4:
            raise ValidationError("profile derivatives are available up to order 4")
        if self.name == "erf_canonical":
            w = self.width
            if p == 0:
                return erf(y / (2 * w))
            g = np.exp(-y**2 / (4 * w**2)) / (w * math.sqrt(math.pi))
            poly = {
                1: 1.0,
                2: -y / (2 * w**2),
                3: y**2 / (4 * w**4) - 1 / (2 * w**2),
                4: 3 * y / (4 * w**4) - y**3 / (8 * w**6),
            }[p]
            return g * poly
        if self.name == "exp_saturating":
            a = self.rate
            e = np.exp(-a * y)
            return 1 - e if p == 0 else -((-a) ** p) * e
        ymax = self.table_y[-1]
        inside = y <= ymax
        out = np.where(inside, self._spline(np.minimum(y, ymax), nu=p), 1.0 if p == 0 else 0.0)
        return out

    def validate(self, y: np.ndarray, tol: float = 1e-10):
        d1 = self.derivative(y, 1)
        bad = np.flatnonzero(d1 <= 0)
        if bad.size:
            raise MonotonicityError(f"profile {self.name} is not increasing at y={y[bad[0]]:.6g}",
                                    node=(None, None, float(y[bad[0]])))
        if abs(self.derivative(0.0)) > tol:
            raise ValidationError("profile must vanish at y=0")
        gap = abs(self.derivative(y[-1]) - 1.0)
        if gap > tol and self.name == "erf_canonical":
            raise ValidationError(f"profile has not reached 1 at y={y[-1]}")
        if gap > 1e-6 and self.name == "exp_saturating":
            warnings.warn(f"exp_saturating misses 1 by {gap:.2e} at y={y[-1]}", stacklevel=2)
        if self.compatible:
            for p in (2, 4):
                if abs(self.derivative(0.0, p)) > 1e-6:
                    raise ValidationError(f"even derivative of order {p} does not vanish at y=0")
        else:
            warnings.warn(f"profile {self.name} violates the even-derivative compatibility "
                          "conditions at order >= 2; use for robustness studies only", stacklevel=2)


@dataclass(frozen=True, eq=False)
class ShearFlow:
    spec: GridSpec
    profile: ShearProfile | None
    u_s: Field
    d_y_u_s: Field
    d2_y_u_s: Field
    d3_y_u_s: Field
    alpha: Field

    def column(self, name: str = "u_s") -> np.ndarray:
        """(n_t, n_y) slice of one of the stored x-independent fields."""
        return getattr(self, name).samples[:, 0, :]

    @classmethod
    def from_samples(cls, spec: GridSpec, u_s, d1, d2, d3) -> "ShearFlow":
        """Build from (n_t, n_y) tables; no heat-equation guarantee is implied."""
        fields = [Field(spec, np.broadcast_to(np.asarray(a)[:, None, :], spec.shape)) for a in (u_s, d1, d2, d3)]
        d1a = np.asarray(d1)
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = np.where(d1a != 0, np.asarray(d2) / np.where(d1a != 0, d1a, 1.0), 0.0)
        return cls(spec, None, *fields, Field(spec, np.broadcast_to(alpha[:, None, :], spec.shape)))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(N_QUAD)


def _integral_from(lower: np.ndarray, func) -> np.ndarray:
    """int_lower^XI_MAX e^{-xi^2} func(xi) d xi, Gauss-Legendre, lower clipped to -XI_MAX."""
    a = np.clip(lower, -XI_MAX, XI_MAX)[..., None]
    half = 0.5 * (XI_MAX - a)
    xi = a + half * (_GL_NODES + 1.0)
    return np.sum(half * _GL_WEIGHTS * np.exp(-xi**2) * func(xi), axis=-1)


def kernel_values(profile: ShearProfile, t: np.ndarray, y: np.ndarray, p: int = 0) -> np.ndarray:
    """p-th y-derivative of the heat evolution of ``profile`` at the (t, y) pairs."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t, y = np.broadcast_arrays(t, y)
    out = np.empty(t.shape)
    at0 = t == 0
    out[at0] = profile.derivative(y[at0], p)
    tt, yy = t[~at0], y[~at0]
    if tt.size:
        s = 2 * np.sqrt(tt)[..., None]
        y3 = yy[..., None]
        a = yy / (2 * np.sqrt(tt))
        first = _integral_from(-a, lambda xi: profile.derivative(s * xi + y3, p))
        sign = -1.0 if p == 0 else (-1.0) ** (p + 1)
        second = _integral_from(a, lambda xi: profile.derivative(np.maximum(s * xi - y3, 0.0), p))
        second = np.where(a[...] >= XI_MAX, 0.0, second)
        out[~at0] = (first + sign * second) / math.sqrt(math.pi)
    return out


def solve_heat_kernel(profile: ShearProfile, spec: GridSpec) -> ShearFlow:
    profile.validate(spec.y)
    T, Yg = np.meshgrid(spec.t, spec.y, indexing="ij")
    tables = [kernel_values(profile, T, Yg, p) for p in range(4)]
    d1 = tables[1]
    bad = np.argwhere(d1 <= 0)
    if bad.size:
        i, k = bad[0]
        raise QuadratureError(f"kernel quadrature produced d_y u_s <= 0 at t={spec.t[i]:.4g}, y={spec.y[k]:.4g}")
    flow = ShearFlow.from_samples(spec, *tables)
    return ShearFlow(spec, profile, flow.u_s, flow.d_y_u_s, flow.d2_y_u_s, flow.d3_y_u_s, flow.alpha)


def closed_form_erf(t, y, width: float = 1.0, p: int = 0):
    """Exact heat evolution of erf(y / (2 width)) and its first two y-derivatives."""
    s2 = width**2 + np.asarray(t, dtype=float)
    if p == 0:
        return erf(y / (2 * np.sqrt(s2)))
    g = np.exp(-np.asarray(y) ** 2 / (4 * s2)) / np.sqrt(math.pi * s2)
    if p == 1:
        return g
    if p == 2:
        return -y / (2 * s2) * g
    raise ValidationError("closed form provided for p <= 2")


def kernel_time_derivative(profile: ShearProfile, t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """d_t of the kernel representation, differentiated under the integral.

    The moving limits contribute u0_s(0) = 0, so only the integrands change:
    d_t u = (1/sqrt(pi)) int e^{-xi^2} (xi / sqrt t) [u0'(2 sqrt t xi + y) - u0'(2 sqrt t xi - y)].
    The t = 0 row uses u0''.
    """
    t, y = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
    out = np.empty(t.shape)
    at0 = t == 0
    out[at0] = profile.derivative(y[at0], 2)
    tt, yy = t[~at0], y[~at0]
    if tt.size:
        rt = np.sqrt(tt)[..., None]
        y3 = yy[..., None]
        a = yy / (2 * np.sqrt(tt))
        first = _integral_from(-a, lambda xi: xi / rt * profile.derivative(2 * rt * xi + y3, 1))
        second = _integral_from(a, lambda xi: xi / rt * profile.derivative(np.maximum(2 * rt * xi - y3, 0.0), 1))
        second = np.where(a >= XI_MAX, 0.0, second)
        out[~at0] = (first - second) / math.sqrt(math.pi)
    return out


def heat_residual(flow: ShearFlow, method: str = "kernel") -> float:
    """L2 norm of d_t u_s - d_y^2 u_s.

    ``"kernel"`` compares the quadrature of d_t u_s with the stored d_y^2 u_s
    (a check of the quadrature); ``"lattice"`` uses grid stencils on u_s over
    interior y nodes and converges at second order.
    """
    spec = flow.spec
    if method == "kernel":
        if flow.profile is None:
            raise ValidationError("kernel heat residual needs the initial profile")
        T, Yg = np.meshgrid(spec.t, spec.y, indexing="ij")
        r = kernel_time_derivative(flow.profile, T, Yg) - flow.column("d2_y_u_s")
    elif method == "lattice":
        u = flow.column()
        r = diff(u, spec.dt, 0, 1) - diff(u, spec.dy, 1, 2)
        r = r[:, 1:-1]
    else:
        raise ValidationError("method must be 'kernel' or 'lattice'")
    return float(np.sqrt(np.sum(r**2) * spec.dt * spec.dy * spec.L_x))


def burgers_residual(flow: ShearFlow) -> float:
    """L2 norm over interior nodes of alpha_t - alpha_yy - 2 alpha alpha_y."""
    spec = flow.spec
    a = flow.column("alpha")
    r = diff(a, spec.dt, 0, 1) - diff(a, spec.dy, 1, 2) - 2 * a * diff(a, spec.dy, 1, 1)
    r = r[1:-1, 1:-1]
    return float(np.sqrt(np.sum(r**2) * spec.dt * spec.dy * spec.L_x))


def shift_ratio_diagnostics(flow: ShearFlow, y_bar: float, t_bar: float, R0: float | None = None):
    """Max over the lattice of the y- and t-shift ratios of d_y u_s.

    Shifted values come from linear interpolation; the ratios are taken over
    y in [0, Y - y_bar] and t in [0, T - t_bar].
    """
    spec = flow.spec
    if y_bar < 0 or t_bar < 0:
        raise ValidationError("shifts must be non-negative")
    R0 = max(y_bar, t_bar) if R0 is None else R0
    if y_bar > R0 or t_bar > R0:
        raise ValidationError(f"shifts ({y_bar}, {t_bar}) exceed R0={R0}")
    if t_bar >= spec.T or y_bar >= spec.Y:
        raise ValidationError(f"shifts must stay below T={spec.T} and Y={spec.Y}")
    d1 = flow.column("d_y_u_s")
    bad = np.argwhere(d1 <= 0)
    if bad.size:
        i, k = bad[0]
        raise MonotonicityError(f"d_y u_s <= 0 at t={spec.t[i]:.4g}, y={spec.y[k]:.4g}",
                                node=(float(spec.t[i]), None, float(spec.y[k])))
    y, t = spec.y, spec.t
    keep_y = y <= spec.Y - y_bar + 1e-14
    shifted_y = np.array([np.interp(y[keep_y] + y_bar, y, row) for row in d1])
    ratio_y = float(np.max(shifted_y / d1[:, keep_y]))
    keep = t <= spec.T - t_bar + 1e-14
    shifted_t = np.array([np.interp(np.minimum(t[keep] + t_bar, spec.T), t, col) for col in d1.T]).T
    ratio_t = float(np.max(shifted_t / d1[keep]))
    return ratio_y, ratio_t
