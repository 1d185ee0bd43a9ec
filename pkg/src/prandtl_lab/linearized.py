"""Linearization around a monotone background and its two solvers.

The linearized system for (u, v) around (u~, v~) with a = d_y u~ > 0 is

    u_t + u~ u_x + v~ u_y + u u~_x + v a - u_yy = f,   v = -int_0^y u_x,

with u = v = 0 at the wall. Writing u = a W and w = W_y turns it into a
single equation for w,

    w_t + d_x(u~ w) + d_y(v~ w) - 2 d_y(eta w) + d_y(zeta W) - w_yy = d_y f~,
    (w_y + 2 eta w - v~ w)|_{y=0} = -f~|_{y=0},

with eta = a_y / a, zeta = (d_t + u~ d_x + v~ d_y - d_y^2) a / a and
f~ = f / a. The reduction uses only a = d_y u~; it does not need
d_x u~ + d_y v~ = 0. When v~ vanishes at the wall the boundary row is the
usual Robin condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLError, MonotonicityError, NumericalGateError, ValidationError
from .grid import Field, GridSpec, cumint_y, diff, dx_, dy_, integrate

CFL_MAX = 0.9


@dataclass(frozen=True, eq=False)
class Background:
    u_tilde: Field
    v_tilde: Field
    d_y_u_tilde: Field
    d2_y_u_tilde: Field
    eta: Field
    eta_bar: Field
    zeta: Field
    shear: object

    @property
    def spec(self) -> GridSpec:
        return self.u_tilde.spec


@dataclass(frozen=True, eq=False)
class LinearizedSolution:
    w: Field
    u: Field
    v: Field
    f_tilde: Field
    residual_w: float
    residual_uv: float
    energy_trace: np.ndarray = dc_field(repr=False)


def divergence(u: np.ndarray, v: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Discrete d_x u + d_y v on cell midpoints in y.

    This is the operator for which v = -cumint_y(d_x u) is exactly
    divergence-free: trapezoid averaging of d_x u, one-sided difference of v.
    """
    ux = dx_(u, spec)
    return np.diff(v, axis=-1) / spec.dy + 0.5 * (ux[..., 1:] + ux[..., :-1])


def vertical_velocity(u: np.ndarray, spec: GridSpec) -> np.ndarray:
    return -cumint_y(dx_(u, spec), spec)


def _first_bad(mask: np.ndarray, spec: GridSpec):
    i, j, k = np.argwhere(mask)[0]
    return float(spec.t[i]), float(spec.x[j]), float(spec.y[k])


def assemble_background(u_tilde: Field, shear, v_tilde: Field | None = None,
                        perturbation: np.ndarray | None = None) -> Background:
    """Coefficients of the w-equation around ``u_tilde``.

    The shear part of d_y u~ is taken from the analytic fields of ``shear``,
    so only the perturbation p = u~ - u_s is differenced. The heat operator
    annihilates d_y u_s exactly, so the shear contributes to zeta only
    through v~ d_y^2 u_s.

    Pass ``perturbation`` when p is known: recovering it by subtraction leaves
    O(1e-16) noise which, divided by the Gaussian tail of d_y u_s, swamps eta
    and zeta near y = Y.
    """
    spec = u_tilde.spec
    if not u_tilde.has_time:
        raise ValidationError("background must depend on t")
    if shear.spec != spec:
        raise ValidationError("background and shear flow live on different grids")
    ut = u_tilde.samples
    if perturbation is None:
        p = ut - shear.u_s.samples
    else:
        p = np.broadcast_to(np.asarray(perturbation, dtype=float), spec.shape)
    q = dy_(p, spec)
    a = shear.d_y_u_s.samples + q
    a_y = shear.d2_y_u_s.samples + dy_(q, spec)
    bad = ~(a > 0)
    if np.any(bad):
        t, x, y = _first_bad(bad, spec)
        raise MonotonicityError(f"d_y u~ <= 0 at (t, x, y) = ({t:.4g}, {x:.4g}, {y:.4g})",
                                node=(t, x, y))
    v = vertical_velocity(ut, spec) if v_tilde is None else v_tilde.samples
    zeta_num = diff(q, spec.dt, 0, 1) + ut * dx_(q, spec) + v * (shear.d2_y_u_s.samples + dy_(q, spec)) \
        - dy_(q, spec, 2)
    F = lambda arr: Field(spec, arr)
    return Background(u_tilde=u_tilde, v_tilde=F(v), d_y_u_tilde=F(a), d2_y_u_tilde=F(a_y),
                      eta=F(a_y / a), eta_bar=F(shear.d2_y_u_s.samples / a), zeta=F(zeta_num / a),
                      shear=shear)


def shear_background(shear) -> Background:
    return assemble_background(shear.u_s, shear, perturbation=np.zeros(shear.spec.shape))


# ---------------------------------------------------------------------------
# w-path

def _upwind_flux_div(c: np.ndarray, w: np.ndarray, dx: float) -> np.ndarray:
    """Conservative d_x(c w) with per-face upwinding, periodic in x (axis 0)."""
    c_face = 0.5 * (c + np.roll(c, -1, 0))
    w_face = np.where(c_face > 0, w, np.roll(w, -1, 0))
    flux = c_face * w_face
    return (flux - np.roll(flux, 1, 0)) / dx


def _upwind_advect(c: np.ndarray, u: np.ndarray, dx: float) -> np.ndarray:
    """Non-conservative c d_x u with per-node upwinding, periodic in x (axis 0)."""
    back = (u - np.roll(u, 1, 0)) / dx
    fwd = (np.roll(u, -1, 0) - u) / dx
    return c * np.where(c > 0, back, fwd)


def _check_cfl(bg: Background):
    spec = bg.spec
    cfl = bg.u_tilde.max_abs() * spec.dt / spec.dx
    if cfl > CFL_MAX:
        n_needed = int(np.ceil(bg.u_tilde.max_abs() * spec.T / (CFL_MAX * spec.dx))) + 1
        raise CFLError(f"transport CFL number {cfl:.3f} exceeds {CFL_MAX}; "
                       f"use n_t >= {n_needed} (smaller dt)")


def _w_system(c, robin, dt, dy):
    """Banded (1, 1) matrix of one implicit w step for every x column.

    ``c`` (n_x, n_y) is the implicit y-advection speed v~ - 2 eta (or v~),
    ``robin`` (n_x,) the wall coefficient 2 eta - v~. Returns ab (3, N),
    plus the fold factor of the Robin row (needed for the right-hand side).
    """
    nx, ny = c.shape
    lo = np.zeros((nx, ny))
    di = np.zeros((nx, ny))
    up = np.zeros((nx, ny))
    di[:, 1:-1] = 1.0 / dt + 2.0 / dy**2
    lo[:, 1:-1] = -1.0 / dy**2 - c[:, :-2] / (2 * dy)
    up[:, 1:-1] = -1.0 / dy**2 + c[:, 2:] / (2 * dy)
    di[:, -1] = 1.0
    # wall row: (-3 w0 + 4 w1 - w2) / (2 dy) + robin w0, with w2 eliminated using row 1
    a0 = -3.0 / (2 * dy) + robin
    b0 = 4.0 / (2 * dy)
    c0 = -1.0 / (2 * dy)
    if np.any(np.abs(up[:, 1]) < 1e-12 * (1.0 / dy**2)):
        raise NumericalGateError("Robin row is singular: cannot fold the one-sided stencil")
    fold = c0 / up[:, 1]
    di[:, 0] = a0 - fold * lo[:, 1]
    up[:, 0] = b0 - fold * di[:, 1]
    if np.any(np.abs(di[:, 0]) < 1e-12 / dy):
        raise NumericalGateError("Robin row is singular after folding")
    # assemble banded storage of the block-diagonal system
    ab = np.zeros((3, nx * ny))
    upper = up.copy()
    upper[:, -1] = 0.0
    lower = lo.copy()
    lower[:, 0] = 0.0
    ab[0, 1:] = upper.ravel()[:-1]
    ab[1] = di.ravel()
    ab[2, :-1] = lower.ravel()[1:]
    return ab, fold


def _banded_matvec(ab, x):
    out = ab[1] * x
    out[:-1] += ab[0, 1:] * x[1:]
    out[1:] += ab[2, :-1] * x[:-1]
    return out


def solve_w(bg: Background, f: Field, ell: float = 1.0, lam: float = 0.0,
            w0: Field | None = None, diagnostic: bool = False) -> LinearizedSolution:
    """Backward-Euler IMEX march of the w-equation, then reconstruction of (u, v).

    Implicit: diffusion, the y-advection d_y((v~ - 2 eta) w) and the wall
    row. Explicit: upwind d_x(u~ w) and d_y(zeta W). Coefficients and the
    source are taken at the new time level. ``diagnostic`` drops the eta and
    zeta terms.
    """
    spec = bg.spec
    if f.spec != spec:
        raise ValidationError("forcing and background live on different grids")
    _check_cfl(bg)
    dt, dy, dx = spec.dt, spec.dy, spec.dx
    a = bg.d_y_u_tilde.samples
    ft = f.samples / a
    if not np.all(np.isfinite(ft)):
        raise NumericalGateError("f / d_y u~ is not finite")
    d_y_ft = dy_(ft, spec)
    ut, vt = bg.u_tilde.samples, bg.v_tilde.samples
    eta = np.zeros_like(a) if diagnostic else bg.eta.samples
    zeta = np.zeros_like(a) if diagnostic else bg.zeta.samples

    nt, nx, ny = spec.shape
    w = np.zeros(spec.shape)
    if w0 is not None:
        w[0] = w0.samples if not w0.has_time else w0.samples[0]
    weight = (1.0 + spec.y**2) ** ell
    energy = np.empty(nt)
    energy[0] = np.sum(w[0] ** 2 * weight) * dx * dy
    res = 0.0
    for m in range(nt - 1):
        n = m + 1
        c = vt[n] - 2 * eta[n]
        robin = (2 * eta[n] - vt[n])[:, 0]
        ab, fold = _w_system(c, robin, dt, dy)
        W = cumint_y(w[m], spec)
        expl = -_upwind_flux_div(ut[m], w[m], dx) - dy_(zeta[m] * W, spec)
        rhs = w[m] / dt + expl + d_y_ft[n]
        rhs[:, -1] = 0.0
        rhs[:, 0] = -ft[n][:, 0] - fold * rhs[:, 1]
        sol = solve_banded((1, 1), ab, rhs.ravel())
        res = max(res, float(np.max(np.abs(_banded_matvec(ab, sol) - rhs.ravel()))))
        w[n] = sol.reshape(nx, ny)
        energy[n] = np.exp(-2 * lam * spec.t[n]) * np.sum(w[n] ** 2 * weight) * dx * dy
    u = a * cumint_y(w, spec)
    v = vertical_velocity(u, spec)
    uf, vf = Field(spec, u), Field(spec, v)
    return LinearizedSolution(w=Field(spec, w), u=uf, v=vf, f_tilde=Field(spec, ft),
                              residual_w=res, residual_uv=residual_uv(bg, uf, vf, f),
                              energy_trace=energy)


def residual_uv(bg: Background, u: Field, v: Field, f: Field) -> float:
    """L2 norm over interior y of the linearized (u, v) equation evaluated with lattice stencils."""
    spec = bg.spec
    U, V = u.samples, v.samples
    r = (diff(U, spec.dt, 0, 1) + bg.u_tilde.samples * dx_(U, spec) + bg.v_tilde.samples * dy_(U, spec)
         + U * dx_(bg.u_tilde.samples, spec) + V * bg.d_y_u_tilde.samples - dy_(U, spec, 2) - f.samples)
    r = r[:, :, 1:-1]
    return float(np.sqrt(np.sum(r**2) * spec.dt * spec.dx * spec.dy))


# ---------------------------------------------------------------------------
# direct (u, v) path

def solve_uv_direct(bg: Background, f: Field, u0: Field | None = None) -> tuple[Field, Field]:
    """Backward-Euler march of the (u, v) system with u = 0 at y = 0 and y = Y.

    Implicit: diffusion, v~ d_y u and u d_x u~. Explicit: upwind u~ d_x u and
    the coupling a v, with v recomputed from the divergence constraint.
    """
    spec = bg.spec
    if f.spec != spec:
        raise ValidationError("forcing and background live on different grids")
    _check_cfl(bg)
    dt, dy, dx = spec.dt, spec.dy, spec.dx
    nt, nx, ny = spec.shape
    ut, vt, a = bg.u_tilde.samples, bg.v_tilde.samples, bg.d_y_u_tilde.samples
    ux_t = dx_(ut, spec)
    u = np.zeros(spec.shape)
    if u0 is not None:
        u[0] = u0.samples if not u0.has_time else u0.samples[0]
        u[0][:, 0] = 0.0
    for m in range(nt - 1):
        n = m + 1
        lo = np.zeros((nx, ny))
        di = np.ones((nx, ny))
        up = np.zeros((nx, ny))
        di[:, 1:-1] = 1.0 / dt + 2.0 / dy**2 + ux_t[n][:, 1:-1]
        lo[:, 1:-1] = -1.0 / dy**2 - vt[n][:, 1:-1] / (2 * dy)
        up[:, 1:-1] = -1.0 / dy**2 + vt[n][:, 1:-1] / (2 * dy)
        v_m = vertical_velocity(u[m], spec)
        rhs = u[m] / dt - _upwind_advect(ut[m], u[m], dx) - a[m] * v_m + f.samples[n]
        rhs[:, 0] = 0.0
        rhs[:, -1] = 0.0
        ab = np.zeros((3, nx * ny))
        upper = up.copy()
        upper[:, -1] = 0.0
        lower = lo.copy()
        lower[:, 0] = 0.0
        ab[0, 1:] = upper.ravel()[:-1]
        ab[1] = di.ravel()
        ab[2, :-1] = lower.ravel()[1:]
        u[n] = solve_banded((1, 1), ab, rhs.ravel()).reshape(nx, ny)
    v = vertical_velocity(u, spec)
    return Field(spec, u), Field(spec, v)


# ---------------------------------------------------------------------------
# energy estimate probe

def gate_lambda(ell: float, lambda30: float) -> float:
    return (4 * ell * (1 + lambda30)) ** 2


def energy_probe(sol: LinearizedSolution, bg: Background, lam: float, ell: float = 1.0,
                 lambda30: float | None = None) -> dict:
    """Both sides of the weighted L2 energy estimate for a computed w.

    lhs = sup_t |e^{-lam t} w(t)|^2_{L2_ell} + lam |w|^2_B + |d_y w|^2_B,
    rhs = |f~|^2_B, with B the (0, 0) norm at damping lam and weight ell.
    """
    spec = bg.spec
    wt = np.exp(-lam * spec.t)[:, None, None] * ((1.0 + spec.y**2) ** (0.5 * ell))[None, None, :]
    w = sol.w.samples
    per_t = [integrate((wt[i] * w[i]) ** 2, spec) for i in range(spec.n_t)]
    lhs = float(np.max(per_t) + lam * integrate((wt * w) ** 2, spec)
                + integrate((wt * dy_(w, spec)) ** 2, spec))
    rhs = float(integrate((wt * sol.f_tilde.samples) ** 2, spec))
    out = {"lhs": lhs, "rhs": rhs, "lambda": lam}
    if lambda30 is not None:
        gate = gate_lambda(ell, lambda30)
        out.update(gate=gate, gate_cleared=bool(lam >= gate))
    return out
