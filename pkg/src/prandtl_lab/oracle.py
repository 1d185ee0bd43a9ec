"""Direct nonlinear Prandtl solver used as an independent reference.

Backward Euler in t with Picard iteration inside each step: the vertical
velocity is frozen at the previous Picard iterate, diffusion and v u_y are
implicit, and the x-transport is the explicit upwind term of
:func:`prandtl_lab.linearized.solve_uv_direct`.

``form="perturbation"`` marches p = u - u_s around the analytic shear flow
(so the shear itself carries no time-stepping error); ``form="full"``
marches u with the far-field value u_s(t, Y).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import CFLError, MonotonicityError, PicardError, ValidationError
from .grid import Field, dy_
from .linearized import CFL_MAX, _upwind_advect, vertical_velocity

FORMS = ("perturbation", "full")


@dataclass(frozen=True)
class OracleConfig:
    picard_max: int = 8
    picard_tol: float = 1e-10
    form: str = "perturbation"
    check_monotone: bool = True

    def __post_init__(self):
        if self.picard_max < 1:
            raise ValidationError("picard_max must be >= 1")
        if not self.picard_tol > 0:
            raise ValidationError("picard_tol must be positive")
        if self.form not in FORMS:
            raise ValidationError(f"form must be one of {FORMS}")


@dataclass(eq=False)
class OracleResult:
    u: Field
    v: Field
    picard_counts: np.ndarray


def _tridiag(nx, ny, dt, dy, vel):
    """Banded matrix for q/dt - q_yy + vel q_y with Dirichlet rows at both ends."""
    lo = np.zeros((nx, ny))
    di = np.ones((nx, ny))
    up = np.zeros((nx, ny))
    di[:, 1:-1] = 1.0 / dt + 2.0 / dy**2
    lo[:, 1:-1] = -1.0 / dy**2 - vel[:, 1:-1] / (2 * dy)
    up[:, 1:-1] = -1.0 / dy**2 + vel[:, 1:-1] / (2 * dy)
    up[:, -1] = 0.0
    lo[:, 0] = 0.0
    ab = np.zeros((3, nx * ny))
    ab[0, 1:] = up.ravel()[:-1]
    ab[1] = di.ravel()
    ab[2, :-1] = lo.ravel()[1:]
    return ab


def solve_nonlinear(u0_tilde: Field, shear, cfg: OracleConfig = OracleConfig(),
                    forcing: Field | None = None) -> OracleResult:
    """March u_t + u u_x + v u_y - u_yy = forcing from u(0) = u_s(0) + u0_tilde.

    Returns the total velocity u (shear included) and v.
    """
    spec = shear.spec
    if u0_tilde.has_time:
        raise ValidationError("initial perturbation must be t-independent")
    nt, nx, ny = spec.shape
    dt, dy, dx = spec.dt, spec.dy, spec.dx
    us, d1 = shear.u_s.samples, shear.d_y_u_s.samples
    pert = cfg.form == "perturbation"
    base = us if pert else np.zeros(spec.shape)
    base_y = d1 if pert else np.zeros(spec.shape)
    src = np.zeros(spec.shape) if forcing is None else forcing.samples

    q = np.zeros(spec.shape)
    q[0] = u0_tilde.samples if pert else us[0] + u0_tilde.samples
    q[0][:, 0] = 0.0
    top = np.zeros(nt) if pert else us[:, 0, -1]
    counts = np.zeros(nt - 1, dtype=int)
    for m in range(nt - 1):
        n = m + 1
        U = base[m] + q[m]
        if np.max(np.abs(U)) * dt / dx > CFL_MAX:
            raise CFLError(f"CFL number {np.max(np.abs(U)) * dt / dx:.3f} exceeds {CFL_MAX} at step {n}")
        expl = q[m] / dt - _upwind_advect(U, q[m], dx) + src[n]
        # linear extrapolation in t as the first Picard guess
        it = 2 * q[m] - q[m - 1] if m >= 1 else q[m].copy()
        it[:, 0] = 0.0
        it[:, -1] = top[n]
        for k in range(cfg.picard_max):
            V = vertical_velocity(it, spec)
            rhs = expl - V * base_y[n]
            rhs[:, 0] = 0.0
            rhs[:, -1] = top[n]
            ab = _tridiag(nx, ny, dt, dy, V)
            nxt = solve_banded((1, 1), ab, rhs.ravel()).reshape(nx, ny)
            change = np.max(np.abs(nxt - it))
            scale = max(np.max(np.abs(nxt)), 1e-300)
            it = nxt
            if change <= cfg.picard_tol * scale:
                break
        else:
            raise PicardError(f"Picard iteration did not converge at step {n} "
                              f"(last relative change {change / scale:.3g})", step=n)
        counts[m] = k + 1
        q[n] = it
    u = base + q
    v = vertical_velocity(q, spec)
    if cfg.check_monotone:
        uy = base_y + dy_(q, spec) if pert else dy_(u, spec)
        bad = np.argwhere(uy[:, :, :-1] <= 0)
        if bad.size:
            i, j, k = bad[0]
            raise MonotonicityError(f"d_y u <= 0 at t={spec.t[i]:.4g}, x={spec.x[j]:.4g}, y={spec.y[k]:.4g}",
                                    node=(float(spec.t[i]), float(spec.x[j]), float(spec.y[k])))
    return OracleResult(Field(spec, u), Field(spec, v), counts)
