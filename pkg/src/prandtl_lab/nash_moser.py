"""Nash-Moser iteration around the shear flow.

Every iterate is stored as the shear flow plus a lattice perturbation,
u^n = u_s + p^n. Derivatives of u_s come from the analytic shear fields and
derivatives of p^n from the lattice stencils, so the Prandtl operator P and
its linearization P' are exactly bilinear in stencil outputs. The step
identity P(u + du) - P(u) - P'_theta(du) = e^(1) + e^(2) and the telescoping
law of the sources then hold to rounding, whatever the inner solver's
accuracy.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dc_field
from math import comb

import numpy as np

from .errors import NumericalGateError, ValidationError
from .grid import Field, GridSpec, cumint_y, diff, dx_, dy_
from .linearized import assemble_background, solve_uv_direct, solve_w, vertical_velocity
from .mollifier import smooth_array, theta
from .norms import lambda_diagnostic, norm_A, norm_D

INNER_SOLVERS = ("via_w", "direct_uv")
OUTCOMES = ("tolerance", "n_max", "gate")


@dataclass(frozen=True)
class IterationConfig:
    eps: float = 0.01
    k0: int = 2
    theta0: float = 10.0
    n_max: int = 8
    inner_solver: str = "via_w"
    monitor_orders: tuple = ((1, 1.0),)
    tolerance_residual: float = 0.0
    ell: float = 1.0
    far_extension: str = "edge"
    track_lambda: bool = True

    def __post_init__(self):
        if self.eps < 0:
            raise ValidationError("eps must be non-negative")
        if self.k0 not in (1, 2):
            raise ValidationError("k0 must be 1 or 2 (the recursion uses d_y^(2k+1) u_s with k < k0)")
        if self.theta0 < 4:
            raise ValidationError("theta0 must be >= 4")
        if self.n_max < 1:
            raise ValidationError("n_max must be >= 1")
        if self.inner_solver not in INNER_SOLVERS:
            raise ValidationError(f"inner_solver must be one of {INNER_SOLVERS}")


@dataclass(eq=False)
class IterationState:
    n: int
    p: np.ndarray
    v: np.ndarray
    f_a: np.ndarray
    e_history: list = dc_field(default_factory=list)
    f_history: list = dc_field(default_factory=list)
    delta_u: np.ndarray | None = None
    delta_v: np.ndarray | None = None
    w: np.ndarray | None = None
    f: np.ndarray | None = None
    e1: np.ndarray | None = None
    e2: np.ndarray | None = None
    residual: float = float("nan")

    def u_field(self, shear) -> Field:
        return Field(shear.spec, shear.u_s.samples + self.p)


@dataclass(eq=False)
class RunResult:
    state: IterationState
    trace: list
    outcome: str
    message: str = ""
    wall_time: float = 0.0


class PrandtlOps:
    """P, P' and the e-terms on one lattice around one shear flow."""

    def __init__(self, shear, ell: float = 1.0, extension: str = "edge"):
        self.shear = shear
        self.spec: GridSpec = shear.spec
        self.u_s = shear.u_s.samples
        self.d1 = shear.d_y_u_s.samples
        self.ell = ell
        self.extension = extension

    def Dt(self, a):
        return diff(a, self.spec.dt, 0, 1)

    def Dx(self, a):
        return dx_(a, self.spec)

    def Dy(self, a):
        return dy_(a, self.spec)

    def Dyy(self, a):
        return dy_(a, self.spec, 2)

    def S(self, a, th):
        return smooth_array(a, self.spec, th, self.extension)

    def P(self, p, v):
        """P(u_s + p, v); d_t u_s - d_y^2 u_s cancels analytically."""
        return self.Dt(p) + (self.u_s + p) * self.Dx(p) + v * (self.d1 + self.Dy(p)) - self.Dyy(p)

    def P_lin(self, pb, vb, du, dv):
        """P' at (u_s + pb, vb) applied to (du, dv)."""
        return (self.Dt(du) + (self.u_s + pb) * self.Dx(du) + vb * self.Dy(du) + du * self.Dx(pb)
                + dv * (self.d1 + self.Dy(pb)) - self.Dyy(du))

    def e1(self, du, dv):
        return du * self.Dx(du) + dv * self.Dy(du)

    def e2(self, p, v, du, dv, th):
        """Four-term mollification error with A = (1-S)p and V = (1-S)v."""
        A = p - self.S(p, th)
        V = v - self.S(v, th)
        return A * self.Dx(du) + du * self.Dx(A) + dv * self.Dy(A) + V * self.Dy(du)

    def e2_conservative(self, p, v, du, dv, th):
        """d_x(2 A du) + d_y(dv A + V du): equal to e2 up to the lattice divergence defect."""
        A = p - self.S(p, th)
        V = v - self.S(v, th)
        return self.Dx(2 * A * du) + self.Dy(dv * A + V * du)

    def norm0(self, a) -> float:
        return norm_A(Field(self.spec, a), 0, self.ell)


def sine_gauss(spec: GridSpec, eps: float, mode: int = 1) -> Field:
    """eps sin(2 pi mode x / L_x) y e^{-y^2}, as t-independent initial data."""
    x = spec.x[:, None]
    y = spec.y[None, :]
    return Field(spec, eps * np.sin(2 * math.pi * mode * x / spec.L_x) * y * np.exp(-y**2),
                 vanishes_at_wall=True)


def zeroth_approximation(u0_tilde: Field, shear, k0: int = 2, ops: PrandtlOps | None = None):
    """Taylor approximation in t built from the compatibility recursion.

    Returns (p0, v0, f_a) as arrays: u^0 = u_s + p0, v^0 = v0, f_a = P(u^0, v^0).
    """
    spec = shear.spec
    if u0_tilde.has_time:
        raise ValidationError("initial perturbation must be t-independent")
    if np.any(u0_tilde.samples[:, 0] != 0):
        raise ValidationError("initial perturbation must vanish at y = 0")
    if k0 not in (1, 2):
        raise ValidationError("k0 must be 1 or 2")
    ops = ops or PrandtlOps(shear)
    # d_y^(2k) u_s and d_y^(2k+1) u_s at t = 0, k = 0, 1
    even = [shear.u_s.samples[0], shear.d2_y_u_s.samples[0]]
    odd = [shear.d_y_u_s.samples[0], shear.d3_y_u_s.samples[0]]
    if np.any(odd[0] + dy_(u0_tilde.samples, spec) <= 0):
        raise ValidationError("total initial data is not increasing in y")
    Dx = lambda a: dx_(a, spec)
    Dy = lambda a: dy_(a, spec)
    ut = [np.array(u0_tilde.samples, dtype=float)]
    vt = [vertical_velocity(ut[0], spec)]
    for j in range(1, k0 + 1):
        nxt = dy_(ut[j - 1], spec, 2)
        for k in range(j):
            m = j - 1 - k
            total_k = even[k] + ut[k]
            nxt = nxt - comb(j - 1, k) * (total_k * Dx(ut[m]) + vt[k] * (odd[m] + Dy(ut[m])))
        nxt[:, 0] = 0.0
        ut.append(nxt)
        vt.append(vertical_velocity(nxt, spec))
    t = spec.t[:, None, None]
    p0 = sum(t**j / math.factorial(j) * ut[j][None] for j in range(k0 + 1))
    v0 = sum(t**j / math.factorial(j) * vt[j][None] for j in range(k0 + 1))
    p0 = np.broadcast_to(p0, spec.shape).copy()
    v0 = np.broadcast_to(v0, spec.shape).copy()
    return p0, v0, ops.P(p0, v0), ut


def source(n: int, ops: PrandtlOps, cfg: IterationConfig, f_a, e_hist) -> np.ndarray:
    """f^n from sum_{j<=n} f^j = -S_{theta_n}(sum_{j<n} e_j + f_a)."""
    th_n = theta(n, cfg.theta0)[0]
    if n == 0:
        return -ops.S(f_a, th_n)
    th_m = theta(n - 1, cfg.theta0)[0]
    older = sum(e_hist[:n - 1]) if n >= 2 else np.zeros_like(f_a)
    return (ops.S(older + f_a, th_m) - ops.S(older + f_a, th_n)) - ops.S(e_hist[n - 1], th_n)


def _rel(diff_norm, *scales):
    s = max(scales)
    return 0.0 if s == 0 else diff_norm / s


def iterate_once(state: IterationState, cfg: IterationConfig, ops: PrandtlOps) -> tuple[IterationState, dict]:
    spec = ops.spec
    shear = ops.shear
    n = state.n
    th, dth = theta(n, cfg.theta0)
    pb = ops.S(state.p, th)
    vb = ops.S(state.v, th)
    bg = assemble_background(Field(spec, shear.u_s.samples + pb), shear, v_tilde=Field(spec, vb),
                             perturbation=pb)
    f_n = source(n, ops, cfg, state.f_a, state.e_history)
    if cfg.inner_solver == "via_w":
        sol = solve_w(bg, Field(spec, f_n), cfg.ell)
        du, dv, w = sol.u.samples, sol.v.samples, sol.w.samples
    else:
        uf, vf = solve_uv_direct(bg, Field(spec, f_n))
        du, dv = uf.samples, vf.samples
        w = dy_(du / bg.d_y_u_tilde.samples, spec)
    e1 = ops.e1(du, dv)
    e2 = ops.e2(state.p, state.v, du, dv, th)
    e = e1 + e2
    p_new, v_new = state.p + du, state.v + dv

    P_old = ops.P(state.p, state.v)
    P_new = ops.P(p_new, v_new)
    lin = ops.P_lin(pb, vb, du, dv)
    identity = _rel(ops.norm0(P_new - P_old - lin - e), ops.norm0(P_new), ops.norm0(P_old),
                    ops.norm0(lin), ops.norm0(e))
    f_hist = state.f_history + [f_n]
    e_hist = state.e_history + [e]
    tele = sum(f_hist) + ops.S(sum(e_hist[:n]) + state.f_a if n else state.f_a, th)
    telescoping = _rel(ops.norm0(tele), ops.norm0(sum(f_hist)), ops.norm0(state.f_a))
    e2c = ops.e2_conservative(state.p, state.v, du, dv, th)

    record = {
        "n": n, "theta": th, "dtheta": dth,
        **{f"w_norm_{k}_{ell:g}": norm_A(Field(spec, w), k, ell) for k, ell in cfg.monitor_orders},
        "du_norm": norm_A(Field(spec, du), 1, cfg.ell),
        "dv_norm": norm_D(Field(spec, dv), 0, 0.0),
        "e_norm": ops.norm0(e),
        "residual": state.residual,
        "lambda3": lambda_diagnostic(bg, shear, 3, cfg.ell) if cfg.track_lambda else float("nan"),
        "identity_rel": identity,
        "telescoping_rel": telescoping,
        "e2_form_gap_rel": _rel(ops.norm0(e2 - e2c), ops.norm0(e2)),
        "source_norm": ops.norm0(f_n),
        # S_theta v is not exactly -int d_x S_theta p; report the defect of the mollified pair
        "mollified_div_rel": _rel(ops.norm0(ops.Dx(pb) + ops.Dy(vb)), ops.norm0(ops.Dx(pb))),
    }
    new = IterationState(n=n + 1, p=p_new, v=v_new, f_a=state.f_a, e_history=e_hist, f_history=f_hist,
                         delta_u=du, delta_v=dv, w=w, f=f_n, e1=e1, e2=e2,
                         residual=ops.norm0(P_new))
    return new, record


def initial_state(cfg: IterationConfig, shear, u0_tilde: Field, ops: PrandtlOps) -> IterationState:
    p0, v0, f_a, _ = zeroth_approximation(u0_tilde, shear, cfg.k0, ops)
    return IterationState(n=0, p=p0, v=v0, f_a=f_a, residual=ops.norm0(f_a))


def run(cfg: IterationConfig, shear, u0_tilde: Field) -> RunResult:
    start = time.perf_counter()
    ops = PrandtlOps(shear, cfg.ell, cfg.far_extension)
    state = initial_state(cfg, shear, u0_tilde, ops)
    trace = []
    outcome, message = "n_max", ""
    while state.n < cfg.n_max:
        if cfg.tolerance_residual > 0 and state.residual <= cfg.tolerance_residual:
            outcome = "tolerance"
            break
        try:
            state, record = iterate_once(state, cfg, ops)
        except NumericalGateError as exc:
            outcome, message = "gate", str(exc)
            break
        trace.append(record)
    else:
        if cfg.tolerance_residual > 0 and state.residual <= cfg.tolerance_residual:
            outcome = "tolerance"
    trace.append({"n": state.n, "residual": state.residual})
    return RunResult(state=state, trace=trace, outcome=outcome, message=message,
                     wall_time=time.perf_counter() - start)


def residual_history(result: RunResult) -> list[float]:
    return [r["residual"] for r in result.trace]


def stability_experiment(cfg: IterationConfig, shear, u0_a: Field, u0_b: Field) -> dict:
    """Solution difference over initial-data difference for two Nash-Moser runs.

    ratio = (|u1 - u2|_{A^0_ell} + |v1 - v2|_{D^0}) / |d_y((u0_1 - u0_2) / d_y u0_s)|_{A^0_ell}.
    """
    spec = shear.spec
    ra = run(cfg, shear, u0_a)
    rb = run(cfg, shear, u0_b)
    for r in (ra, rb):
        if r.outcome == "gate":
            raise NumericalGateError(f"stability run left the monotone regime: {r.message}")
    du = Field(spec, ra.state.p - rb.state.p)
    dv = Field(spec, ra.state.v - rb.state.v)
    num = norm_A(du, 0, cfg.ell) + norm_D(dv, 0, 0.0)
    d0 = (u0_a.samples - u0_b.samples) / shear.d_y_u_s.samples[0]
    den = norm_A(Field(spec, dy_(d0, spec)), 0, cfg.ell)
    ratio = 0.0 if den == 0 and num == 0 else (float("inf") if den == 0 else num / den)
    return {"ratio": ratio, "numerator": num, "denominator": den,
            "outcomes": (ra.outcome, rb.outcome), "residuals": (ra.state.residual, rb.state.residual)}


def decay_shape(trace: list, key: str, k_tilde: float) -> np.ndarray:
    """|w^n| / (theta_n^(1 - k_tilde) dtheta_n) along a trace."""
    rows = [r for r in trace if key in r]
    return np.array([r[key] / (r["theta"] ** (1 - k_tilde) * r["dtheta"]) for r in rows])
