"""Uniform (t, x, y) lattice, sampled fields and the finite-difference kernel.

Every other module computes on :class:`Field`. The x direction is periodic,
t and y are bounded and use one-sided second-order stencils at their ends.
Fields are immutable: the sample array is copied on construction and frozen.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import ValidationError

AXES = ("t", "x", "y")


@dataclass(frozen=True)
class GridSpec:
    T: float = 1.0
    Y: float = 12.0
    L_x: float = 2 * math.pi
    n_t: int = 32
    n_x: int = 32
    n_y: int = 128

    def __post_init__(self):
        for name in ("T", "Y", "L_x"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        for name, lo in (("n_t", 4), ("n_x", 4), ("n_y", 8)):
            n = getattr(self, name)
            if int(n) != n or n < lo:
                raise ValidationError(f"{name} must be an integer >= {lo}, got {n}")
        if not self.dy < 1.0:
            raise ValidationError(f"dy = {self.dy:.4g} must be < 1 to resolve the boundary layer")

    @property
    def dt(self) -> float:
        return self.T / (self.n_t - 1)

    @property
    def dx(self) -> float:
        return self.L_x / self.n_x

    @property
    def dy(self) -> float:
        return self.Y / (self.n_y - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.dx

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.Y, self.n_y)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_t, self.n_x, self.n_y)

    def mesh(self):
        """Broadcastable (t, x, y) coordinate arrays."""
        return (self.t[:, None, None], self.x[None, :, None], self.y[None, None, :])

    def spacing(self, axis: str) -> float:
        return {"t": self.dt, "x": self.dx, "y": self.dy}[axis]

    def replace(self, **changes) -> "GridSpec":
        d = asdict(self)
        d.update(changes)
        return GridSpec(**d)


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a scalar function on the lattice of ``spec``.

    ``samples`` has shape ``(n_t, n_x, n_y)``, or ``(n_x, n_y)`` for a field
    that does not depend on t (initial data). ``vanishes_at_wall`` and
    ``far_field`` record boundary claims; the former is enforced exactly.
    """

    spec: GridSpec
    samples: np.ndarray
    vanishes_at_wall: bool = False
    far_field: float | None = None

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        full = self.spec.shape
        if arr.shape not in (full, full[1:]):
            raise ValidationError(f"samples shape {arr.shape} does not match grid {full} or {full[1:]}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("field samples contain NaN or Inf")
        if self.vanishes_at_wall and np.any(arr[..., 0] != 0.0):
            raise ValidationError("field flagged as vanishing at y=0 has non-zero wall samples")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def has_time(self) -> bool:
        return self.samples.ndim == 3

    def axis_index(self, axis: str) -> int:
        if axis not in AXES:
            raise ValidationError(f"unknown axis {axis!r}")
        if not self.has_time:
            if axis == "t":
                raise ValidationError("field does not depend on t")
            return AXES.index(axis) - 1
        return AXES.index(axis)

    @classmethod
    def from_function(cls, spec: GridSpec, func, **meta) -> "Field":
        t, x, y = spec.mesh()
        return cls(spec, np.broadcast_to(func(t, x, y), spec.shape), **meta)

    @classmethod
    def zeros(cls, spec: GridSpec, has_time: bool = True) -> "Field":
        shape = spec.shape if has_time else spec.shape[1:]
        return cls(spec, np.zeros(shape), vanishes_at_wall=True)

    def at_time(self, index: int) -> "Field":
        return Field(self.spec, self.samples[index], vanishes_at_wall=self.vanishes_at_wall,
                     far_field=self.far_field)

    def with_samples(self, samples, **meta) -> "Field":
        return Field(self.spec, samples, **meta)

    def _binary(self, other, op):
        if isinstance(other, Field):
            if other.spec != self.spec:
                raise ValidationError("fields live on different grids")
            other = other.samples
        return Field(self.spec, op(self.samples, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return Field(self.spec, -self.samples, vanishes_at_wall=self.vanishes_at_wall)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))


# ---------------------------------------------------------------------------
# array-level stencils (used directly by the solvers for speed)

def diff(a: np.ndarray, h: float, axis: int, order: int = 1, periodic: bool = False) -> np.ndarray:
    """Second-order finite difference of ``a`` along ``axis``."""
    if order not in (1, 2):
        raise ValidationError(f"derivative order must be 1 or 2, got {order}")
    n = a.shape[axis]
    if periodic:
        if n < 3:
            raise ValidationError("periodic stencil needs at least 3 samples")
        if order == 1:
            return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)
        return (np.roll(a, -1, axis) - 2 * a + np.roll(a, 1, axis)) / h**2
    if n < order + 2:
        raise ValidationError(f"axis has {n} samples, below the stencil width {order + 2}")
    if order == 1:
        return np.gradient(a, h, axis=axis, edge_order=2)
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
    out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
    out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def fd_weights(offsets, m: int) -> np.ndarray:
    """Weights of the m-th derivative at 0 on the given integer offsets (Fornberg's recursion)."""
    z = np.asarray(offsets, dtype=float)
    n = z.size
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, z[0]
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, z[i]
        for j in range(i):
            c3 = z[i] - z[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def diff_n(a: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    """Direct second-order stencil for a derivative of any order on a bounded axis.

    Composing low-order stencils amplifies the one-sided boundary error by
    1/h^2 per composition, so high derivatives would diverge at the ends
    under refinement. Here interior rows use the central stencil of
    half-width ceil(order / 2) and the end rows shifted windows of order + 2
    points.
    """
    if order < 1:
        return np.array(a, copy=True)
    half = (order + 1) // 2
    width = max(2 * half + 1, order + 2)
    n = a.shape[axis]
    if n < width:
        raise ValidationError(f"axis has {n} samples, below the stencil width {width} for order {order}")
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a, dtype=float)
    central = fd_weights(np.arange(-half, half + 1), order) / h**order
    inner = slice(half, n - half)
    out[inner] = sum(w * a[half + o: n - half + o] for o, w in zip(range(-half, half + 1), central))
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - width // 2, 0), n - width)
        w = fd_weights(np.arange(start, start + width) - i, order) / h**order
        out[i] = np.tensordot(w, a[start:start + width], axes=1)
    return np.moveaxis(out, 0, axis)


def dt_(a, spec, order=1):
    return diff(a, spec.dt, 0, order)


def dx_(a, spec, order=1):
    return diff(a, spec.dx, a.ndim - 2, order, periodic=True)


def dy_(a, spec, order=1):
    return diff(a, spec.dy, a.ndim - 1, order)


def cumint_y(a: np.ndarray, spec: GridSpec) -> np.ndarray:
    return cumulative_trapezoid(a, dx=spec.dy, axis=-1, initial=0.0)


def integrate(a: np.ndarray, spec: GridSpec) -> float:
    """Trapezoid in t and y, periodic rectangle rule in x."""
    val = trapezoid(a, dx=spec.dy, axis=-1)
    val = val.sum(axis=-1) * spec.dx
    if a.ndim == 3:
        val = trapezoid(val, dx=spec.dt, axis=0)
    return float(val)


# ---------------------------------------------------------------------------
# Field-level operations

def derivative(f: Field, axis: str, order: int = 1) -> Field:
    ax = f.axis_index(axis)
    return Field(f.spec, diff(f.samples, f.spec.spacing(axis), ax, order, periodic=(axis == "x")))


def cumulative_integral_y(f: Field) -> Field:
    return Field(f.spec, cumint_y(f.samples, f.spec), vanishes_at_wall=True)


def integral_domain(f: Field, measure: str = "txy", t_index: int | None = None) -> float:
    """Integral over the domain, or over (x, y) at one time level."""
    if measure == "txy":
        return integrate(f.samples, f.spec)
    if measure == "xy_at_fixed_t":
        a = f.samples
        if f.has_time:
            if t_index is None:
                raise ValidationError("xy_at_fixed_t needs t_index for a time-dependent field")
            a = a[t_index]
        return integrate(a, f.spec)
    raise ValidationError(f"unknown measure {measure!r}")


# ---------------------------------------------------------------------------
# serialization

def write_field_csv(f: Field, path) -> Path:
    """CSV ``t,x,y,value`` (t slowest) plus a JSON sidecar holding the GridSpec."""
    path = Path(path)
    spec = f.spec
    a = f.samples if f.has_time else f.samples[None]
    tt = spec.t if f.has_time else np.zeros(1)
    T, X, Yy = np.meshgrid(tt, spec.x, spec.y, indexing="ij")
    table = np.column_stack([T.ravel(), X.ravel(), Yy.ravel(), a.ravel()])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header="t,x,y,value", comments="")
    sidecar = {"grid": asdict(spec), "has_time": f.has_time,
               "vanishes_at_wall": f.vanishes_at_wall, "far_field": f.far_field}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
    return path


def read_field_csv(path) -> Field:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    spec = GridSpec(**meta["grid"])
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, 3]
    shape = spec.shape if meta["has_time"] else spec.shape[1:]
    return Field(spec, values.reshape(shape), vanishes_at_wall=meta["vanishes_at_wall"],
                 far_field=meta["far_field"])
