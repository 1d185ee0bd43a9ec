import math

import numpy as np
import pytest

from prandtl_lab.errors import ValidationError
from prandtl_lab.grid import Field, GridSpec
from prandtl_lab.linearized import divergence
from prandtl_lab.nash_moser import (IterationConfig, PrandtlOps, decay_shape, residual_history, run, sine_gauss,
                                    source, stability_experiment, zeroth_approximation)
from prandtl_lab.norms import norm_A
from prandtl_lab.shear import ShearProfile, solve_heat_kernel

CFG = IterationConfig(theta0=100.0, track_lambda=False)


@pytest.fixture(scope="module")
def eps_run(nm_shear):
    return run(CFG, nm_shear, sine_gauss(nm_shear.spec, 0.01))


def test_zero_data_gives_zero_approximation(nm_shear):
    spec = nm_shear.spec
    p0, v0, f_a, _ = zeroth_approximation(Field.zeros(spec, has_time=False), nm_shear)
    assert np.all(p0 == 0) and np.all(v0 == 0) and np.all(f_a == 0)


def test_perturbation_source_is_small_and_starts_flat(nm_shear):
    spec = nm_shear.spec
    norms = []
    for eps in (0.01, 0.005):
        _, _, f_a, _ = zeroth_approximation(sine_gauss(spec, eps), nm_shear)
        norms.append(norm_A(Field(spec, f_a), 0, 1.0))
    assert norms[0] / norms[1] == pytest.approx(2.0, rel=0.1)
    _, _, f_a, _ = zeroth_approximation(sine_gauss(spec, 0.01), nm_shear)
    scale = np.max(np.abs(f_a))
    assert np.max(np.abs(f_a[0])) < 0.2 * scale


def test_first_recursion_step_matches_closed_form(nm_shear):
    spec = nm_shear.spec
    eps = 0.01
    _, _, _, ut = zeroth_approximation(sine_gauss(spec, eps), nm_shear, k0=1)
    X, Y = np.meshgrid(spec.x, spec.y, indexing="ij")
    k = 2 * math.pi / spec.L_x
    g = Y * np.exp(-Y**2)
    g_yy = (4 * Y**3 - 6 * Y) * np.exp(-Y**2)
    g_y = (1 - 2 * Y**2) * np.exp(-Y**2)
    u0 = eps * np.sin(k * X) * g
    v0 = -eps * k * np.cos(k * X) * (1 - np.exp(-Y**2)) / 2
    us = nm_shear.u_s.samples[0]
    d1 = nm_shear.d_y_u_s.samples[0]
    exact = (eps * np.sin(k * X) * g_yy
             - ((us + u0) * eps * k * np.cos(k * X) * g + v0 * (d1 + eps * np.sin(k * X) * g_y)))
    exact[:, 0] = 0.0
    err = np.max(np.abs(ut[1] - exact)[:, 1:-1])
    assert err < 0.05 * np.max(np.abs(exact))


def test_rejects_bad_initial_data(nm_shear):
    spec = nm_shear.spec
    with pytest.raises(ValidationError):
        zeroth_approximation(Field(spec, np.ones((spec.n_x, spec.n_y))), nm_shear)
    with pytest.raises(ValidationError):
        zeroth_approximation(sine_gauss(spec, 2.0), nm_shear)
    with pytest.raises(ValidationError):
        IterationConfig(theta0=2.0)


def test_exact_algebra_at_every_step(eps_run):
    records = [r for r in eps_run.trace if "identity_rel" in r]
    assert len(records) == CFG.n_max
    assert max(r["identity_rel"] for r in records) < 1e-10
    assert max(r["telescoping_rel"] for r in records) < 1e-10


def test_constraints_and_initial_data_preserved(eps_run, nm_shear):
    spec = nm_shear.spec
    s = eps_run.state
    assert np.all(s.p[..., 0] == 0) and np.all(s.v[..., 0] == 0)
    assert np.max(np.abs(divergence(s.p, s.v, spec))) < 1e-12
    np.testing.assert_allclose(s.p[0], sine_gauss(spec, 0.01).samples, atol=1e-14)


def test_residual_drops(eps_run):
    h = residual_history(eps_run)
    assert h[-1] < 0.2 * h[0]
    assert eps_run.outcome == "n_max"


def test_decay_shape_is_bounded(eps_run):
    shape = decay_shape(eps_run.trace[2:], "w_norm_1_1", 3.0)
    assert np.all(np.isfinite(shape))
    assert shape.max() / shape.min() < 10


def test_zero_perturbation_is_a_fixed_point(nm_shear):
    res = run(IterationConfig(eps=0.0, theta0=100.0, track_lambda=False), nm_shear,
              Field.zeros(nm_shear.spec, has_time=False))
    h = residual_history(res)
    assert len(h) == 9 and max(h) == 0.0
    assert all(r["du_norm"] == 0.0 for r in res.trace[:-1])


def test_tolerance_stops_early(nm_shear):
    res = run(IterationConfig(theta0=100.0, track_lambda=False, tolerance_residual=1.0), nm_shear,
              sine_gauss(nm_shear.spec, 0.01))
    assert res.outcome == "tolerance" and len(res.trace) == 1


def test_source_of_first_step_is_mollified_defect(nm_shear):
    spec = nm_shear.spec
    ops = PrandtlOps(nm_shear)
    _, _, f_a, _ = zeroth_approximation(sine_gauss(spec, 0.01), nm_shear)
    np.testing.assert_array_equal(source(0, ops, CFG, f_a, []), -ops.S(f_a, CFG.theta0))


def test_e2_forms_agree_under_refinement():
    gaps = []
    for n in (16, 32, 64):
        spec = GridSpec(T=0.25, Y=12.0, n_t=n, n_x=n, n_y=3 * n)
        ops = PrandtlOps(solve_heat_kernel(ShearProfile(), spec))
        t, x, y = spec.t[:, None, None], spec.x[None, :, None], spec.y[None, None, :]
        p = np.sin(x) * y * np.exp(-y**2) * (1 + t)
        v = -np.cos(x) * (1 - np.exp(-y**2)) / 2 * (1 + t)
        du, dv = 0.5 * p, 0.5 * v
        e2 = ops.e2(p, v, du, dv, 4.0)
        gaps.append(ops.norm0(e2 - ops.e2_conservative(p, v, du, dv, 4.0)) / ops.norm0(e2))
    assert gaps[0] > gaps[1] > gaps[2]


def test_stability_ratio(nm_shear):
    spec = nm_shear.spec
    same = stability_experiment(CFG, nm_shear, sine_gauss(spec, 0.01), sine_gauss(spec, 0.01))
    assert same["ratio"] == 0.0
    r1 = stability_experiment(CFG, nm_shear, sine_gauss(spec, 0.01), sine_gauss(spec, 0.005))["ratio"]
    r2 = stability_experiment(CFG, nm_shear, sine_gauss(spec, 0.005), sine_gauss(spec, 0.0025))["ratio"]
    assert 0 < r1 < np.inf and max(r1, r2) / min(r1, r2) < 2
    vs_shear = stability_experiment(CFG, nm_shear, sine_gauss(spec, 0.01), Field.zeros(spec, has_time=False))
    assert np.isfinite(vs_shear["ratio"]) and vs_shear["ratio"] > 0
