import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from prandtl_lab.errors import MonotonicityError, ValidationError
from prandtl_lab.experiments import MOLLIFIER_GRID
from prandtl_lab.grid import Field, GridSpec
from prandtl_lab.mollifier import (commutator_weighted, delta_theta_sum, rho, smooth, smooth_difference,
                                   smoothing_matrices, theta)
from prandtl_lab.norms import norm_A

SPEC = GridSpec(T=1.0, Y=2.0, L_x=1.0, n_t=17, n_x=16, n_y=33)


def packet(spec, k=1, seed=0):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0, 2 * math.pi, 2)
    return Field.from_function(spec, lambda t, x, y: np.cos(2 * math.pi * k * x / spec.L_x + a + t)
                               * np.exp(-((y - spec.Y / 2) / (spec.Y / 5)) ** 2) * (1 + 0.3 * np.sin(t + b)))


def test_rho_is_a_unit_mass_bump():
    s = np.linspace(-1.5, 1.5, 3001)
    r = rho(s)
    assert np.all(r >= 0) and np.all(r[np.abs(s) >= 1] == 0)
    assert quad(lambda v: float(rho(v)), -1, 1, epsabs=1e-14)[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.isfinite(np.gradient(np.gradient(r, s), s)))


def test_theta_schedule_examples():
    th, dth = theta(0, 10.0)
    assert th == 10.0 and dth == pytest.approx(math.sqrt(101) - 10, abs=1e-15)
    assert theta(21, 10.0)[0] == pytest.approx(11.0, abs=1e-14)
    d = [theta(n, 10.0)[1] for n in range(101)]
    assert all(a > b > 0 for a, b in zip(d, d[1:]))
    with pytest.raises(ValidationError):
        theta(-1, 10.0)


def test_zero_maps_to_zero():
    z = Field.zeros(SPEC)
    assert np.all(smooth(z, 8.0).samples == 0)
    assert np.all(smooth_difference(z, 3, 8.0).samples == 0)


def test_rows_are_nonnegative_and_sum_to_one():
    for M in smoothing_matrices(SPEC, 8.0):
        assert np.all(M >= -1e-15)
        np.testing.assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)


def test_zero_extension_loses_mass_only_near_the_far_ends():
    Mt, _, My = smoothing_matrices(SPEC, 8.0, "zero")
    for M, h in ((Mt, SPEC.dt), (My, SPEC.dy)):
        rows = M.sum(axis=1)
        far = int(math.ceil(2 / 8.0 / h)) + 1
        np.testing.assert_allclose(rows[:-far], 1.0, atol=1e-12)
        assert rows[-1] < 1


def test_constant_is_reproduced():
    c = Field(SPEC, np.full(SPEC.shape, 2.5))
    np.testing.assert_allclose(smooth(c, 8.0).samples, 2.5, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**16), shift=st.integers(0, 15), th=st.sampled_from([4.0, 8.0]))
def test_contraction_linearity_and_x_commutation(seed, shift, th):
    rng = np.random.default_rng(seed)
    f = Field(SPEC, rng.normal(size=SPEC.shape))
    g = Field(SPEC, rng.normal(size=SPEC.shape))
    sf = smooth(f, th).samples
    assert np.max(np.abs(sf)) <= np.max(np.abs(f.samples)) * (1 + 1e-12)
    np.testing.assert_allclose(smooth(2 * f - g, th).samples, 2 * sf - smooth(g, th).samples, atol=1e-12)
    rolled = Field(SPEC, np.roll(f.samples, shift, axis=1))
    np.testing.assert_allclose(smooth(rolled, th).samples, np.roll(sf, shift, axis=1), atol=1e-12)


def test_telescoping_of_differences():
    f = packet(SPEC, 2)
    total = sum((smooth_difference(f, m, 6.0) for m in range(1, 9)), Field.zeros(SPEC))
    expected = smooth(f, theta(8, 6.0)[0]) - smooth(f, 6.0)
    np.testing.assert_allclose(total.samples, expected.samples, atol=1e-13)
    with pytest.raises(ValidationError):
        smooth_difference(f, 0, 6.0)


def test_approximation_error_halves_when_theta_doubles():
    f = packet(MOLLIFIER_GRID, 1)
    e16 = norm_A(f - smooth(f, 16.0), 0, 0.0)
    e32 = norm_A(f - smooth(f, 32.0), 0, 0.0)
    assert e16 / e32 == pytest.approx(2.0, rel=0.25)


def test_under_resolved_kernel_warns():
    with pytest.warns(UserWarning, match="kernel width"):
        smoothing_matrices(SPEC, 100.0)
    with pytest.raises(ValidationError):
        smoothing_matrices(SPEC, 8.0, "mirror")


def test_commutators_vanish_on_zero_and_need_monotone_shear(small_shear):
    z = Field.zeros(small_shear.spec)
    for variant in ("c1", "c2"):
        assert np.all(commutator_weighted(z, small_shear, 4.0, variant).samples == 0)
    with pytest.raises(ValidationError):
        commutator_weighted(z, small_shear, 4.0, "c3")
    flat = type(small_shear).from_samples(small_shear.spec, *(np.zeros((small_shear.spec.n_t, small_shear.spec.n_y)),) * 4)
    with pytest.raises(MonotonicityError):
        commutator_weighted(z, flat, 4.0)


@pytest.mark.parametrize("power", [0, 1, 3])
def test_delta_theta_sum_growth_regime(power):
    for j in (1, 10, 50, 200):
        total, bound = delta_theta_sum(10.0, j, power)
        assert total <= 2 * bound


@pytest.mark.parametrize("power", [-2, -3, -5])
def test_delta_theta_sum_decay_regime(power):
    for j in (1, 10, 50, 200):
        total, bound = delta_theta_sum(10.0, j, power)
        assert total <= 2 * bound


def test_delta_theta_sum_rejects_gap_powers():
    with pytest.raises(ValidationError):
        delta_theta_sum(10.0, 5, -1)
