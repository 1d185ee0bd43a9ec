import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prandtl_lab.errors import MonotonicityError, ValidationError
from prandtl_lab.grid import Field, GridSpec
from prandtl_lab.linearized import assemble_background, shear_background
from prandtl_lab.nash_moser import sine_gauss
from prandtl_lab.norms import (index_set, morse_check, norm_A, norm_A_dot, norm_B, norm_C, norm_D, norm_Linf,
                               norm_report, lambda_diagnostic, seminorm_terms)
from prandtl_lab.shear import ShearFlow

SPEC = GridSpec(T=1.0, Y=4.0, L_x=2 * math.pi, n_t=9, n_x=8, n_y=33)


def smooth_field(rng, spec=SPEC):
    a, b, c = rng.normal(size=3)
    kx = int(rng.integers(1, 3))
    return Field.from_function(spec, lambda t, x, y: (a + b * t) * np.sin(kx * x + c) * np.exp(-(y - 1) ** 2)
                               + 0.3 * a * np.exp(-y) * (1 + t**2))


def test_index_set():
    assert index_set(0) == [(0, 0)]
    assert set(index_set(1)) == {(0, 0), (0, 1), (0, 2), (1, 0)}
    assert (0, 0) not in index_set(2, homogeneous=True)


def test_zero_field_has_zero_norms():
    z = Field.zeros(SPEC)
    for k in range(3):
        assert norm_A(z, k, 1.0) == norm_C(z, k, 1.0) == norm_D(z, k, 1.0) == 0.0
        assert norm_B(z, k, 2, 1.0, 1.0) == 0.0


def test_constant_field_examples():
    one = Field(SPEC, np.ones(SPEC.shape))
    assert norm_A(one, 0, 0.0) == pytest.approx(math.sqrt(SPEC.T * SPEC.L_x * SPEC.Y), rel=1e-12)
    assert norm_D(one, 0, 0.0) == pytest.approx(math.sqrt(SPEC.T * SPEC.L_x), rel=1e-12)
    assert norm_C(one, 0, 0.0) == pytest.approx(math.sqrt(SPEC.Y), rel=1e-12)


def test_exponential_profile_against_closed_form():
    spec = GridSpec(T=1.0, Y=12.0, n_t=5, n_x=8, n_y=2049)
    f = Field.from_function(spec, lambda t, x, y: np.exp(-y) + 0 * t + 0 * x)
    # k = 1 keeps y-orders 0, 1, 2; each contributes int_0^Y e^{-2y}
    exact = math.sqrt(3 * spec.T * spec.L_x * 0.5 * (1 - math.exp(-2 * spec.Y)))
    assert norm_A(f, 1, 0.0) == pytest.approx(exact, rel=1e-3)


def test_damping_cancels_growth():
    f = Field.from_function(SPEC, lambda t, x, y: np.exp(t) + 0 * x + 0 * y)
    assert norm_B(f, 0, 0, 1.0, 0.0) == pytest.approx(math.sqrt(SPEC.T * SPEC.L_x * SPEC.Y), rel=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_A_decomposes_into_B_pieces(k):
    f = smooth_field(np.random.default_rng(k))
    # A^k is the union of the rectangles m <= k - j, q <= 2j; consecutive ones overlap in m <= k-j-1, q <= 2j
    total = sum(norm_B(f, k - j, 2 * j, 0.0, 1.0) ** 2 for j in range(k + 1))
    total -= sum(norm_B(f, k - j - 1, 2 * j, 0.0, 1.0) ** 2 for j in range(k))
    assert norm_A(f, k, 1.0) ** 2 == pytest.approx(total, rel=1e-12)
    assert norm_A(f, k, 1.0) ** 2 == pytest.approx(sum(seminorm_terms(f, k, 1.0).values()), rel=1e-14)


def test_rejects_unsupported_order():
    with pytest.raises(ValidationError):
        norm_A(Field.zeros(SPEC), 4, 0.0)
    with pytest.raises(ValidationError):
        norm_A(Field.zeros(SPEC), 1, 0.0, mode="median")


NORMS = [
    lambda f: norm_A(f, 2, 1.0),
    lambda f: norm_A_dot(f, 1, 0.5),
    lambda f: norm_B(f, 1, 2, 0.7, 1.0),
    lambda f: norm_C(f, 1, 1.0),
    lambda f: norm_D(f, 1, 1.0),
    lambda f: norm_Linf(f, 1.0),
]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**20), c=st.just(0.0) | st.floats(1e-3, 10) | st.floats(-10, -1e-3))
def test_homogeneity_and_triangle(seed, c):
    rng = np.random.default_rng(seed)
    f, g = smooth_field(rng), smooth_field(rng)
    for norm in NORMS:
        nf = norm(f)
        assert norm(c * f) == pytest.approx(abs(c) * nf, rel=1e-12, abs=1e-300)
        assert norm(f + g) <= nf + norm(g) + 1e-12 * (nf + norm(g))


def test_monotone_in_k_and_ell():
    rng = np.random.default_rng(5)
    for _ in range(5):
        f = smooth_field(rng)
        vals = [norm_A(f, k, 1.0) for k in range(4)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        pos = Field(SPEC, np.abs(f.samples))
        assert norm_A(pos, 1, 0.5) <= norm_A(pos, 1, 1.0) <= norm_A(pos, 1, 2.0)


def test_max_mode_is_below_sum_mode():
    f = smooth_field(np.random.default_rng(2))
    assert norm_A(f, 2, 1.0, mode="max") <= norm_A(f, 2, 1.0)


def test_C_embeds_into_A_two_orders_up():
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(20):
        f = smooth_field(rng)
        ratios.append([norm_C(f, k, 1.0) / norm_A(f, k + 2, 1.0) for k in (0, 1)])
    ratios = np.array(ratios)
    assert np.all(np.isfinite(ratios))
    # one constant covers the corpus; the spread stays within an order of magnitude
    assert ratios.max() / ratios.min() < 10


def test_report_json_shape():
    f = smooth_field(np.random.default_rng(3))
    data = json.loads(norm_report(f, 1, 1.0, lam=0.5).to_json())
    assert set(data) == {"A", "B", "C", "D", "A_dot", "C_dot", "D_dot", "Linf_ell"}
    assert data["A"]["k"] == 1 and data["B"]["lambda"] == 0.5
    assert all(v["value"] >= 0 for v in data.values())


def test_lambda_diagnostic_on_pure_shear(small_shear):
    bg = shear_background(small_shear)
    lam = lambda_diagnostic(bg, small_shear, 2, 1.0)
    expected = norm_C(small_shear.u_s, 2, 0.0) + norm_C(bg.eta_bar, 2, 0.0)
    assert lam == pytest.approx(expected, rel=1e-12)


def test_lambda_diagnostic_needs_monotone_shear():
    spec = GridSpec(Y=4.0, n_t=5, n_x=4, n_y=17)
    zeros = np.zeros((spec.n_t, spec.n_y))
    flat = ShearFlow.from_samples(spec, zeros, zeros, zeros, zeros)
    with pytest.raises((ValidationError, MonotonicityError)):
        lambda_diagnostic(shear_background(flat), flat, 1, 1.0)


def _perturbed(shear, eps):
    spec = shear.spec
    pert = sine_gauss(spec, eps)
    u = Field(spec, shear.u_s.samples + pert.samples[None])
    return assemble_background(u, shear, perturbation=np.broadcast_to(pert.samples, spec.shape))


def test_lambda_diagnostic_perturbed_shear_is_close_at_first_order(small_shear):
    base = lambda_diagnostic(shear_background(small_shear), small_shear, 1, 1.0)
    moved = lambda_diagnostic(_perturbed(small_shear, 0.01), small_shear, 1, 1.0)
    assert np.isfinite(moved)
    assert abs(moved - base) / base < 0.1


@pytest.mark.xfail(strict=True, reason="the third-order terms of zeta and eta - eta_bar alone are about twice the "
                                       "pure-shear value for this perturbation, even when evaluated from closed forms")
def test_lambda_diagnostic_perturbed_shear_is_close_at_third_order(small_shear):
    base = lambda_diagnostic(shear_background(small_shear), small_shear, 3, 1.0)
    moved = lambda_diagnostic(_perturbed(small_shear, 0.01), small_shear, 3, 1.0)
    assert np.isfinite(moved)
    assert abs(moved - base) / base < 0.1
