import numpy as np
import pytest

from prandtl_lab.errors import PicardError, ValidationError
from prandtl_lab.grid import Field, GridSpec
from prandtl_lab.manufactured import nonlinear_solution
from prandtl_lab.nash_moser import sine_gauss
from prandtl_lab.norms import norm_A
from prandtl_lab.oracle import OracleConfig, solve_nonlinear
from prandtl_lab.shear import ShearProfile, closed_form_erf, solve_heat_kernel


# the default form marches u - u_s and carries the shear exactly; the full form
# carries backward-Euler error O(dt) in the shear itself
@pytest.mark.parametrize("form, tol", [("perturbation", 1e-4), ("full", 5e-3)])
def test_pure_shear_is_reproduced(form, tol):
    spec = GridSpec()
    shear = solve_heat_kernel(ShearProfile(), spec)
    res = solve_nonlinear(Field.zeros(spec, has_time=False), shear, OracleConfig(form=form))
    T, Y = np.meshgrid(spec.t, spec.y, indexing="ij")
    assert np.max(np.abs(res.u.samples - closed_form_erf(T, Y)[:, None, :])) < tol
    assert np.max(np.abs(res.v.samples)) < 1e-12


def test_small_perturbation_converges_and_stays_monotone(nm_shear):
    res = solve_nonlinear(sine_gauss(nm_shear.spec, 0.01), nm_shear)
    # the first step has no history to extrapolate from and takes one extra sweep
    assert res.picard_counts[0] <= 5
    assert res.picard_counts[1:].max() <= 4
    assert np.max(np.abs(res.u.samples[..., 0])) < 1e-14
    # check_monotone is on by default, so reaching here means d_y u > 0 on the lattice


def test_manufactured_solution_converges():
    errs, dts = [], []
    for n in (16, 32):
        spec = GridSpec(T=1.0, Y=12.0, n_t=n, n_x=n, n_y=4 * n)
        shear = solve_heat_kernel(ShearProfile(), spec)
        u, _, f = nonlinear_solution(spec)
        u0 = Field(spec, u.samples[0] - shear.u_s.samples[0])
        res = solve_nonlinear(u0, shear, OracleConfig(check_monotone=False), forcing=f)
        errs.append(norm_A(res.u - u, 0, 0.0) / norm_A(u - shear.u_s, 0, 0.0))
        dts.append(spec.dt)
    order = np.log(errs[0] / errs[1]) / np.log(dts[0] / dts[1])
    assert order >= 0.9


def test_picard_failure_names_the_step(nm_shear):
    with pytest.raises(PicardError) as info:
        solve_nonlinear(sine_gauss(nm_shear.spec, 0.01), nm_shear, OracleConfig(picard_max=1, picard_tol=1e-14))
    assert info.value.step == 1


def test_config_and_data_validation(nm_shear):
    with pytest.raises(ValidationError):
        OracleConfig(picard_max=0)
    with pytest.raises(ValidationError):
        OracleConfig(form="conservative")
    with pytest.raises(ValidationError):
        solve_nonlinear(nm_shear.u_s, nm_shear)
