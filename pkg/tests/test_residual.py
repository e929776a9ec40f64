import numpy as np
import pytest

from layer_builder.assembly import assemble_u4
from layer_builder.params import build_params
from residual.norms import WeightedNorm, weighted_norm
from residual.operator import apply_operator_S, boundary_region_residual, interior_rows
from residual.scaling import (
    fitted_slope, gluing_defect, lipschitz_quotients, project_residual, scaling_scan,
)
from surface_spectrum.solvers import full_spectrum
from utils.validators import ResonanceError, ValidationError

SWEEP = (0.02, 0.03, 0.05, 0.08, 0.12)


@pytest.fixture(scope='module')
def zero_solution(profile3, robin_chart, layer_grid):
    params = build_params(profile3, robin_chart, layer_grid, 'zero')
    return assemble_u4(profile3, robin_chart, params, 0.05)


@pytest.fixture(scope='module')
def unit_scan(unit_solution, robin_chart, layer_grid):
    rhos = full_spectrum(robin_chart, 0.5, layer_grid)
    return scaling_scan(unit_solution, SWEEP, WeightedNorm(), rhos)


def test_weighted_norm_sup():
    x = np.linspace(-16.0, 16.0, 3201)
    value = weighted_norm(np.exp(-np.abs(x)), x, WeightedNorm())
    # the sup sits at |x| = 1, where the unit window first reaches x = 0
    assert value == pytest.approx(np.exp(0.005), rel=1e-9)


def test_weighted_norm_finite_q():
    x = np.linspace(-16.0, 16.0, 3201)
    field = np.ones((x.size, 3))
    value = weighted_norm(field, x, WeightedNorm(q=6.0))
    assert value == pytest.approx(8.0 ** (1.0 / 6.0) * np.exp(0.005 * 15.0), rel=1e-9)
    assert weighted_norm(np.zeros((x.size, 3)), x, WeightedNorm(q=6.0)) == 0.0


@pytest.mark.parametrize('spec', [WeightedNorm(q=4.0), WeightedNorm(varrho=0.02), WeightedNorm(varrho=0.0)])
def test_weighted_norm_parameter_ranges(spec):
    with pytest.raises(ValidationError):
        spec.validate()


def test_weighted_norm_shape_check():
    x = np.linspace(-1.0, 1.0, 11)
    with pytest.raises(ValidationError):
        weighted_norm(np.ones(12), x, WeightedNorm())


def test_projection_of_kernel_fields(profile3):
    residual = np.stack([2.0 * profile3.w_x + 3.0 * profile3.Z, profile3.Z], axis=1)
    c, d = project_residual(residual, profile3.x, profile3.w_x, profile3.Z, profile3.moments['sigma1'])
    assert np.allclose(c, [2.0, 0.0], atol=1e-10)
    assert np.allclose(d, [3.0, 1.0], atol=1e-10)


def test_fitted_slope():
    eps = np.array(SWEEP)
    assert fitted_slope(eps, 5.0 * eps ** 2) == pytest.approx(2.0)
    assert np.isnan(fitted_slope(eps, eps - 0.05))


def test_zero_parameters_solve_exactly(zero_solution):
    res = apply_operator_S(zero_solution)
    assert np.max(np.abs(res.S)) < 1e-10
    assert not np.any(res.E11)
    assert res.rows.size == interior_rows(zero_solution).size > 0


def test_interior_split(unit_solution):
    res = apply_operator_S(unit_solution)
    assert np.allclose(res.S, res.E11 + res.E12)
    assert res.weights.shape == res.S.shape[1:]


def test_boundary_region_residual(unit_solution):
    out = boundary_region_residual(unit_solution, [0.0, 1.0, 4.0])
    assert set(out) == {0.0, 1.0, 4.0}
    assert all(np.isfinite(v) for v in out.values())


def test_scaling_slopes(unit_scan):
    slopes = unit_scan.slopes
    assert slopes['E11'] == pytest.approx(1.0, abs=0.05)
    assert 3.5 < slopes['E12'] < 4.5
    assert slopes['g0'] == pytest.approx(1.0, abs=0.1)
    # each boundary layer removes one power of eps from g
    assert slopes['g1'] == pytest.approx(2.0, abs=0.4)
    assert slopes['g2'] == pytest.approx(3.0, abs=0.4)
    assert slopes['g3'] == pytest.approx(4.0, abs=0.4)
    assert slopes['g'] == slopes['g3']
    assert slopes['d_remainder'] >= 3.5
    assert unit_scan.eps == sorted(SWEEP)


def test_scan_tables(unit_scan):
    frame = unit_scan.to_frame()
    assert len(frame) == len(SWEEP)
    assert {'E11', 'E12', 'g0', 'g3', 'd_rel_error', 'c_remainder'} <= set(frame.columns)
    # the Z-projection is the E11 profile up to higher order
    assert frame['d_rel_error'].max() < 0.1
    report = unit_scan.to_dict()
    assert set(report) == {'eps', 'slopes', 'flags'}


def test_scan_needs_three_points(unit_solution):
    with pytest.raises(ValidationError):
        scaling_scan(unit_solution, (0.02, 0.05))


def test_scan_refuses_resonant_eps(unit_solution):
    with pytest.raises(ResonanceError):
        scaling_scan(unit_solution, SWEEP, rhos=np.array([3.0 / 0.05 ** 2]))


def test_gluing_defect_monotone_in_sigma(unit_solution):
    defect = gluing_defect(unit_solution)
    assert defect['minus'] >= defect['base'] >= defect['plus'] >= 0.0
    assert defect['base'] < 0.05


def test_lipschitz_quotients(unit_solution):
    quotients = lipschitz_quotients(unit_solution)
    assert set(quotients) == {'f2', 'e'}
    assert all(np.isfinite(v) and v > 0 for v in quotients.values())
