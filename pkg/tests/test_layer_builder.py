import numpy as np
import pytest

from data.field_io import ArtifactWriter, surface_field_frame
from layer_builder.assembly import assemble_u4
from layer_builder.cutoffs import boundary_cutoff, chi0, gluing_cutoff, smooth_step, x_cutoff
from layer_builder.inner import TermRegistry, default_registry, inner_corrections
from layer_builder.params import build_params, unit_fields
from profile_1d.projected_ode import solve_projected_ode
from geometry.charts import builtin_chart
from utils.validators import DegenerateChartError, ValidationError


def test_smooth_step_and_cutoffs():
    assert smooth_step(-0.5) == 0.0
    assert smooth_step(1.5) == 1.0
    assert smooth_step(0.5) == pytest.approx(0.5)
    assert chi0(0.7) == 1.0
    assert chi0(2.1) == 0.0
    assert boundary_cutoff(0.1, 0.2) == 1.0
    assert boundary_cutoff(0.45, 0.2) == 0.0
    assert x_cutoff(0.0, 16.0) == 1.0
    assert x_cutoff(14.0, 16.0) == 0.0
    assert gluing_cutoff(0.25, 0.1) == 1.0
    assert gluing_cutoff(-0.7, 0.1) == 0.0


def test_unit_fields_meet_robin_conditions(robin_chart, layer_grid, unit_params):
    I = robin_chart.robin(layer_grid.theta)
    f2 = unit_params.boundary('f2')
    e = unit_params.boundary('e')
    assert np.max(np.abs(f2['d_rho'] + I * f2['value'])) < 1e-10
    assert np.max(np.abs(e['d_rho'] + 0.5 * I * e['value'])) < 1e-10


def test_unit_fields_reject_singular_coefficient(layer_grid):
    with pytest.raises(ValidationError):
        unit_fields(builtin_chart('synthetic-robin-disk', 4.0), layer_grid)


def test_zero_parameters(profile3, robin_chart, layer_grid):
    params = build_params(profile3, robin_chart, layer_grid, 'zero')
    assert not np.any(params.f0)
    assert not np.any(params.f1)
    assert params.source == 'zero'
    assert params.admissibility(0.05)['admissible']


def test_unit_parameters_have_negligible_f1(unit_params):
    # every d1 contribution is odd in x on a flat chart
    assert unit_params.diagnostics['max_abs_f1'] < 1e-10
    assert unit_params.b1 == pytest.approx(4.0 / 3.0, rel=1e-6)
    assert not unit_params.admissibility(0.05)['admissible']


def test_parameters_from_files(profile3, robin_chart, layer_grid, tmp_path):
    rr, tt = layer_grid.mesh()
    e = 0.1 * (1.0 + rr ** 2 * np.cos(tt))
    writer = ArtifactWriter(str(tmp_path), 'abc', '1.0')
    path = writer.write_csv('e.csv', surface_field_frame(layer_grid.r, layer_grid.theta, value=e))
    params = build_params(profile3, robin_chart, layer_grid, 'file', e_file=str(path))
    assert np.allclose(params.e, e)
    assert not np.any(params.f2)


def test_unknown_parameter_mode(profile3, robin_chart, layer_grid):
    with pytest.raises(ValidationError):
        build_params(profile3, robin_chart, layer_grid, 'random')


def test_degenerate_chart_rejected(profile3, ball_chart, layer_grid):
    with pytest.raises(DegenerateChartError):
        build_params(profile3, ball_chart, layer_grid, 'zero')


def test_registry_orders():
    registry = default_registry()
    assert registry.names(2) == ['curvature_shift']
    assert registry.names(3) == ['curvature_e', 'mean_curvature_drift']
    with pytest.raises(ValidationError):
        registry.register(4, 'quartic', lambda ctx: 0.0)


def test_inner_corrections_separate_variables(profile3, robin_chart, unit_params):
    inner = inner_corrections(profile3, robin_chart, unit_params)
    p = profile3.p
    quad = -0.5 * p * (p - 1.0) * profile3.w ** (p - 2.0) * profile3.Z ** 2
    Phi2 = solve_projected_ode(profile3, quad).phi
    e = unit_params.e
    assert np.allclose(inner.phi2, Phi2[:, None, None] * (e ** 2)[None], atol=1e-10)
    assert inner.orthogonality['phi2'] < 1e-8
    assert inner.orthogonality['phi3'] < 1e-8
    assert inner.multipliers['c2'] < 1e-8


def test_inner_solvability_enforced(profile3, robin_chart, unit_params):
    registry = TermRegistry()
    registry.register(2, 'translation', lambda ctx: ctx.profile.w_x[:, None, None] * np.ones(ctx.grid.shape)[None])
    with pytest.raises(ValidationError):
        inner_corrections(profile3, robin_chart, unit_params, registry)


def test_boundary_layer_constants(unit_solution, profile3):
    diag = unit_solution.layers.diagnostics
    assert diag['c0_closed_mean'] == pytest.approx(0.5 * profile3.moments['xwxZ'])
    assert diag['c0_closed_mean'] == pytest.approx(-0.3206, abs=1e-3)
    assert diag['c0_discrete_mean'] == pytest.approx(diag['c0_closed_mean'], rel=1e-2)
    assert diag['f2_robin_defect'] < 1e-9
    for i in (1, 2, 3):
        assert diag[f'data_residual_{i}'] < 1e-10
    with pytest.raises(ValidationError):
        unit_solution.layers.value(4, 0.0)


def test_approximation_shape_and_gluing(unit_solution, layer_grid):
    u = unit_solution.u4()
    assert u.shape == (unit_solution.x.size, layer_grid.n_r, layer_grid.n_theta)
    centre = unit_solution.x.size // 2
    assert np.allclose(unit_solution.glued()[centre], u[centre])
    assert not np.any(unit_solution.glued()[0])


def test_boundary_layers_reduce_boundary_residual(unit_solution):
    g0 = np.max(np.abs(unit_solution.boundary_residual(0)))
    g3 = np.max(np.abs(unit_solution.boundary_residual(3)))
    assert g3 < 0.1 * g0
    with pytest.raises(ValidationError):
        unit_solution.boundary_residual(4)


def test_positivity_and_tail(unit_solution):
    assert unit_solution.positivity()['positive']
    tail = unit_solution.tail_bound()
    assert np.isfinite(tail['C'])
    assert tail['rate'] == 0.9


def test_eps_changes_share_the_build(unit_solution):
    moved = unit_solution.with_eps(0.1)
    assert moved.eps == 0.1
    assert moved.inner is unit_solution.inner
    with pytest.raises(ValidationError):
        unit_solution.with_eps(0.5)


def test_frames_and_diagnostics(unit_solution, layer_grid):
    frame = unit_solution.centerline_frame()
    assert list(frame.columns) == ['x', 'r', 'theta', 'u4', 'phi2', 'phi3']
    assert len(frame) == unit_solution.x.size * layer_grid.n_r
    boundary = unit_solution.boundary_frame()
    assert {'D1', 'D2', 'D3', 'g'} <= set(boundary.columns)
    diag = unit_solution.diagnostics()
    assert diag['eps'] == 0.05
    assert set(diag['orthogonality']) == {'phi2', 'phi3'}


def test_assembly_argument_checks(profile3, robin_chart, unit_params):
    with pytest.raises(ValidationError):
        assemble_u4(profile3, robin_chart, unit_params, 0.05, sigma=0.0)
    with pytest.raises(ValidationError):
        assemble_u4(profile3, robin_chart, unit_params, 0.05, delta=0.6)
    with pytest.raises(ValidationError):
        assemble_u4(profile3, robin_chart, unit_params, 0.05, stride=3)
