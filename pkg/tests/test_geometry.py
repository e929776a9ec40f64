import numpy as np
import pytest

from geometry.charts import (
    builtin_chart, chart_from_spec, constant_coefficients, isothermal_residual, principal_curvatures,
    robin_coefficient,
)
from geometry.domains import builtin_domain, cylinder_sdf, tilted_sphere_sdf, unit_ball_sdf
from geometry.fermi import (
    FermiMap, boundary_metric_coeffs, boundary_table, check_orthogonal_intersection, coefficient_names,
    fermi_point, fermi_remainder_ratios, geometry_report,
)
from utils.validators import ValidationError

THETAS = np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False)


def test_ball_robin_coefficient_is_one(ball_chart):
    assert np.allclose(robin_coefficient(ball_chart, THETAS), 1.0, atol=1e-5)


def test_synthetic_chart_uses_override(robin_chart):
    assert np.allclose(robin_chart.robin(THETAS), 0.5)
    assert constant_coefficients(robin_chart) == (1.0, 0.5)


def test_rescaled_chart_scales_coefficients(robin_chart):
    scaled = robin_chart.rescaled(2.0)
    assert np.allclose(scaled.robin(THETAS), 0.25)
    assert scaled.area == pytest.approx(4.0 * np.pi)
    fields = scaled.fields_on(np.array([0.5]), THETAS)
    assert np.allclose(fields['hslash'], 2.0)
    with pytest.raises(ValidationError):
        robin_chart.rescaled(0.0)


def test_flat_chart_curvatures(ball_chart):
    y1, y2 = np.meshgrid(np.linspace(-0.9, 0.9, 7), np.linspace(-0.3, 0.3, 3))
    k1, k2 = principal_curvatures(ball_chart, y1, y2)
    assert np.max(np.abs(k1)) < 1e-8
    assert np.max(np.abs(k2)) < 1e-8
    assert isothermal_residual(ball_chart, y1, y2) < 1e-8


def test_chart_spec_parsing():
    assert chart_from_spec('equatorial-disk-in-ball').name == 'equatorial-disk-in-ball'
    assert np.allclose(chart_from_spec('synthetic-robin-disk:1.5').robin(THETAS), 1.5)
    with pytest.raises(ValidationError):
        chart_from_spec('catenoid')
    with pytest.raises(ValidationError):
        builtin_chart('synthetic-robin-disk')


def test_ball_boundary_coefficients(ball_chart):
    coeffs = boundary_metric_coeffs(ball_chart, 0.3)
    assert coeffs.l1 == pytest.approx(1.0, abs=1e-6)
    assert coeffs.l2 == pytest.approx(1.0, abs=1e-6)
    assert coeffs.I == pytest.approx(1.0, abs=1e-5)
    table = boundary_table(ball_chart, 8)
    assert list(table.columns) == ['theta', *coefficient_names()]
    assert len(table) == 8


def test_fermi_point_domain_checks(ball_chart):
    fmap = FermiMap(ball_chart)
    point = fermi_point(fmap, 0.1, np.array([0.5, 0.0]))
    assert np.allclose(point, [0.5 * np.sqrt(0.99), 0.0, 0.1])
    with pytest.raises(ValidationError):
        fermi_point(fmap, 0.6, np.array([0.0, 0.0]))
    with pytest.raises(ValidationError):
        fermi_point(fmap, 0.1, np.array([1.2, 0.0]))


def test_fermi_remainder_is_quartic(ball_chart):
    ratios = fermi_remainder_ratios(FermiMap(ball_chart), np.array([0.5, 0.0]), [0.2, 0.1, 0.05])
    # sqrt(1 - r^2) = 1 - r^2/2 - r^4/8 - ...: the ratio tends to |y|/8
    assert ratios[-1] == pytest.approx(0.5 / 8.0, rel=0.05)


def test_orthogonal_intersection(ball_chart, robin_chart):
    assert check_orthogonal_intersection(FermiMap(ball_chart), unit_ball_sdf, 32) < 1e-8
    assert check_orthogonal_intersection(FermiMap(robin_chart), cylinder_sdf, 32) < 1e-8


def test_tilted_sphere_deviation_equals_angle(ball_chart):
    deviation = check_orthogonal_intersection(FermiMap(ball_chart), tilted_sphere_sdf(0.1), 32)
    assert deviation == pytest.approx(0.1, abs=1e-6)
    with pytest.raises(ValidationError):
        tilted_sphere_sdf(2.0)


def test_builtin_domain_lookup():
    assert builtin_domain('equatorial-disk-in-ball') is unit_ball_sdf
    assert builtin_domain('synthetic-robin-disk:0.5') is cylinder_sdf
    with pytest.raises(ValidationError):
        builtin_domain('torus')


@pytest.mark.parametrize('name', ['equatorial-disk-in-ball', 'synthetic-robin-disk:0.5'])
def test_geometry_report_passes(name):
    chart = chart_from_spec(name)
    checker = geometry_report(FermiMap(chart), builtin_domain(chart.name), samples=16)
    assert checker.all_passed, checker.generate_report()
