from dataclasses import replace
from unittest.mock import MagicMock

import numpy as np
import pytest

from geometry.charts import builtin_chart, constant_coefficients
from surface_spectrum import solvers
from surface_spectrum.bessel import mode_eigenvalues, robin_disk_eigenvalues, smallest_magnitude
from surface_spectrum.robin_operator import (
    PolarGrid, RobinOperatorDisc, boundary_derivative, boundary_value, collar_fields, polar_laplacian,
)
from surface_spectrum.solvers import (
    full_spectrum, min_gap, nondegeneracy_check, require_nondegenerate, rho_spectrum, solve_coupled_system,
    solve_e_equation, solve_f_equation, weyl_fit,
)
from utils.validators import DegenerateChartError, ResonanceError, ValidationError

GRID = PolarGrid(64, 32)


def test_neumann_disk_oracle():
    rhos = robin_disk_eigenvalues(0.0, 4)
    assert rhos[0] == 0.0
    # s J_1'(s) = 0 at s = 1.84118...
    assert rhos[1] == pytest.approx(1.841183781 ** 2, rel=1e-8)
    assert rhos[2] == pytest.approx(rhos[1])


def test_negative_robin_mode():
    rho = mode_eigenvalues(0, 0.25, 5.0)[0]
    assert rho == pytest.approx(-0.531, abs=0.01)
    assert mode_eigenvalues(1, 1.0, 5.0)[0] == 0.0


def test_smallest_magnitude_finds_harmonic():
    rho, m = smallest_magnitude(2.0)
    assert rho == 0.0
    assert m == 2


def test_oracle_rejects_empty_count():
    with pytest.raises(ValidationError):
        robin_disk_eigenvalues(0.5, 0)


def test_polar_grid_validation():
    with pytest.raises(ValidationError):
        PolarGrid(32, 15)
    assert GRID.coarsened().shape == (32, 32)


def test_polar_laplacian_exact_on_quadratics():
    rr, tt = GRID.mesh()
    assert np.allclose(polar_laplacian(rr ** 2, GRID), 4.0, atol=1e-9)
    assert np.allclose(polar_laplacian(np.ones(GRID.shape), GRID), 0.0, atol=1e-9)


def test_boundary_extrapolation_exact_on_quadratics():
    rr, _ = GRID.mesh()
    f = 1.0 + 0.5 * rr + 2.0 * rr ** 2
    assert np.allclose(boundary_value(f), 3.5)
    assert np.allclose(boundary_derivative(f, GRID), 4.5)
    assert np.allclose(collar_fields(f, GRID)['d_rho'], -4.5)


def test_rho_spectrum_matches_bessel(robin_chart):
    spectrum = rho_spectrum(robin_chart, 12, 0.5, GRID)
    oracle = robin_disk_eigenvalues(0.25, 12)
    assert spectrum.eigenvalues[0] < 0
    scale = np.maximum(np.abs(oracle), 1.0)
    assert np.max(np.abs(spectrum.eigenvalues - oracle) / scale) < 1e-2


def test_rho_spectrum_converges_to_bessel(robin_chart):
    spectrum = rho_spectrum(robin_chart, 6, 0.5, PolarGrid(128, 32))
    oracle = robin_disk_eigenvalues(0.25, 6)
    scale = np.maximum(np.abs(oracle), 1.0)
    assert np.max(np.abs(spectrum.eigenvalues - oracle) / scale) < 1e-3


def test_rho_spectrum_eigenfields_normalised(robin_chart):
    spectrum = rho_spectrum(robin_chart, 6, 0.5, GRID)
    disc = RobinOperatorDisc(robin_chart, GRID, robin_weight=0.5, with_potential=False)
    fields = spectrum.eigenfields()
    gram = np.array([[disc.inner(a, b) for b in fields] for a in fields])
    assert np.allclose(gram, np.eye(6), atol=1e-8)
    frame = spectrum.to_frame()
    assert list(frame.columns) == ['j', 'rho', 'm', 'kind']


def test_rho_spectrum_count_bounds(robin_chart):
    with pytest.raises(ValidationError):
        rho_spectrum(robin_chart, 0, 0.5, GRID)
    with pytest.raises(ValidationError):
        rho_spectrum(robin_chart, GRID.n_r * GRID.n_theta, 0.5, GRID)


def test_weyl_constant(robin_chart):
    spectrum = rho_spectrum(robin_chart, 100, 0.5, PolarGrid(64, 64))
    fit = weyl_fit(spectrum, robin_chart.area, robin_chart.perimeter())
    assert robin_chart.perimeter() == pytest.approx(2.0 * np.pi)
    assert fit.expected_constant == pytest.approx(4.0)
    assert fit.relative_error < 0.1
    assert fit.fitted_slope == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValidationError):
        weyl_fit(spectrum.eigenvalues[:10], robin_chart.area)


def test_nondegenerate_synthetic_chart(robin_chart):
    result = nondegeneracy_check(robin_chart, grid=PolarGrid(32, 16))
    assert result.verdict == 'nondegenerate'
    assert result.mode == 0
    # mu I_1(mu) = I_0(mu) / 2
    assert result.min_abs_eigenvalue == pytest.approx(1.137, abs=0.03)


def test_ball_chart_is_degenerate(ball_chart):
    result = nondegeneracy_check(ball_chart, grid=PolarGrid(32, 16))
    assert result.verdict == 'degenerate'
    assert result.mode == 1
    with pytest.raises(DegenerateChartError):
        require_nondegenerate(ball_chart, PolarGrid(32, 16))


def test_ball_chart_finite_difference_coefficients_count_as_axisymmetric(ball_chart):
    disc = RobinOperatorDisc(ball_chart, PolarGrid(64, 64), robin_weight=1.0, with_potential=True)
    assert disc.axisymmetric
    assert constant_coefficients(ball_chart) is not None


def test_ball_chart_degenerate_on_fine_grid(ball_chart):
    result = nondegeneracy_check(ball_chart, grid=PolarGrid(128, 256))
    assert result.verdict == 'degenerate'
    assert result.mode == 1
    assert result.min_abs_eigenvalue < 1e-3
    assert abs(result.extrapolated) < 1e-4


def test_robin_chart_nondegenerate_on_fine_grid(robin_chart):
    result = nondegeneracy_check(robin_chart, grid=PolarGrid(128, 256))
    rho, m = smallest_magnitude(0.5)
    assert result.verdict == 'nondegenerate'
    assert result.mode == m
    assert result.min_abs_eigenvalue == pytest.approx(abs(rho), rel=1e-3)


def test_harmonic_robin_chart_is_degenerate():
    chart = builtin_chart('synthetic-robin-disk', 2.0)
    result = nondegeneracy_check(chart, grid=PolarGrid(64, 32))
    assert result.verdict == 'degenerate'
    assert result.mode == 2


def test_f_equation_inverts_forward_action(robin_chart):
    grid = PolarGrid(32, 16)
    rr, tt = grid.mesh()
    f = 1.0 + rr ** 2 * np.cos(tt) + 0.3 * rr ** 3 * np.sin(2 * tt)
    Xi = 0.2 * np.cos(grid.theta)
    disc = RobinOperatorDisc(robin_chart, grid, robin_weight=1.0, with_potential=True)
    h = disc.forward(f, Xi)
    assert np.allclose(solve_f_equation(robin_chart, h, Xi, grid), f, atol=1e-9)


def test_f_equation_warns_when_screening_is_skipped(robin_chart, monkeypatch):
    wavy = replace(robin_chart, name='wavy-robin-disk', robin_override=lambda th: 0.5 + 0.2 * np.cos(th),
                   axisymmetric=False)
    grid = PolarGrid(32, 16)
    rr, tt = grid.mesh()
    f = 1.0 + rr ** 2 * np.cos(tt)
    disc = RobinOperatorDisc(wavy, grid, robin_weight=1.0, with_potential=True)
    assert not disc.axisymmetric
    log = MagicMock()
    monkeypatch.setattr(solvers, 'logger', log)
    solved = solve_f_equation(wavy, disc.forward(f), None, grid)
    assert np.allclose(solved, f, atol=1e-6)
    log.warning.assert_called_once()
    assert 'not screened' in log.warning.call_args[0][0]


def test_f_equation_zero_data(robin_chart):
    grid = PolarGrid(32, 16)
    assert not np.any(solve_f_equation(robin_chart, np.zeros(grid.shape), None, grid))


def test_f_equation_rejects_degenerate_chart(ball_chart):
    grid = PolarGrid(32, 16)
    with pytest.raises(DegenerateChartError):
        solve_f_equation(ball_chart, np.ones(grid.shape), None, grid)


def test_e_equation_residual(robin_chart):
    grid = PolarGrid(32, 16)
    rr, tt = grid.mesh()
    g = np.exp(-rr ** 2) * (1.0 + np.cos(tt))
    eps = 0.1
    e = solve_e_equation(robin_chart, eps, g, 3.0, grid)
    disc = RobinOperatorDisc(robin_chart, grid, robin_weight=0.5, with_potential=False)
    assert np.allclose(eps ** 2 * disc.apply(e) - 3.0 * e, g, atol=1e-8)


def test_e_equation_detects_resonance(robin_chart):
    grid = PolarGrid(32, 16)
    rhos = full_spectrum(robin_chart, 0.5, grid)
    rho = rhos[rhos > 0][3]
    eps = float(np.sqrt(3.0 / rho))
    assert min_gap(robin_chart, eps, 3.0, grid) < 1e-10
    with pytest.raises(ResonanceError):
        solve_e_equation(robin_chart, eps, np.ones(grid.shape), 3.0, grid)
    with pytest.raises(ValidationError):
        solve_e_equation(robin_chart, 0.0, np.ones(grid.shape), 3.0, grid)


def test_coupled_system_carries_robin_data(robin_chart):
    grid = PolarGrid(32, 16)
    rr, tt = grid.mesh()
    h = rr ** 2 * np.cos(tt)
    Xi = np.sin(grid.theta)
    solution = solve_coupled_system(robin_chart, 0.1, h, np.ones(grid.shape), Xi, 3.0, grid)
    disc = RobinOperatorDisc(robin_chart, grid, robin_weight=1.0, with_potential=True)
    assert np.allclose(disc.forward(solution.f2, Xi), h, atol=1e-8)
    f2, e = solution
    assert e.shape == grid.shape
