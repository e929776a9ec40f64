import numpy as np
import pytest

from profile_1d import profile as profile_module
from profile_1d.profile import (
    Z_SHAPE_TOL, ProfileParams, build_profile, decay_rate, decay_report, eigen_residual, invariant_summary,
    lambda0_formula, moment, ode_residual, subsample,
)
from profile_1d.projected_ode import ProjectedSolver, multiplier_formula, solve_projected_ode
from utils.validators import NumericalError, ValidationError


def test_lambda0_closed_form():
    assert lambda0_formula(3.0) == pytest.approx(3.0)
    assert lambda0_formula(2.0) == pytest.approx(1.25)


def test_profile_matches_discrete_eigenvalue(profile3):
    assert profile3.lambda0 == pytest.approx(3.0)
    assert abs(profile3.lambda0_discrete - 3.0) < 1e-6
    assert profile3.Z_mismatch <= Z_SHAPE_TOL + 2.0 * profile3.Z_estimate
    assert profile3.Z_mismatch < 2e-4


@pytest.mark.parametrize('p', [2.0, 3.0])
def test_closed_form_z_tracks_grid_error_estimate(p):
    table = build_profile(ProfileParams(p=p))
    # the Richardson estimate measures the grid error of the eigenvector itself
    assert table.Z_estimate > 0
    assert table.Z_mismatch == pytest.approx(table.Z_estimate, rel=0.5)


def test_perturbed_closed_form_z_is_rejected(monkeypatch):
    exact = profile_module.eigenfunction_values

    def perturbed(p, x, scale):
        Z, Z_x, Z_xx = exact(p, x, scale)
        return Z + 5e-4 * np.exp(-x ** 2), Z_x, Z_xx

    monkeypatch.setattr(profile_module, 'eigenfunction_values', perturbed)
    with pytest.raises(NumericalError):
        build_profile(ProfileParams(p=3.0))


def test_profile_symmetry_and_normalisation(profile3):
    summary = invariant_summary(profile3)
    assert summary['w_even_defect'] < 1e-12
    assert summary['wx_odd_defect'] < 1e-12
    assert summary['normZ2_defect'] < 1e-10
    assert summary['min_w'] > 0
    assert summary['min_Z'] > 0


def test_closed_form_solves_ode(profile3):
    assert ode_residual(profile3).max() < 1e-10
    assert eigen_residual(profile3).max() < 1e-10
    # three-point stencil: O(dx^2)
    assert ode_residual(profile3, discrete=True).max() < 1e-3


def test_moments_for_cubic_profile(profile3):
    # w = sqrt(2) sech x: int w_x^2 = 4/3, int w^4 = 16/3
    assert moment(profile3, 'sigma1') == pytest.approx(4.0 / 3.0, rel=1e-6)
    assert moment(profile3, 'wp1') == pytest.approx(16.0 / 3.0, rel=1e-6)
    assert moment(profile3, 'normZ2') == pytest.approx(1.0, rel=1e-10)
    assert moment(profile3, 'xwxZ') == pytest.approx(-np.sqrt(6.0) * np.pi / 12.0, rel=1e-5)


def test_unknown_moment_rejected(profile3):
    with pytest.raises(ValidationError):
        moment(profile3, 'sigma7')


def test_decay_rates(profile3):
    assert decay_rate(profile3, 'w') == pytest.approx(1.0, abs=1e-3)
    assert decay_rate(profile3, 'Z') == pytest.approx(2.0, abs=1e-3)
    report = decay_report(profile3)
    assert report['Z_gap_eigen'] < 1e-3


@pytest.mark.parametrize('kwargs', [
    {'p': 1.0},
    {'p': 0.5},
    {'n': 4000},
    {'n': 1001},
    {'L': 5.0},
])
def test_invalid_profile_params(kwargs):
    with pytest.raises(ValidationError):
        build_profile(ProfileParams(**kwargs))


def test_subsample_keeps_endpoints(profile3):
    coarse = subsample(profile3, 8)
    assert coarse['x'][0] == profile3.x[0]
    assert coarse['x'][-1] == profile3.x[-1]
    assert coarse['dx'] == pytest.approx(8 * profile3.dx)
    with pytest.raises(ValidationError):
        subsample(profile3, 7)


def test_projected_solve_of_kernel_direction(profile3):
    phi, c, d = solve_projected_ode(profile3, profile3.w_x)
    assert c == pytest.approx(-1.0, abs=1e-8)
    assert np.max(np.abs(phi)) < 1e-8
    assert d == 0.0


def test_projected_solution_orthogonality(profile3):
    h = np.exp(-profile3.x ** 2) * (1.0 + profile3.x)
    sol = ProjectedSolver(profile3, 'wx-and-Z').solve(h)
    dx = profile3.dx
    assert abs(np.sum(sol.phi * profile3.w_x) * dx) < 1e-8
    assert abs(np.sum(sol.phi * profile3.Z) * dx) < 1e-8
    assert sol.residual < 1e-8


def test_multiplier_matches_formula(profile3):
    h = profile3.x * np.exp(-profile3.x ** 2)
    sol = solve_projected_ode(profile3, h)
    assert sol.c == pytest.approx(multiplier_formula(profile3, h), rel=1e-4, abs=1e-8)


def test_batch_solve_matches_single(profile3):
    x = profile3.x
    H = np.stack([np.exp(-x ** 2), x * np.exp(-x ** 2)], axis=1)
    solver = ProjectedSolver(profile3)
    batch = solver.solve(H)
    single = solver.solve(H[:, 1])
    assert np.allclose(batch.phi[:, 1], single.phi, atol=1e-12)
    assert batch.c[1] == pytest.approx(single.c, abs=1e-12)


def test_non_decaying_rhs_rejected(profile3):
    with pytest.raises(ValidationError):
        solve_projected_ode(profile3, np.ones_like(profile3.x))


def test_unknown_constraint_set(profile3):
    with pytest.raises(ValidationError):
        ProjectedSolver(profile3, 'Z-only')
