import numpy as np
import pytest

from strip_linear.strip_solver import StripSolver, strip_battery, x_decay_rate
from utils.validators import ValidationError


def test_top_x_modes(small_strip, profile3):
    assert small_strip.mu[small_strip.iZ] == pytest.approx(profile3.lambda0 + 1.0, abs=1e-2)
    assert small_strip.mu[small_strip.iwx] == pytest.approx(1.0, abs=1e-2)
    assert small_strip.shape == (small_strip.x.size, 16, 65)


def test_shift_must_exceed_lambda0(profile3):
    with pytest.raises(ValidationError):
        StripSolver(profile3, K=3.5, stride=8, n_eta=64)
    with pytest.raises(ValidationError):
        StripSolver(profile3, n_eta=4, stride=8)


def test_manufactured_recovery(small_strip):
    phi_star, h, G = small_strip.manufactured()
    sol = small_strip.solve_with_orthogonality(h, G)
    assert np.max(np.abs(sol.phi - phi_star)) < 1e-6 * np.max(np.abs(phi_star))
    assert sol.dropped < 1e-8


def test_model_neumann_matches_direct_solve(small_strip):
    _, G = small_strip.reference_data()
    phi0 = small_strip.solve_model_neumann(G)
    direct = small_strip.direct_model_neumann(G)
    assert np.max(np.abs(phi0 - direct)) < 1e-4 * np.max(np.abs(direct))


def test_model_neumann_rejects_kernel_data(small_strip):
    G = np.outer(small_strip.w_x, np.ones(small_strip.n_theta))
    with pytest.raises(ValidationError):
        small_strip.solve_model_neumann(G)


def test_larger_shift_shrinks_solution(small_strip):
    _, G = small_strip.reference_data()
    base = np.max(np.abs(small_strip.solve_model_neumann(G)))
    assert np.max(np.abs(small_strip.solve_model_neumann(G, K=2.0 * small_strip.K))) <= base


def test_T1_kernel_direction(small_strip):
    s = small_strip
    g = np.cos(s.theta)[:, None] * np.exp(-s.eta)[None, :]
    sol = s.solve_T1((s.chi * s.w_x)[:, None, None] * g[None], np.zeros(s.shape[:2]))
    assert np.max(np.abs(sol.c + g)) < 1e-8
    assert np.max(np.abs(sol.phi)) < 1e-8


def test_T1_generic_data(small_strip):
    s = small_strip
    h = np.exp(-s.x ** 2)[:, None, None] * np.ones(s.shape[1:])[None]
    G = np.outer(np.exp(-s.x ** 2) * s.x, np.ones(s.n_theta))
    phi, c, d, Lam1, Lam2 = s.solve_T1(h, G)
    assert phi.shape == s.shape
    assert c.shape == d.shape == Lam1.shape == (s.n_theta, s.n_eta + 1)
    assert s.solve_T1(h, G).residual < 1e-7


def test_neumann_layer_reproduces_data(small_strip):
    s = small_strip
    D = np.outer(np.exp(-s.x ** 2) * (1.0 + s.x), 1.0 + np.cos(s.theta))
    layer = s.solve_neumann_layer(D)
    assert layer.data_residual(D) < 1e-10
    assert layer.k.shape == (s.n_theta,)


def test_x_decay_rate(small_strip):
    x = small_strip.x
    field = np.exp(-2.0 * np.abs(x))[:, None, None] * np.ones((1, 4, 3))
    assert x_decay_rate(field, x) == pytest.approx(2.0, rel=1e-6)
    with pytest.raises(ValidationError):
        x_decay_rate(field, x, window=(2.0, 2.05))


def test_coercivity_constants(small_strip):
    constants = small_strip.coercivity_constants()
    assert constants['gap'] > 0
    assert 0 < constants['constant'] < np.inf
    assert 0 < constants['measured'] <= constants['constant'] * (1.0 + 1e-12)
    # (1 + t) / (gap + t)^2 decreases in t while gap < 2
    assert constants['constant'] == pytest.approx(1.0 / constants['gap'] ** 2, rel=1e-12)
    assert small_strip.a_priori_constant() > 0


def test_strip_battery_passes(profile3):
    checker = strip_battery(profile3, stride=8, n_eta=64)
    assert checker.all_passed, checker.generate_report()
