import numpy as np
import pytest

from config import settings
from geometry.charts import builtin_chart
from layer_builder.assembly import assemble_u4
from layer_builder.params import build_params
from profile_1d.profile import ProfileParams, build_profile
from strip_linear.strip_solver import StripSolver
from surface_spectrum.robin_operator import PolarGrid


@pytest.fixture(scope='session')
def profile3():
    return build_profile(ProfileParams(p=3.0))


@pytest.fixture(scope='session')
def robin_chart():
    return builtin_chart('synthetic-robin-disk', 0.5)


@pytest.fixture(scope='session')
def ball_chart():
    return builtin_chart('equatorial-disk-in-ball')


@pytest.fixture(scope='session')
def layer_grid():
    return PolarGrid(settings.LAYER_N_R, settings.LAYER_N_THETA)


@pytest.fixture(scope='session')
def unit_params(profile3, robin_chart, layer_grid):
    return build_params(profile3, robin_chart, layer_grid, 'unit')


@pytest.fixture(scope='session')
def unit_solution(profile3, robin_chart, unit_params):
    return assemble_u4(profile3, robin_chart, unit_params, 0.05)


@pytest.fixture(scope='session')
def small_strip(profile3):
    return StripSolver(profile3, stride=8, n_eta=64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
