import json
import math
from dataclasses import replace

import pytest

from config import settings
from config.run_config import RunConfig, parse_chart_spec, parse_levels
from utils.validators import ValidationError


def test_chart_spec():
    assert parse_chart_spec('synthetic-robin-disk:0.5') == ('synthetic-robin-disk', 0.5)
    assert parse_chart_spec('equatorial-disk-in-ball') == ('equatorial-disk-in-ball', None)
    for bad in ('synthetic-robin-disk', 'synthetic-robin-disk:abc', 'equatorial-disk-in-ball:1', 'torus'):
        with pytest.raises(ValidationError):
            parse_chart_spec(bad)


def test_level_ranges():
    assert parse_levels('3..8') == (3, 8)
    assert parse_levels('4') == (4, 4)
    with pytest.raises(ValidationError):
        parse_levels('3-8')


def test_defaults_validate():
    config = RunConfig().validate()
    assert config.effective_lambda0() == pytest.approx(3.0)
    assert replace(config, lambda0=2.5).effective_lambda0() == 2.5
    assert config.params == 'zero'
    assert (config.layer_n_r, config.layer_n_theta) == (settings.LAYER_N_R, settings.LAYER_N_THETA)


@pytest.mark.parametrize('changes', [
    {'p': 0.5},
    {'n': 4000},
    {'n_r': 7},
    {'n_theta': 2048},
    {'layer_n_r': 9},
    {'eps_list': (0.05,)},
    {'levels': (5, 3)},
    {'q': 4.0},
    {'varrho': 0.05},
    {'params': 'random'},
    {'f2_file': '/nonexistent/f2.csv'},
])
def test_invalid_configs(changes):
    with pytest.raises(ValidationError):
        replace(RunConfig(), **changes).validate()


def test_hash_ignores_output_dir(tmp_path):
    a = RunConfig(output_dir=str(tmp_path / 'a'))
    b = RunConfig(output_dir=str(tmp_path / 'b'))
    assert a.config_hash() == b.config_hash()
    assert replace(a, eps=0.04).config_hash() != a.config_hash()
    assert len(a.config_hash()) == 16


def test_json_overlay(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'eps': 0.04, 'levels': '3..4', 'eps_list': [0.02, 0.04], 'q': 'inf'}))
    config = RunConfig.from_json(str(path), base=RunConfig(p=2.0))
    assert config.p == 2.0
    assert config.eps == 0.04
    assert config.levels == (3, 4)
    assert config.eps_list == (0.02, 0.04)
    assert math.isinf(config.q)
    assert config.to_dict()['q'] == 'inf'


def test_json_rejects_unknown_keys(tmp_path):
    path = tmp_path / 'run.json'
    path.write_text(json.dumps({'epsilon': 0.04}))
    with pytest.raises(ValidationError):
        RunConfig.from_json(str(path))
    with pytest.raises(ValidationError):
        RunConfig.from_json(str(tmp_path / 'missing.json'))
