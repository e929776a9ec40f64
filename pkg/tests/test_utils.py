import json
import logging

import numpy as np
import pandas as pd
import pytest

from data.field_io import (
    ArtifactWriter, error_payload, load_surface_field, read_artifact_csv, surface_field_frame,
)
from utils.logger import LoggerContextManager, get_logger
from utils.validators import (
    DegenerateChartError, InvariantChecker, NumericalError, ResonanceError, ValidationError, require,
)


def test_exit_codes():
    assert ValidationError('x').exit_code == 2
    assert NumericalError('x').exit_code == 3
    assert ResonanceError(4, 1e-12, 0.1).exit_code == 3
    assert DegenerateChartError('ball', 1e-9, 1).exit_code == 3


def test_error_details():
    err = ResonanceError(4, -2e-12, 0.1)
    body = err.to_dict()
    assert body['error'] == 'ResonanceError'
    assert body['details'] == {'j': 4, 'Lambda': -2e-12, 'eps': 0.1}
    with pytest.raises(ValidationError) as info:
        require(False, 'bad input', n=3)
    assert info.value.details == {'n': 3}


def test_invariant_checker_modes():
    checker = InvariantChecker('demo')
    assert checker.add('small', 1e-9, 1e-8)
    assert checker.add('large', 2.0, 1.0, mode='ge')
    assert checker.add('near', 3.001, 0.01, mode='close', target=3.0)
    assert not checker.add('nan', float('nan'), 1.0)
    results = checker.results()
    assert results['passed'] == 3
    assert results['failed'] == 1
    assert not checker.all_passed
    report = checker.generate_report()
    assert 'FAIL  nan' in report
    with pytest.raises(ValidationError):
        checker.add('bad', 1.0, 1.0, mode='close')
    with pytest.raises(ValidationError):
        checker.add('bad', 1.0, 1.0, mode='between')


def test_logger_context_restores_level():
    logger = get_logger('layerlab.test')
    before = logger.level
    with LoggerContextManager(logger, 'ERROR'):
        assert logger.level == logging.ERROR
    assert logger.level == before


def test_artifacts_carry_provenance(tmp_path):
    writer = ArtifactWriter(str(tmp_path), 'abc123', '1.0')
    csv_path = writer.write_csv('table.csv', pd.DataFrame({'a': [1.0, 2.0]}))
    assert csv_path.read_text().splitlines()[0] == '# config_hash=abc123 format_version=1.0'
    assert read_artifact_csv(str(csv_path))['a'].tolist() == [1.0, 2.0]

    json_path = writer.write_json('report.json', {'value': np.float64(1.5), 'flag': np.bool_(True),
                                                  'arr': np.arange(3)})
    body = json.loads(json_path.read_text())
    assert body == {'value': 1.5, 'flag': True, 'arr': [0, 1, 2],
                    'config_hash': 'abc123', 'format_version': '1.0'}

    error_path = writer.write_error(ValidationError('bad p', {'p': 0.5}))
    assert error_path.name == 'error.json'
    assert json.loads(error_path.read_text())['details'] == {'p': 0.5}
    assert writer.written == ['table.csv', 'report.json', 'error.json']


def test_error_payload_without_config():
    body = json.loads(error_payload(NumericalError('solver failed'), None, '1.0'))
    assert body['config_hash'] is None
    assert body['error'] == 'NumericalError'


def test_surface_field_io(tmp_path):
    r = np.array([0.25, 0.75])
    theta = np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    values = np.arange(8.0).reshape(2, 4)
    frame = surface_field_frame(r, theta, value=values)
    writer = ArtifactWriter(str(tmp_path), 'h', '1.0')
    path = writer.write_csv('field.csv', frame.sample(frac=1.0, random_state=0))
    assert np.allclose(load_surface_field(str(path), r, theta), values)
    with pytest.raises(ValidationError):
        load_surface_field(str(path), np.array([0.2, 0.7]), theta)
    with pytest.raises(ValidationError):
        load_surface_field(str(path), r, theta[:3])
    with pytest.raises(ValidationError):
        read_artifact_csv(str(tmp_path / 'missing.csv'))
