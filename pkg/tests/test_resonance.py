import numpy as np
import pytest

from resonance.selection import (
    certificate_frame, count_negative, count_scaling, gap_constant, gap_report, lambda_eps,
    lambda_eps_rescaled, monotonicity_check, resonant_points, rho_list_for_levels, select_epsilon,
    select_levels, verify_certificate,
)
from utils.validators import ValidationError

LINEAR_RHOS = np.arange(1.0, 61.0)
LONG_RHOS = np.arange(1.0, 800001.0)


def test_select_epsilon_widest_gap():
    cert = select_epsilon(LINEAR_RHOS, 3.0, 1)
    assert cert.interval == (0.25, 0.5)
    assert cert.a == pytest.approx(np.sqrt(3.0 / 13.0))
    assert cert.b == 0.5
    assert cert.eps == pytest.approx(0.5 * (np.sqrt(3.0 / 13.0) + 0.5))
    # rho = 13..47 resonate inside the level
    assert cert.resonant_count == 35
    assert cert.gap == pytest.approx(abs(cert.eps ** 2 * 12.0 - 3.0))
    assert cert.gap >= cert.gap_bound
    assert cert.nearest_below == pytest.approx(np.sqrt(3.0 / 13.0))
    # rho = 12 resonates exactly at the upper endpoint
    assert cert.nearest_above == 0.5


def test_select_epsilon_requires_coverage():
    with pytest.raises(ValidationError):
        select_epsilon(LINEAR_RHOS, 3.0, 2)
    with pytest.raises(ValidationError):
        select_epsilon(LINEAR_RHOS, 3.0, 0)
    with pytest.raises(ValidationError):
        select_epsilon(LINEAR_RHOS[::-1], 3.0, 1)


def test_certificate_reverifies():
    cert = select_epsilon(LINEAR_RHOS, 3.0, 1)
    assert verify_certificate(cert, LINEAR_RHOS)
    # a resonance planted inside (a, b) breaks the certificate
    planted = np.sort(np.append(LINEAR_RHOS, 3.0 / cert.eps ** 2 * 1.001))
    assert not verify_certificate(cert, planted)


def test_lambda_eps_and_rescaling():
    lam2 = lambda_eps(LINEAR_RHOS, 0.2, 3.0)
    direct = lambda_eps(LINEAR_RHOS, 0.3, 3.0)
    assert np.allclose(lambda_eps_rescaled(lam2, 0.3, 0.2, 3.0), direct)
    with pytest.raises(ValidationError):
        lambda_eps(1.0, 0.0, 3.0)


def test_count_negative():
    assert count_negative(LINEAR_RHOS, 0.5, 3.0) == 11
    assert count_negative(np.array([-1.0, 2.0]), 0.1, 3.0) == 2
    with pytest.raises(ValidationError):
        count_negative(LINEAR_RHOS, -0.1, 3.0)


def test_count_scaling_two_dimensional():
    eps = [2.0 ** -k for k in range(3, 9)]
    report = count_scaling(LONG_RHOS, eps, 3.0)
    assert report['slope'] == pytest.approx(2.0, abs=0.01)
    assert report['counts'] == sorted(report['counts'])


def test_resonant_points_skip_nonpositive():
    t = resonant_points(np.array([-2.0, 0.0, 3.0, 12.0]), 3.0)
    assert np.allclose(t, [1.0, 0.5])


def test_monotone_in_eps():
    assert monotonicity_check(LINEAR_RHOS, 3.0, np.linspace(0.01, 0.5, 20))


def test_levels_three_to_eight():
    certs = select_levels(LONG_RHOS, 3.0, (3, 8))
    assert [c.ell for c in certs] == list(range(3, 9))
    for cert in certs:
        lo, hi = cert.interval
        assert lo < cert.eps < hi
        assert verify_certificate(cert, LONG_RHOS)
    assert gap_constant(certs) > 0
    report = gap_report(certs)
    assert report['levels'] == list(range(3, 9))
    assert report['gap_constant'] == pytest.approx(min(report['ratios']))
    assert len(certificate_frame(certs)) == 6


def test_levels_are_thread_independent():
    serial = select_levels(LONG_RHOS, 3.0, (3, 5), threads=1)
    pooled = select_levels(LONG_RHOS, 3.0, (3, 5), threads=3)
    assert [c.eps for c in serial] == [c.eps for c in pooled]


def test_gap_constant_needs_levels():
    with pytest.raises(ValidationError):
        gap_constant([])


def test_rho_list_covers_levels(robin_chart):
    rhos = rho_list_for_levels(robin_chart, 3.0, (3, 4))
    assert rhos[-1] >= 3.0 * 4.0 ** 5
    assert np.all(np.diff(rhos) >= 0)
    # kappa = 0.25 > 0 gives exactly one negative eigenvalue
    assert np.sum(rhos < 0) == 1


def test_rho_list_scales_with_physical_area(robin_chart):
    base = rho_list_for_levels(robin_chart, 3.0, (3, 3))
    scaled = rho_list_for_levels(robin_chart.rescaled(2.0), 3.0, (3, 3))
    assert scaled[-1] >= 3.0 * 4.0 ** 4
    # four times the area needs about four times the eigenvalues
    assert len(scaled) < 5 * len(base)


def test_rescaling_identity_on_random_samples(rng):
    rhos = rng.uniform(-50.0, 5000.0, size=2000)
    for eps1, eps2 in rng.uniform(0.05, 0.5, size=(20, 2)):
        direct = lambda_eps(rhos, eps1, 3.0)
        rescaled = lambda_eps_rescaled(lambda_eps(rhos, eps2, 3.0), eps1, eps2, 3.0)
        assert np.all(np.abs(rescaled - direct) <= 1e-12 * np.maximum(1.0, np.abs(direct)))


def test_clustered_level_is_flagged():
    rhos = 4.0 * np.arange(1, 50001)
    # a dense cluster covering level 5, eps in (2^-6, 2^-5)
    cluster = np.linspace(3.0 * 4.0 ** 5, 3.0 * 4.0 ** 6, 200001)
    rhos = np.sort(np.concatenate([rhos, cluster]))
    report = gap_report(select_levels(rhos, 3.0, (3, 7)))
    assert report['clustered_levels'] == [5]
    assert report['gap_constant'] == report['ratios'][2]
    assert report['ratios'][2] < 0.1 * report['median_ratio']
