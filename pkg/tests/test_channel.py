import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irssense.channel import (LinkBudget, Target, is_near_field, los_matrix, one_way_amplitude,
                              reflectivity_amplitude)
from irssense.geometry import ArrayGeometry, carrier_wavelength

LAM = carrier_wavelength(3e9)


def test_one_way_amplitude_friis():
    assert one_way_amplitude(10.0, LAM) == pytest.approx(LAM / (40 * np.pi))
    np.testing.assert_allclose(one_way_amplitude([1.0, 2.0], LAM), [LAM / (4 * np.pi), LAM / (8 * np.pi)])


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_one_way_amplitude_rejects_nonpositive(d):
    with pytest.raises(ValueError):
        one_way_amplitude(d, LAM)


@given(st.floats(0.1, 1e3), st.floats(0.1, 1e3), st.floats(1e-3, 1e2))
def test_bistatic_radar_equation(d1, d2, rcs):
    # |A(d1) rho A(d2)|^2 = lambda^2 sigma / ((4 pi)^3 d1^2 d2^2), unit antenna gains.
    gain = (one_way_amplitude(d1, LAM) * reflectivity_amplitude(rcs, LAM) * one_way_amplitude(d2, LAM)) ** 2
    expected = LAM ** 2 * rcs / ((4 * np.pi) ** 3 * d1 ** 2 * d2 ** 2)
    assert gain == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(angle_deg=0.0, distance_m=0.0),
    dict(angle_deg=0.0, distance_m=1.0, rcs_m2=0.0),
    dict(angle_deg=90.0, distance_m=1.0),
])
def test_target_validation(kwargs):
    with pytest.raises(ValueError):
        Target(**kwargs)


def test_link_budget_validation():
    with pytest.raises(ValueError):
        LinkBudget(noise_power_w=0.0)


def _facing_pair(distance):
    tx = ArrayGeometry.half_wavelength(16, LAM, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    rx = ArrayGeometry.half_wavelength(8, LAM, (3.0, distance, 0.0), (-1.0, 0.0, 0.0))
    return rx, tx


def test_near_field_switch():
    rx, tx = _facing_pair(1.0)
    assert is_near_field(rx, tx)
    rx, tx = _facing_pair(100.0)
    assert not is_near_field(rx, tx)


def test_near_field_branch_is_exact_spherical():
    rx, tx = _facing_pair(1.0)
    h = los_matrix(rx, tx)
    d = np.linalg.norm(rx.positions()[2] - tx.positions()[5])
    assert h[2, 5] == pytest.approx(LAM / (4 * np.pi * d) * np.exp(-2j * np.pi * d / LAM), rel=1e-12)


def test_far_field_branch_rank_one_and_converges_to_exact():
    errors = []
    for dist in (2e3, 2e4):
        rx, tx = _facing_pair(dist)
        h = los_matrix(rx, tx)
        s = np.linalg.svd(h, compute_uv=False)
        assert s[1] < 1e-12 * s[0]
        exact = los_matrix(rx, tx, near_field_factor=np.inf)
        errors.append(np.linalg.norm(h - exact) / np.linalg.norm(exact))
    assert errors[0] < 5e-3
    # Residual curvature error of a centre-referenced plane wave falls as 1/distance.
    assert errors[0] / errors[1] == pytest.approx(10.0, rel=0.05)


def test_los_matrix_requires_shared_wavelength():
    tx = ArrayGeometry.half_wavelength(2, LAM)
    rx = ArrayGeometry.half_wavelength(2, 2 * LAM, (0.0, 5.0, 0.0))
    with pytest.raises(ValueError):
        los_matrix(rx, tx)


def test_far_field_frobenius_norm():
    rx, tx = _facing_pair(500.0)
    h = los_matrix(rx, tx)
    amp = one_way_amplitude(np.linalg.norm(rx.center - tx.center), LAM)
    assert np.linalg.norm(h) == pytest.approx(amp * np.sqrt(8 * 16), rel=1e-9)


@pytest.mark.parametrize("distance", [1.0, 500.0])
def test_reciprocity(distance):
    rx, tx = _facing_pair(distance)
    np.testing.assert_allclose(los_matrix(tx, rx), los_matrix(rx, tx).T, rtol=1e-12, atol=0)


def test_cascade_amplitude_is_segmentwise_product():
    d1, d2 = 100.0, 12.5
    whole = LAM ** 2 / ((4 * np.pi) ** 2 * d1 * d2)
    assert one_way_amplitude(d1, LAM) * one_way_amplitude(d2, LAM) == pytest.approx(whole, rel=1e-12)


def test_controller_link_is_near_field():
    irs = ArrayGeometry.half_wavelength(128, LAM, (-63.5 * LAM / 2, 0.0, 0.0), (1.0, 0.0, 0.0))
    ctrl = ArrayGeometry.half_wavelength(1, LAM, (0.0, 0.5, 0.0), (1.0, 0.0, 0.0))
    assert is_near_field(irs, ctrl)
    mag_db = 20 * np.log10(np.abs(los_matrix(irs, ctrl)[:, 0]))
    assert mag_db.max() - mag_db.min() > 1.0
