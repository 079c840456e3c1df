import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irssense.geometry import (SPEED_OF_LIGHT, ArrayGeometry, carrier_wavelength, plane_wave_steering,
                               spherical_wave_vector, steering_derivative)

LAM = carrier_wavelength(3e9)
angles = st.floats(min_value=-89.0, max_value=89.0, allow_nan=False)


def test_wavelength_at_3ghz():
    assert LAM == pytest.approx(SPEED_OF_LIGHT / 3e9)
    assert LAM == pytest.approx(0.0999308193, rel=1e-9)


def test_positions_follow_axis():
    g = ArrayGeometry(4, 0.05, LAM, (1.0, 2.0, 0.0), (0.0, 2.0, 0.0))
    np.testing.assert_allclose(g.positions(), [[1, 2, 0], [1, 2.05, 0], [1, 2.1, 0], [1, 2.15, 0]])
    np.testing.assert_allclose(g.orientation, [0, 1, 0])
    np.testing.assert_allclose(g.normal, [-1, 0, 0])
    np.testing.assert_allclose(g.center, [1, 2.075, 0])


@pytest.mark.parametrize("kwargs", [
    dict(num_elements=0, spacing=0.05, wavelength=LAM),
    dict(num_elements=4, spacing=0.0, wavelength=LAM),
    dict(num_elements=4, spacing=0.05, wavelength=-1.0),
    dict(num_elements=4, spacing=0.05, wavelength=LAM, orientation=(0.0, 0.0, 0.0)),
    dict(num_elements=4, spacing=0.05, wavelength=LAM, orientation=(0.0, 0.0, 1.0)),
])
def test_invalid_geometry_rejected(kwargs):
    with pytest.raises(ValueError):
        ArrayGeometry(**kwargs)


def test_steering_matches_definition():
    g = ArrayGeometry.half_wavelength(8, LAM)
    a = plane_wave_steering(g, 30.0)
    expected = np.exp(1j * np.pi * np.arange(8) * 0.5)
    np.testing.assert_allclose(a, expected, atol=1e-14)


def test_steering_broadside_is_all_ones():
    g = ArrayGeometry.half_wavelength(5, LAM)
    np.testing.assert_allclose(plane_wave_steering(g, 0.0), np.ones(5))


def test_steering_vectorises():
    g = ArrayGeometry.half_wavelength(6, LAM)
    grid = np.array([[-10.0, 0.0, 20.0], [1.0, 2.0, 3.0]])
    out = plane_wave_steering(g, grid)
    assert out.shape == (2, 3, 6)
    np.testing.assert_allclose(out[1, 2], plane_wave_steering(g, 3.0))


@pytest.mark.parametrize("bad", [90.0, -90.0, 120.0, np.nan])
def test_steering_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        plane_wave_steering(ArrayGeometry.half_wavelength(4, LAM), bad)


@given(angles)
def test_steering_unit_modulus(theta):
    a = plane_wave_steering(ArrayGeometry.half_wavelength(16, LAM), theta)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)


@settings(max_examples=50)
@given(angles)
def test_derivative_matches_finite_difference(theta):
    g = ArrayGeometry.half_wavelength(8, LAM)
    h = 1e-6
    fd = (plane_wave_steering(g, theta + h) - plane_wave_steering(g, theta - h)) / (2 * h)
    np.testing.assert_allclose(steering_derivative(g, theta), fd, atol=1e-7)


def test_angle_to_and_direction_are_inverse():
    g = ArrayGeometry.half_wavelength(4, LAM, (0.3, -0.2, 0.0), (1.0, 1.0, 0.0))
    for theta in (-70.0, -5.0, 0.0, 42.0):
        p = g.reference_position + 7.0 * g.direction(theta)
        assert g.angle_to(p) == pytest.approx(theta, abs=1e-12)


def test_spherical_wave_converges_to_plane_wave():
    g = ArrayGeometry.half_wavelength(8, LAM)
    theta = 25.0
    far = 1e5
    src = g.reference_position + far * g.direction(theta)
    v = spherical_wave_vector(g, src)
    ratio = v / v[0]
    np.testing.assert_allclose(ratio, plane_wave_steering(g, theta), atol=1e-4)
    assert abs(v[0]) == pytest.approx(LAM / (4 * np.pi * far), rel=1e-9)


def test_spherical_wave_rejects_source_on_element():
    g = ArrayGeometry.half_wavelength(3, LAM)
    with pytest.raises(ValueError):
        spherical_wave_vector(g, g.positions()[1])


def test_centered_steering_is_symmetric_about_the_centre():
    from irssense.geometry import centered_steering
    g = ArrayGeometry.half_wavelength(6, LAM)
    c = centered_steering(g, 20.0)
    np.testing.assert_allclose(c, np.conj(c[::-1]), atol=1e-14)
    np.testing.assert_allclose(c / plane_wave_steering(g, 20.0), c[0] * np.ones(6), atol=1e-14)
