"""Uniform linear array geometry and steering vectors.

All arrays lie in the horizontal (x, y) plane.  Angles are measured from the
array broadside, positive towards the array axis direction, so a source at
``angle`` sits along ``sin(angle) * axis + cos(angle) * normal``.

Phase convention: an outgoing wave accumulates ``exp(-j 2 pi d / wavelength)``
over a path of length ``d``; the plane-wave steering vector of an arriving
wave is therefore ``exp(+j 2 pi (spacing / wavelength) k sin(angle))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 3.0e9


def carrier_wavelength(carrier_hz: float = DEFAULT_CARRIER_HZ) -> float:
    if carrier_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / carrier_hz


def _as_vec3(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size == 2:
        arr = np.append(arr, 0.0)
    if arr.size != 3:
        raise ValueError(f"expected a 3-vector, got shape {np.shape(v)}")
    return arr


@dataclass(frozen=True)
class ArrayGeometry:
    """A uniform linear array.

    Element ``k`` sits at ``reference_position + k * spacing * orientation``;
    element 0 is the phase reference.
    """

    num_elements: int
    spacing: float
    wavelength: float
    reference_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValueError("num_elements must be a positive integer")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        ref = _as_vec3(self.reference_position)
        axis = _as_vec3(self.orientation)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("orientation must be non-zero")
        if axis[2] != 0:
            raise ValueError("arrays must lie in the horizontal plane")
        object.__setattr__(self, "num_elements", int(self.num_elements))
        object.__setattr__(self, "reference_position", ref)
        object.__setattr__(self, "orientation", axis / norm)

    @classmethod
    def half_wavelength(cls, num_elements: int, wavelength: float, reference_position=(0.0, 0.0, 0.0),
                        orientation=(1.0, 0.0, 0.0)) -> "ArrayGeometry":
        return cls(num_elements, wavelength / 2, wavelength, np.asarray(reference_position, float),
                   np.asarray(orientation, float))

    @property
    def normal(self) -> np.ndarray:
        """Broadside direction: the axis rotated by +90 degrees in the plane."""
        ax = self.orientation
        return np.array([-ax[1], ax[0], 0.0])

    @property
    def aperture(self) -> float:
        return (self.num_elements - 1) * self.spacing

    @property
    def center(self) -> np.ndarray:
        return self.reference_position + 0.5 * self.aperture * self.orientation

    def positions(self) -> np.ndarray:
        """Element positions, shape ``(num_elements, 3)``."""
        k = np.arange(self.num_elements)[:, None]
        return self.reference_position[None, :] + k * self.spacing * self.orientation[None, :]

    def direction(self, angle_deg: float) -> np.ndarray:
        """Unit vector pointing from the array towards ``angle_deg``."""
        th = np.deg2rad(angle_deg)
        return np.sin(th) * self.orientation + np.cos(th) * self.normal

    def angle_to(self, point) -> float:
        """Angle (degrees from broadside) of ``point`` seen from element 0."""
        return self._angle_from(self.reference_position, point)

    def angle_from_center(self, point) -> float:
        """Angle (degrees from broadside) of ``point`` seen from the array centre."""
        return self._angle_from(self.center, point)

    def _angle_from(self, origin, point) -> float:
        v = _as_vec3(point) - origin
        return float(np.rad2deg(np.arctan2(v @ self.orientation, v @ self.normal)))


def _check_angle(angle_deg) -> np.ndarray:
    ang = np.asarray(angle_deg, dtype=float)
    if np.any(np.abs(ang) >= 90.0) or not np.all(np.isfinite(ang)):
        raise ValueError(f"angle must lie strictly inside (-90, 90) degrees, got {angle_deg}")
    return ang


def plane_wave_steering(geom: ArrayGeometry, angle_deg) -> np.ndarray:
    """Far-field steering vector.

    Parameters
    ----------
    geom : ArrayGeometry
    angle_deg : float or array_like
        Angle(s) from broadside, strictly inside (-90, 90).

    Returns
    -------
    ndarray
        Shape ``(num_elements,)`` for a scalar angle, otherwise
        ``angle_shape + (num_elements,)``.
    """
    ang = _check_angle(angle_deg)
    k = np.arange(geom.num_elements)
    phase = 2 * np.pi * (geom.spacing / geom.wavelength) * np.sin(np.deg2rad(ang))[..., None] * k
    return np.exp(1j * phase)


def centered_steering(geom: ArrayGeometry, angle_deg) -> np.ndarray:
    """:func:`plane_wave_steering` with its phase referenced to the array centre."""
    ang = _check_angle(angle_deg)
    shift = np.exp(-1j * np.pi * (geom.aperture / geom.wavelength) * np.sin(np.deg2rad(ang)))
    return plane_wave_steering(geom, ang) * np.asarray(shift)[..., None]


def steering_derivative(geom: ArrayGeometry, angle_deg: float) -> np.ndarray:
    """Derivative of :func:`plane_wave_steering` with respect to the angle in degrees."""
    ang = _check_angle(angle_deg)
    k = np.arange(geom.num_elements)
    coef = 2j * np.pi * (geom.spacing / geom.wavelength) * np.cos(np.deg2rad(ang)) * np.pi / 180
    return coef * k * plane_wave_steering(geom, ang)


def spherical_wave_vector(geom: ArrayGeometry, source_position) -> np.ndarray:
    """Exact free-space response from a point source to every element.

    Entry ``k`` is ``wavelength / (4 pi d_k) * exp(-j 2 pi d_k / wavelength)``.
    """
    dist = np.linalg.norm(geom.positions() - _as_vec3(source_position)[None, :], axis=1)
    if np.any(dist <= 0):
        raise ValueError("source coincides with an array element")
    lam = geom.wavelength
    return lam / (4 * np.pi * dist) * np.exp(-2j * np.pi * dist / lam)
