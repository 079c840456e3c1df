"""Line-of-sight channels and radar-equation gain bookkeeping.

Cascaded links multiply per-segment amplitudes ``wavelength / (4 pi d)``; a
target contributes ``sqrt(4 pi rcs) / wavelength`` so that one bistatic bounce
reproduces the radar equation with unit antenna gains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from irssense.geometry import ArrayGeometry, centered_steering

NEAR_FIELD_FACTOR = 10.0


@dataclass(frozen=True)
class Target:
    """Point target seen from the IRS centre.

    ``phase_rad`` is the echo phase of the target's complex reflectivity; it is
    redrawn per Monte Carlo trial by the harness.
    """

    angle_deg: float
    distance_m: float
    rcs_m2: float = 1.0
    phase_rad: float = 0.0

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError("target distance must be positive")
        if not self.rcs_m2 > 0:
            raise ValueError("target rcs must be positive")
        if not abs(self.angle_deg) < 90:
            raise ValueError("target angle must lie inside (-90, 90) degrees")


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power and per-element noise power of one snapshot.

    The noise default (-160 dBm) is the effective noise after integrating the
    probe over a snapshot: -90 dBm thermal noise less 70 dB of coherent
    processing gain.
    """

    tx_power_w: float = 1.0
    noise_power_w: float = 1e-19

    def __post_init__(self):
        if not (self.tx_power_w > 0 and self.noise_power_w > 0):
            raise ValueError("powers must be strictly positive")


@dataclass(frozen=True)
class NlosPath:
    """Extra specular path on the BS-IRS link.

    ``gain`` is complex and relative to the LoS path amplitude; the path leaves
    the IRS at ``irs_angle_deg`` and reaches the BS at ``bs_angle_deg`` (both
    measured from the respective array broadside).
    """

    irs_angle_deg: float
    bs_angle_deg: float
    gain: complex = 0.5


def one_way_amplitude(distance_m, wavelength: float):
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = wavelength / (4 * np.pi * d)
    return float(out) if out.ndim == 0 else out


def reflectivity_amplitude(rcs_m2: float, wavelength: float) -> float:
    if not rcs_m2 > 0:
        raise ValueError("rcs must be positive")
    return float(np.sqrt(4 * np.pi * rcs_m2) / wavelength)


def is_near_field(rx: ArrayGeometry, tx: ArrayGeometry, factor: float = NEAR_FIELD_FACTOR) -> bool:
    dist = np.linalg.norm(rx.center - tx.center)
    return bool(dist < factor * max(rx.aperture, tx.aperture))


def los_matrix(rx: ArrayGeometry, tx: ArrayGeometry, near_field_factor: float = NEAR_FIELD_FACTOR) -> np.ndarray:
    """LoS channel from every ``tx`` element to every ``rx`` element.

    Far apart arrays get the rank-one plane-wave model with phases referenced
    to the array centres; closer than ``near_field_factor`` apertures the
    exact spherical model is used instead.
    """
    if rx.wavelength != tx.wavelength:
        raise ValueError("arrays must share the carrier wavelength")
    lam = rx.wavelength
    d0 = float(np.linalg.norm(rx.center - tx.center))
    if d0 == 0:
        raise ValueError("coincident array centres")
    if is_near_field(rx, tx, near_field_factor):
        diff = rx.positions()[:, None, :] - tx.positions()[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        if np.any(dist == 0):
            raise ValueError("overlapping array elements")
        return lam / (4 * np.pi * dist) * np.exp(-2j * np.pi * dist / lam)
    amp = one_way_amplitude(d0, lam) * np.exp(-2j * np.pi * d0 / lam)
    b = centered_steering(rx, rx.angle_from_center(tx.center))
    a = centered_steering(tx, tx.angle_from_center(rx.center))
    return amp * np.outer(b, a)
