"""Received-snapshot synthesis for the three IRS sensing architectures.

Coordinates: the IRS reflecting elements form a ULA along +x centred on the
origin and facing +y.  Targets, the BS and the controller are placed relative
to that centre.  The probe symbol is the constant 1, so all temporal diversity
comes from the reflection schedule.

Every target enters linearly through its complex gain
``alpha = rho * exp(j * phase) * sqrt(tx_power)``; :func:`signatures` returns the
unit-gain noiseless response that the estimators reuse as forward model.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from irssense.channel import (
    NEAR_FIELD_FACTOR,
    LinkBudget,
    NlosPath,
    Target,
    is_near_field,
    los_matrix,
    one_way_amplitude,
    reflectivity_amplitude,
)
from irssense.geometry import ArrayGeometry, carrier_wavelength, centered_steering, plane_wave_steering
from irssense.reflection import ReflectionSchedule

ARCHITECTURES = ("active", "semi_passive", "passive")


@dataclass(frozen=True)
class Scenario:
    bs_tx: ArrayGeometry
    bs_rx: ArrayGeometry
    irs_elements: ArrayGeometry
    irs_sensors: ArrayGeometry
    controller_position: np.ndarray
    bs_irs_distance_m: float
    bs_angle_deg: float
    targets: tuple = ()
    budget: LinkBudget = field(default_factory=LinkBudget)
    architecture: str = "active"
    snapshots: int = 128
    master_seed: int = 0
    nlos_paths: tuple = ()
    near_field_factor: float = NEAR_FIELD_FACTOR
    direct_echo: bool = True
    reflected_path: bool = True  # False leaves a bare sensor ULA (active direct echo only)
    direct_leakage: bool = False
    bs_target_los: bool = False

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.snapshots < 1:
            raise ValueError("snapshots must be >= 1")
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "nlos_paths", tuple(self.nlos_paths))
        object.__setattr__(self, "controller_position", np.asarray(self.controller_position, float))

    @property
    def wavelength(self) -> float:
        return self.irs_elements.wavelength

    @property
    def receiver(self) -> ArrayGeometry:
        return self.bs_rx if self.architecture == "passive" else self.irs_sensors

    @property
    def controller(self) -> ArrayGeometry:
        return ArrayGeometry(1, self.wavelength / 2, self.wavelength, self.controller_position)

    def target_position(self, angle_deg, distance_m) -> np.ndarray:
        ang = np.asarray(angle_deg, float)
        return self.irs_elements.center + np.asarray(distance_m, float)[..., None] * (
            np.sin(np.deg2rad(ang))[..., None] * self.irs_elements.orientation
            + np.cos(np.deg2rad(ang))[..., None] * self.irs_elements.normal)

    def with_targets(self, targets) -> "Scenario":
        return replace(self, targets=tuple(targets))


def default_scenario(architecture: str = "active", targets=(), *, n_irs_elements: int = 128,
                     n_irs_sensors: int = 8, n_bs_tx: int = 128, n_bs_rx: int = 8,
                     bs_irs_distance_m: float = 100.0, bs_angle_deg: float = -45.0,
                     controller_distance_m: float = 0.5, carrier_hz: float = 3.0e9,
                     budget: LinkBudget | None = None, **kwargs) -> Scenario:
    """Build a scenario with half-wavelength ULAs everywhere.

    The sensor ULA is colocated with the element ULA on the same axis, shifted
    by half an element spacing so no sensor coincides with an element.  The
    BS sits ``bs_irs_distance_m`` from the IRS centre at ``bs_angle_deg`` with
    both its arrays centred there and facing the IRS.  The controller hangs
    ``controller_distance_m`` in front of the IRS centre.
    """
    lam = carrier_wavelength(carrier_hz)
    d = lam / 2
    axis = np.array([1.0, 0.0, 0.0])
    normal = np.array([0.0, 1.0, 0.0])
    irs_ref = -0.5 * (n_irs_elements - 1) * d * axis
    irs = ArrayGeometry(n_irs_elements, d, lam, irs_ref, axis)
    shift = 0.5 * d if n_irs_elements % 2 == n_irs_sensors % 2 else 0.0
    sens_ref = (-0.5 * (n_irs_sensors - 1) * d + shift) * axis
    sensors = ArrayGeometry(n_irs_sensors, d, lam, sens_ref, axis)

    th = np.deg2rad(bs_angle_deg)
    bs_center = bs_irs_distance_m * (np.sin(th) * axis + np.cos(th) * normal)
    face = -bs_center / np.linalg.norm(bs_center)
    bs_axis = np.array([face[1], -face[0], 0.0])

    def bs_array(n):
        return ArrayGeometry(n, d, lam, bs_center - 0.5 * (n - 1) * d * bs_axis, bs_axis)

    return Scenario(
        bs_tx=bs_array(n_bs_tx),
        bs_rx=bs_array(n_bs_rx),
        irs_elements=irs,
        irs_sensors=sensors,
        controller_position=controller_distance_m * normal,
        bs_irs_distance_m=bs_irs_distance_m,
        bs_angle_deg=bs_angle_deg,
        targets=tuple(targets),
        budget=budget or LinkBudget(),
        architecture=architecture,
        **kwargs,
    )


@dataclass(frozen=True)
class SnapshotSet:
    samples: np.ndarray  # M x T
    schedule: ReflectionSchedule
    architecture: str
    noise_power_w: float

    def __post_init__(self):
        s = np.asarray(self.samples, complex)
        if s.ndim != 2 or s.shape[1] != self.schedule.num_snapshots:
            raise ValueError("samples must be M x T with T matching the schedule")
        if not np.all(np.isfinite(s)):
            raise ValueError("non-finite samples")
        object.__setattr__(self, "samples", s)

    @property
    def num_sensors(self) -> int:
        return self.samples.shape[0]

    @property
    def num_snapshots(self) -> int:
        return self.samples.shape[1]


# ---------------------------------------------------------------- channels


def controller_channel(scn: Scenario) -> np.ndarray:
    """Controller -> IRS elements (near-field in every sensible geometry)."""
    return los_matrix(scn.irs_elements, scn.controller, scn.near_field_factor)[:, 0]


def _nlos_term(rx: ArrayGeometry, rx_angle, tx: ArrayGeometry, tx_angle, gain, amp) -> np.ndarray:
    return gain * amp * np.outer(centered_steering(rx, rx_angle), centered_steering(tx, tx_angle))


def bs_to_irs(scn: Scenario, include_nlos: bool = True) -> np.ndarray:
    """``N_irs x N_bs_tx`` channel, optionally with the extra NLoS paths."""
    h = los_matrix(scn.irs_elements, scn.bs_tx, scn.near_field_factor)
    if include_nlos and scn.nlos_paths:
        d0 = np.linalg.norm(scn.irs_elements.center - scn.bs_tx.center)
        amp = one_way_amplitude(d0, scn.wavelength) * np.exp(-2j * np.pi * d0 / scn.wavelength)
        for p in scn.nlos_paths:
            h = h + _nlos_term(scn.irs_elements, p.irs_angle_deg, scn.bs_tx, p.bs_angle_deg, p.gain, amp)
    return h


def irs_to_bs(scn: Scenario, include_nlos: bool = True) -> np.ndarray:
    """``N_bs_rx x N_irs`` return channel (reciprocal paths towards the receive array)."""
    h = los_matrix(scn.bs_rx, scn.irs_elements, scn.near_field_factor)
    if include_nlos and scn.nlos_paths:
        d0 = np.linalg.norm(scn.irs_elements.center - scn.bs_rx.center)
        amp = one_way_amplitude(d0, scn.wavelength) * np.exp(-2j * np.pi * d0 / scn.wavelength)
        for p in scn.nlos_paths:
            h = h + _nlos_term(scn.bs_rx, p.bs_angle_deg, scn.irs_elements, p.irs_angle_deg, p.gain, amp)
    return h


def default_bs_beam(scn: Scenario) -> np.ndarray:
    """Unit-norm BS transmit beam pointed at the IRS along the LoS path."""
    if not is_near_field(scn.irs_elements, scn.bs_tx, scn.near_field_factor):
        a = centered_steering(scn.bs_tx, scn.bs_tx.angle_from_center(scn.irs_elements.center))
        return np.conj(a) / np.sqrt(scn.bs_tx.num_elements)
    _, _, vh = np.linalg.svd(bs_to_irs(scn, include_nlos=False))
    return np.conj(vh[0])


def _check_beam(beam, n: int) -> np.ndarray:
    w = np.asarray(beam, complex)
    if w.shape != (n,):
        raise ValueError("bs_beam length must equal the BS transmit array size")
    if abs(np.linalg.norm(w) - 1.0) > 1e-9:
        raise ValueError("bs_beam must have unit norm")
    return w


def incident_field(scn: Scenario, bs_beam=None) -> np.ndarray:
    """Illumination arriving at each IRS element from the architecture's transmitter."""
    if scn.architecture == "active":
        return controller_channel(scn)
    w = default_bs_beam(scn) if bs_beam is None else _check_beam(bs_beam, scn.bs_tx.num_elements)
    return bs_to_irs(scn) @ w


# ---------------------------------------------------------------- forward model


def _coerce_schedule(scn: Scenario, sched) -> np.ndarray:
    phi = sched.coefficients if isinstance(sched, ReflectionSchedule) else np.atleast_2d(np.asarray(sched, complex))
    if phi.shape[1] != scn.irs_elements.num_elements:
        raise ValueError("schedule width must equal the IRS element count")
    return phi


def signatures(scn: Scenario, sched, angles_deg, distances_m, bs_beam=None) -> np.ndarray:
    """Noiseless unit-gain response of one target per ``(angle, distance)`` pair.

    Returns an array of shape ``(len(angles), T, M)``.  The received samples of
    target ``k`` are ``alpha_k * signatures[k]``.
    """
    phi = _coerce_schedule(scn, sched)
    ang = np.atleast_1d(np.asarray(angles_deg, float))
    dist = np.broadcast_to(np.asarray(distances_m, float), ang.shape)
    lam = scn.wavelength
    # Target ranges are measured from the IRS centre, so its phases are referenced there too.
    a = centered_steering(scn.irs_elements, ang)  # (K, N)
    pos = scn.target_position(ang, dist)  # (K, 3)
    rx = scn.receiver
    d_irs = one_way_amplitude(dist, lam) * (1.0 if scn.reflected_path else 0.0)
    d_rx = one_way_amplitude(np.linalg.norm(pos - rx.center, axis=-1), lam)
    inc = incident_field(scn, bs_beam)
    forward = (phi * inc) @ a.T  # (T, K): a(theta)^T diag(phi_t) incident

    if scn.architecture == "passive":
        ret = (phi[None, :, :] * a[:, None, :]) @ irs_to_bs(scn).T  # (K, T, M)
        sig = (d_irs ** 2)[:, None, None] * forward.T[:, :, None] * ret
        if scn.bs_target_los:
            sig = sig + _bs_target_term(scn, pos, bs_beam, rx_is_bs=True)[:, None, :]
        return sig

    b = plane_wave_steering(rx, ang)  # (K, M)
    src = (d_irs * d_rx)[:, None] * forward.T  # (K, T)
    if scn.architecture == "active" and scn.direct_echo:
        d_ct = one_way_amplitude(np.linalg.norm(pos - scn.controller_position, axis=-1), lam)
        src = src + (d_ct * d_rx)[:, None]
    sig = src[:, :, None] * b[:, None, :]
    if scn.architecture == "semi_passive" and scn.bs_target_los:
        sig = sig + _bs_target_term(scn, pos, bs_beam, rx_is_bs=False, d_rx=d_rx, b=b)[:, None, :]
    return sig


def _bs_target_term(scn: Scenario, pos, bs_beam, rx_is_bs: bool, d_rx=None, b=None) -> np.ndarray:
    w = default_bs_beam(scn) if bs_beam is None else _check_beam(bs_beam, scn.bs_tx.num_elements)
    lam = scn.wavelength
    out = []
    for k, p in enumerate(pos):
        d_bt = np.linalg.norm(p - scn.bs_tx.center)
        tx_gain = centered_steering(scn.bs_tx, scn.bs_tx.angle_from_center(p)) @ w
        if rx_is_bs:
            out.append(one_way_amplitude(d_bt, lam) ** 2 * tx_gain
                       * centered_steering(scn.bs_rx, scn.bs_rx.angle_from_center(p)))
        else:
            out.append(one_way_amplitude(d_bt, lam) * d_rx[k] * tx_gain * b[k])
    return np.array(out)


def target_gains(scn: Scenario, targets=None) -> np.ndarray:
    """Complex gains ``rho * exp(j phase) * sqrt(P)`` of the targets."""
    targets = scn.targets if targets is None else targets
    return np.array([reflectivity_amplitude(t.rcs_m2, scn.wavelength) * np.exp(1j * t.phase_rad)
                     * np.sqrt(scn.budget.tx_power_w) for t in targets], dtype=complex)


def leakage_response(scn: Scenario, sched, bs_beam=None) -> np.ndarray:
    """Transmitter-to-receiver leakage, ``(T, M)``; zero unless enabled."""
    phi = _coerce_schedule(scn, sched)
    m = scn.receiver.num_elements
    if not scn.direct_leakage or scn.architecture == "passive":
        return np.zeros((phi.shape[0], m), complex)
    if scn.architecture == "active":
        leak = los_matrix(scn.irs_sensors, scn.controller, scn.near_field_factor)[:, 0]
    else:
        w = default_bs_beam(scn) if bs_beam is None else _check_beam(bs_beam, scn.bs_tx.num_elements)
        leak = los_matrix(scn.irs_sensors, scn.bs_tx, scn.near_field_factor) @ w
    return np.tile(np.sqrt(scn.budget.tx_power_w) * leak, (phi.shape[0], 1))


def noiseless_samples(scn: Scenario, sched, bs_beam=None) -> np.ndarray:
    """Noiseless ``M x T`` samples for the scenario's targets."""
    phi = _coerce_schedule(scn, sched)
    out = leakage_response(scn, phi, bs_beam)
    if scn.targets:
        sig = signatures(scn, phi, [t.angle_deg for t in scn.targets],
                         [t.distance_m for t in scn.targets], bs_beam)
        out = out + np.tensordot(target_gains(scn), sig, axes=1)
    return out.T


def complex_noise(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    """Circular complex Gaussian noise with ``E|n|^2 = power``."""
    return np.sqrt(power / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _simulate(scn: Scenario, sched: ReflectionSchedule, rng, bs_beam, arch: str) -> SnapshotSet:
    if scn.architecture != arch:
        raise ValueError(f"scenario architecture is {scn.architecture!r}, expected {arch!r}")
    if sched.num_elements != scn.irs_elements.num_elements:
        raise ValueError("schedule width must equal the IRS element count")
    y = noiseless_samples(scn, sched, bs_beam)
    if rng is not None:
        y = y + complex_noise(rng, y.shape, scn.budget.noise_power_w)
    return SnapshotSet(y, sched, arch, scn.budget.noise_power_w)


def simulate_active(scn: Scenario, sched: ReflectionSchedule, rng=None) -> SnapshotSet:
    """Controller transmits; IRS sensors receive reflected plus direct echoes.

    ``rng=None`` produces noiseless samples.
    """
    return _simulate(scn, sched, rng, None, "active")


def simulate_semi_passive(scn: Scenario, sched: ReflectionSchedule, bs_beam=None, rng=None) -> SnapshotSet:
    """BS transmits via the IRS; IRS sensors receive the double-reflection echo."""
    return _simulate(scn, sched, rng, bs_beam, "semi_passive")


def simulate_passive(scn: Scenario, sched: ReflectionSchedule, bs_beam=None, rng=None) -> SnapshotSet:
    """BS transmits and receives; the echo traverses the IRS twice."""
    return _simulate(scn, sched, rng, bs_beam, "passive")


def simulate(scn: Scenario, sched: ReflectionSchedule, rng=None, bs_beam=None) -> SnapshotSet:
    if scn.architecture == "active":
        return simulate_active(scn, sched, rng)
    if scn.architecture == "semi_passive":
        return simulate_semi_passive(scn, sched, bs_beam, rng)
    return simulate_passive(scn, sched, bs_beam, rng)


def beampattern(scn: Scenario, codeword, probe_angles, bs_beam=None) -> np.ndarray:
    """Noiseless received power (W) for a unit-RCS probe target swept over angle.

    The probe sits at the distance of the scenario's first target.
    """
    grid = np.atleast_1d(np.asarray(probe_angles, float))
    if grid.size == 0:
        raise ValueError("empty probe grid")
    if not scn.targets:
        raise ValueError("scenario needs a target to fix the probe distance")
    cw = np.asarray(codeword, complex)
    if np.max(np.abs(np.abs(cw) - 1)) > 1e-12:
        raise ValueError("codeword must be unit-modulus")
    sig = signatures(scn, cw[None, :], grid, scn.targets[0].distance_m, bs_beam)[:, 0, :]
    gain = reflectivity_amplitude(1.0, scn.wavelength) * np.sqrt(scn.budget.tx_power_w)
    return np.sum(np.abs(gain * sig) ** 2, axis=1)


def align_with_direct_echo(scn: Scenario, codeword, angle_deg: float, distance_m: float | None = None) -> np.ndarray:
    """Rotate ``codeword`` so its reflected echo adds in phase with the direct echo.

    The direct echo of a target at ``(angle_deg, distance_m)`` reaches the
    sensors with the same sensor signature as the reflected echo, so a single
    global phase on the codeword makes the two combine constructively.  Only
    the active architecture has a direct echo; otherwise the codeword is
    returned unchanged.
    """
    cw = np.asarray(codeword, complex)
    if scn.architecture != "active" or not scn.direct_echo or not scn.reflected_path:
        return cw
    dist = scn.targets[0].distance_m if distance_m is None else distance_m
    reflected = signatures(replace(scn, direct_echo=False), cw[None, :], [angle_deg], dist)[0, 0, 0]
    direct = signatures(replace(scn, reflected_path=False), cw[None, :], [angle_deg], dist)[0, 0, 0]
    if reflected == 0 or direct == 0:
        return cw
    return cw * np.exp(1j * (np.angle(direct) - np.angle(reflected)))


# ---------------------------------------------------------------- offline channel acquisition


@dataclass(frozen=True)
class ProbeSet:
    """Pilots of the element on/off probing protocol.

    ``pattern[t, n]`` is 1 when element ``n`` reflects during snapshot ``t``
    and 0 when it is switched off.
    """

    samples: np.ndarray  # M x T
    pattern: np.ndarray  # T x N
    pilot: complex = 1.0
    noise_power_w: float = 0.0


@dataclass(frozen=True)
class StaticChannel:
    leakage: np.ndarray  # M, transmitter -> sensors with all elements off
    cascaded: np.ndarray  # M x N, transmitter -> element n -> sensors


def static_channel(scn: Scenario, source: str = "controller", bs_beam=None) -> StaticChannel:
    """Ground-truth static channels seen by the IRS sensors."""
    coupling = los_matrix(scn.irs_sensors, scn.irs_elements, scn.near_field_factor)
    if source == "controller":
        inc = controller_channel(scn)
        leak = los_matrix(scn.irs_sensors, scn.controller, scn.near_field_factor)[:, 0]
    elif source == "bs":
        w = default_bs_beam(scn) if bs_beam is None else _check_beam(bs_beam, scn.bs_tx.num_elements)
        inc = bs_to_irs(scn) @ w
        leak = los_matrix(scn.irs_sensors, scn.bs_tx, scn.near_field_factor) @ w
    else:
        raise ValueError("source must be 'controller' or 'bs'")
    return StaticChannel(leak, coupling * inc[None, :])


def probe_pattern(n_elements: int, repetitions: int = 1) -> np.ndarray:
    """One all-off row followed by one row per element switched on alone."""
    base = np.vstack([np.zeros((1, n_elements)), np.eye(n_elements)])
    return np.tile(base, (repetitions, 1))


def simulate_channel_probe(scn: Scenario, repetitions: int = 1, rng=None, source: str = "controller",
                           pilot: complex = 1.0, bs_beam=None) -> ProbeSet:
    truth = static_channel(scn, source, bs_beam)
    pattern = probe_pattern(scn.irs_elements.num_elements, repetitions)
    y = pilot * (truth.leakage[:, None] + truth.cascaded @ pattern.T)
    if rng is not None:
        y = y + complex_noise(rng, y.shape, scn.budget.noise_power_w)
    return ProbeSet(y, pattern, pilot, scn.budget.noise_power_w if rng is not None else 0.0)


def estimate_static_channel(pilots: ProbeSet) -> StaticChannel:
    """Least-squares recovery of leakage and per-element cascaded channels."""
    pattern = np.asarray(pilots.pattern, float)
    t, n = pattern.shape
    if t < n + 1:
        raise ValueError(f"insufficient pilots: {t} snapshots for {n} elements (need {n + 1})")
    design = pilots.pilot * np.hstack([np.ones((t, 1)), pattern])
    if np.linalg.matrix_rank(design) < n + 1:
        raise ValueError("insufficient pilots: probing pattern does not excite every element")
    coef, *_ = np.linalg.lstsq(design, np.asarray(pilots.samples).T, rcond=None)
    return StaticChannel(coef[0], coef[1:].T)
