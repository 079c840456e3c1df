"""Phase-only IRS reflection designs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from irssense.geometry import ArrayGeometry, plane_wave_steering

UNIT_MODULUS_TOL = 1e-12


@dataclass(frozen=True)
class ReflectionSchedule:
    """``T x N`` reflection coefficients, one row per snapshot."""

    coefficients: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coefficients, dtype=complex))
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError("schedule must be a non-empty T x N matrix")
        if np.max(np.abs(np.abs(c) - 1.0)) > UNIT_MODULUS_TOL:
            raise ValueError("reflection coefficients must have unit modulus")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def num_snapshots(self) -> int:
        return self.coefficients.shape[0]

    @property
    def num_elements(self) -> int:
        return self.coefficients.shape[1]

    def cycled(self, num_snapshots: int) -> "ReflectionSchedule":
        """Repeat the rows cyclically until ``num_snapshots`` rows exist."""
        idx = np.arange(num_snapshots) % self.num_snapshots
        return ReflectionSchedule(self.coefficients[idx], self.label)

    def phases(self) -> np.ndarray:
        return np.angle(self.coefficients)

    @classmethod
    def single(cls, codeword, num_snapshots: int = 1, label: str = "static") -> "ReflectionSchedule":
        return cls(np.tile(np.asarray(codeword, complex), (num_snapshots, 1)), label)


def dft_schedule(n_elements: int) -> ReflectionSchedule:
    """Row ``t`` is column ``t`` of the N-point DFT matrix."""
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    k = np.arange(n_elements)
    return ReflectionSchedule(np.exp(-2j * np.pi * np.outer(k, k) / n_elements), "dft")


def directional_codeword(incident, target_angle_deg: float, geom: ArrayGeometry) -> np.ndarray:
    """Phase-align every element's incident wave towards ``target_angle_deg``.

    With this codeword ``a(theta)^T diag(codeword) incident`` equals
    ``sum(abs(incident))``, the largest value any unit-modulus reflection can
    reach.
    """
    inc = np.asarray(incident, dtype=complex)
    if inc.shape != (geom.num_elements,):
        raise ValueError("incident channel length must equal the element count")
    if np.any(inc == 0):
        raise ValueError("incident channel has zero entries; phase undefined")
    a = plane_wave_steering(geom, target_angle_deg)
    return np.exp(-1j * (np.angle(inc) + np.angle(a)))


def composite_gain(codeword, incident, angle_deg, geom: ArrayGeometry):
    """Reflected gain ``a(angle)^T diag(codeword) incident`` for one or many angles."""
    a = plane_wave_steering(geom, angle_deg)
    return a @ (np.asarray(codeword) * np.asarray(incident))


def wide_beam_codeword(region: Sequence[float], n_subarrays: int, geom: ArrayGeometry, incident) -> np.ndarray:
    """Cover ``region`` by pointing contiguous subarrays at evenly spaced angles.

    Block ``i`` carries the directional phase progression towards
    ``lo + (i + 1/2) * (hi - lo) / n_subarrays``.  Each block's constant phase
    offset is chosen so the progression stays continuous across block
    boundaries (a piecewise-linear chirp); with globally referenced blocks the
    sub-beams interfere and leave deep nulls inside the region.
    """
    lo, hi = float(region[0]), float(region[1])
    if not lo < hi:
        raise ValueError("empty angular region")
    inc = np.asarray(incident, dtype=complex)
    n = geom.num_elements
    if inc.shape != (n,):
        raise ValueError("incident channel length must equal the element count")
    if np.any(inc == 0):
        raise ValueError("incident channel has zero entries; phase undefined")
    if n_subarrays < 1 or n % n_subarrays:
        raise ValueError(f"n_subarrays={n_subarrays} must divide the element count {n}")
    width = (hi - lo) / n_subarrays
    centers = lo + (np.arange(n_subarrays) + 0.5) * width
    slopes = -2 * np.pi * (geom.spacing / geom.wavelength) * np.sin(np.deg2rad(centers))
    per_element = np.repeat(slopes, n // n_subarrays)
    progression = np.concatenate(([0.0], np.cumsum(per_element[:-1])))
    return np.exp(1j * (progression - np.angle(inc)))


def _argmax_lowest(values, rtol: float = 1e-9) -> int:
    """Index of the maximum; near-ties resolve to the lowest index."""
    v = np.asarray(values, dtype=float)
    best = v.max()
    return int(np.flatnonzero(v >= best - rtol * abs(best))[0])


@dataclass(frozen=True)
class HierarchicalPlan:
    """Wide-then-narrow two-stage beam scan.

    Stage 1 probes one wide beam per sector; the sector whose echo carries the
    most energy wins (near-ties go to the lower sector index). Stage 2 sweeps
    ``fine_per_sector`` narrow beams across the winning sector.
    """

    sectors: tuple
    stage1: ReflectionSchedule
    fine_per_sector: int
    geom: ArrayGeometry
    incident: np.ndarray

    @property
    def total_codewords(self) -> int:
        return len(self.sectors) + self.fine_per_sector

    def fine_angles(self, sector_index: int) -> np.ndarray:
        lo, hi = self.sectors[sector_index]
        step = (hi - lo) / self.fine_per_sector
        return lo + (np.arange(self.fine_per_sector) + 0.5) * step

    def fine_schedule(self, sector_index: int) -> ReflectionSchedule:
        rows = [directional_codeword(self.incident, th, self.geom) for th in self.fine_angles(sector_index)]
        return ReflectionSchedule(np.array(rows), f"fine-sector{sector_index}")

    def select_sector(self, energies) -> int:
        if len(energies) != len(self.sectors):
            raise ValueError("one energy per sector expected")
        return _argmax_lowest(energies)

    def select_angle(self, sector_index: int, energies) -> float:
        return float(self.fine_angles(sector_index)[_argmax_lowest(energies)])

    def run(self, measure: Callable[[np.ndarray], float]) -> tuple[int, float]:
        """Execute both stages with ``measure(codeword) -> echo energy``."""
        sector = self.select_sector([measure(c) for c in self.stage1.coefficients])
        fine = self.fine_schedule(sector).coefficients
        return sector, self.select_angle(sector, [measure(c) for c in fine])


def hierarchical_plan(n_sectors: int, fine_per_sector: int, geom: ArrayGeometry, incident,
                      span: Sequence[float] = (-60.0, 60.0), n_subarrays: int = 8,
                      snapshot_budget: int | None = None) -> HierarchicalPlan:
    if n_sectors < 1:
        raise ValueError("at least one sector is required")
    if fine_per_sector < 1:
        raise ValueError("at least one fine beam is required")
    if snapshot_budget is not None and n_sectors + fine_per_sector > snapshot_budget:
        raise ValueError("plan exceeds the snapshot budget")
    edges = np.linspace(span[0], span[1], n_sectors + 1)
    sectors = tuple((float(edges[i]), float(edges[i + 1])) for i in range(n_sectors))
    inc = np.asarray(incident, dtype=complex)
    rows = [wide_beam_codeword(s, n_subarrays, geom, inc) for s in sectors]
    return HierarchicalPlan(sectors, ReflectionSchedule(np.array(rows), "wide"), fine_per_sector, geom, inc)
