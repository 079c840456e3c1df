"""Simulation and DoA estimation toolkit for IRS-aided radar sensing."""

from irssense.geometry import ArrayGeometry, plane_wave_steering, spherical_wave_vector
from irssense.channel import LinkBudget, NlosPath, Target
from irssense.reflection import ReflectionSchedule
from irssense.simulate import Scenario, SnapshotSet
from irssense.estimate import EstimationResult

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "EstimationResult",
    "LinkBudget",
    "NlosPath",
    "ReflectionSchedule",
    "Scenario",
    "SnapshotSet",
    "Target",
    "plane_wave_steering",
    "spherical_wave_vector",
]
