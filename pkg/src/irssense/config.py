"""Experiment configuration: a YAML document validated into an :class:`ExperimentConfig`.

Schema (every key optional; unknown keys are rejected)::

    experiment: rmse_sweep          # beampattern | rmse_sweep | estimate | crlb | codebook
    architecture: active            # run a single architecture ...
    architectures: [active, passive]  # ... or several (default: all three)
    algorithms: [music, esprit]     # default: music+esprit, or mle for passive
    distances_m: [5, 10, 15]        # rmse_sweep only; default 5..50 step 5
    trials: 200
    master_seed: 0
    output_path: out.csv            # default: standard output
    scenario:
      n_irs_elements: 128
      n_irs_sensors: 8
      n_bs_tx: 128
      n_bs_rx: 8
      bs_irs_distance_m: 100.0
      bs_angle_deg: -45.0
      controller_distance_m: 0.5
      carrier_hz: 3.0e9
      snapshots: 128
      tx_power_w: 1.0
      noise_power_w: 1.0e-19
      direct_echo: true
      reflected_path: true
      direct_leakage: false
      bs_target_los: false
      nlos_paths: [{irs_angle_deg: 20, bs_angle_deg: 30, gain: 0.5}]
      targets: [{angle_deg: 60, distance_m: 10, rcs_m2: 1, phase_rad: 0}]
    estimator:
      music_grid_step_deg: 0.1
      mle_grid_step_deg: null       # 0.1 for one target, 1.0 for two
      ambiguity_span_deg: 5.0
      gain_model: per_snapshot      # or stacked
    codebook:
      kind: dft                     # dft | directional | wide_beam | hierarchical
      angle_deg: 30.0
      region_deg: [-60, 60]
      n_subarrays: 8
      n_sectors: 4
      fine_per_sector: 16
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from irssense.channel import LinkBudget, NlosPath, Target
from irssense.estimate import GAIN_MODELS
from irssense.simulate import ARCHITECTURES, Scenario, default_scenario

EXPERIMENTS = ("beampattern", "rmse_sweep", "estimate", "crlb", "codebook")
ALGORITHMS = ("music", "esprit", "mle")
SUBSPACE_ALGORITHMS = ("music", "esprit")

DEFAULT_DISTANCES_M = tuple(float(d) for d in range(5, 55, 5))
DEFAULT_TARGET_DISTANCE_M = 10.0
# Targets used when the config lists none.
DEFAULT_TARGET_ANGLES = {
    "beampattern": (30.0,),
    "rmse_sweep": (60.0, 65.0),
    "estimate": (60.0, 65.0),
    "crlb": (30.0,),
    "codebook": (30.0,),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TargetSpec(_Strict):
    angle_deg: float = Field(gt=-90, lt=90)
    distance_m: float = Field(default=DEFAULT_TARGET_DISTANCE_M, gt=0)
    rcs_m2: float = Field(default=1.0, gt=0)
    phase_rad: float = 0.0


class NlosSpec(_Strict):
    irs_angle_deg: float = Field(gt=-90, lt=90)
    bs_angle_deg: float = Field(gt=-90, lt=90)
    gain: complex = 0.5

    @field_validator("gain", mode="before")
    @classmethod
    def _parse_gain(cls, v):
        return complex(v) if isinstance(v, str) else v


class ScenarioSpec(_Strict):
    n_irs_elements: int = Field(default=128, ge=1)
    n_irs_sensors: int = Field(default=8, ge=2)
    n_bs_tx: int = Field(default=128, ge=1)
    n_bs_rx: int = Field(default=8, ge=1)
    bs_irs_distance_m: float = Field(default=100.0, gt=0)
    bs_angle_deg: float = Field(default=-45.0, gt=-90, lt=90)
    controller_distance_m: float = Field(default=0.5, gt=0)
    carrier_hz: float = Field(default=3.0e9, gt=0)
    snapshots: int = Field(default=128, ge=1)
    tx_power_w: float = Field(default=LinkBudget.tx_power_w, gt=0)
    noise_power_w: float = Field(default=LinkBudget.noise_power_w, gt=0)
    direct_echo: bool = True
    reflected_path: bool = True
    direct_leakage: bool = False
    bs_target_los: bool = False
    nlos_paths: tuple[NlosSpec, ...] = ()
    targets: tuple[TargetSpec, ...] = ()


class EstimatorSpec(_Strict):
    music_grid_step_deg: float = Field(default=0.1, gt=0, le=1)
    mle_grid_step_deg: float | None = Field(default=None, gt=0, le=5)
    ambiguity_span_deg: float = Field(default=5.0, gt=0)
    gain_model: Literal[GAIN_MODELS] = "per_snapshot"


class CodebookSpec(_Strict):
    kind: Literal["dft", "directional", "wide_beam", "hierarchical"] = "dft"
    angle_deg: float = Field(default=30.0, gt=-90, lt=90)
    region_deg: tuple[float, float] = (-60.0, 60.0)
    n_subarrays: int = Field(default=8, ge=1)
    n_sectors: int = Field(default=4, ge=1)
    fine_per_sector: int = Field(default=16, ge=1)

    @field_validator("region_deg")
    @classmethod
    def _ordered(cls, v):
        if not -90 < v[0] < v[1] < 90:
            raise ValueError("region must satisfy -90 < lo < hi < 90")
        return v


class ExperimentConfig(_Strict):
    experiment: Literal[EXPERIMENTS] = "rmse_sweep"
    architecture: Literal[ARCHITECTURES] | None = None
    architectures: tuple[Literal[ARCHITECTURES], ...] | None = None
    algorithms: tuple[Literal[ALGORITHMS], ...] | None = None
    distances_m: tuple[float, ...] = DEFAULT_DISTANCES_M
    trials: int = Field(default=200, ge=1)
    master_seed: int = Field(default=0, ge=0, lt=2 ** 64)
    output_path: Path | None = None
    scenario: ScenarioSpec = ScenarioSpec()
    estimator: EstimatorSpec = EstimatorSpec()
    codebook: CodebookSpec = CodebookSpec()

    @field_validator("distances_m")
    @classmethod
    def _ascending(cls, v):
        if not v:
            raise ValueError("at least one distance is required")
        if any(d <= 0 for d in v):
            raise ValueError("distances must be strictly positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("distances must be strictly ascending")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if self.architecture is not None and self.architectures is not None:
            raise ValueError("architectures: give either architecture or architectures, not both")
        if self.architectures is not None and len(self.architectures) == 0:
            raise ValueError("architectures: must not be empty")
        if self.algorithms is not None:
            if len(self.algorithms) == 0:
                raise ValueError("algorithms: must not be empty")
            if len(set(self.algorithms)) != len(self.algorithms):
                raise ValueError("algorithms: must not repeat")
            for arch in self.run_architectures:
                if arch == "passive":
                    bad = [a for a in self.algorithms if a in SUBSPACE_ALGORITHMS]
                    if bad:
                        raise ValueError(f"algorithms: {', '.join(bad)} cannot run on the passive architecture: "
                                         "the BS receiver sees a single arrival direction; use mle")
        k = len(self.target_angles)
        used = {a for arch in self.run_architectures for a in self.algorithms_for(arch)}
        if "mle" in used and k > 2:
            raise ValueError("scenario.targets: mle supports at most two targets")
        if used & set(SUBSPACE_ALGORITHMS) and k >= self.scenario.n_irs_sensors:
            raise ValueError("scenario.targets: subspace methods need fewer targets than sensors")
        if self.experiment in ("rmse_sweep", "estimate", "crlb") and \
                self.scenario.snapshots < self.scenario.n_irs_elements:
            raise ValueError("scenario.snapshots: must cover one DFT cycle (>= n_irs_elements)")
        return self

    @property
    def run_architectures(self) -> tuple[str, ...]:
        if self.architecture is not None:
            return (self.architecture,)
        return self.architectures or ARCHITECTURES

    def algorithms_for(self, architecture: str) -> tuple[str, ...]:
        if self.algorithms is not None:
            return self.algorithms
        return ("mle",) if architecture == "passive" else SUBSPACE_ALGORITHMS

    @property
    def target_angles(self) -> tuple[float, ...]:
        if self.scenario.targets:
            return tuple(t.angle_deg for t in self.scenario.targets)
        return DEFAULT_TARGET_ANGLES[self.experiment]

    def targets(self, distance_m: float | None = None) -> tuple[Target, ...]:
        """Scenario targets, all moved to ``distance_m`` when given."""
        specs = self.scenario.targets or tuple(TargetSpec(angle_deg=a) for a in self.target_angles)
        return tuple(Target(t.angle_deg, distance_m if distance_m is not None else t.distance_m,
                            t.rcs_m2, t.phase_rad) for t in specs)

    def build_scenario(self, architecture: str, distance_m: float | None = None) -> Scenario:
        s = self.scenario
        return default_scenario(
            architecture,
            self.targets(distance_m),
            n_irs_elements=s.n_irs_elements,
            n_irs_sensors=s.n_irs_sensors,
            n_bs_tx=s.n_bs_tx,
            n_bs_rx=s.n_bs_rx,
            bs_irs_distance_m=s.bs_irs_distance_m,
            bs_angle_deg=s.bs_angle_deg,
            controller_distance_m=s.controller_distance_m,
            carrier_hz=s.carrier_hz,
            budget=LinkBudget(s.tx_power_w, s.noise_power_w),
            snapshots=s.snapshots,
            master_seed=self.master_seed,
            nlos_paths=tuple(NlosPath(p.irs_angle_deg, p.bs_angle_deg, p.gain) for p in s.nlos_paths),
            direct_echo=s.direct_echo,
            reflected_path=s.reflected_path,
            direct_leakage=s.direct_leakage,
            bs_target_los=s.bs_target_los,
        )


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        msg = e["msg"].removeprefix("Value error, ")
        where = ".".join(str(p) for p in e["loc"])
        lines.append(f"{where}: {msg}" if where else msg)
    return "; ".join(lines)


def parse_config(data, **overrides) -> ExperimentConfig:
    """Validate a mapping (as read from YAML); ``overrides`` replace top-level keys.

    An ``architecture`` override also discards any ``architectures`` list.
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a mapping")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    merged = {**data, **overrides}
    if "architecture" in overrides:
        merged.pop("architectures", None)
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path, **overrides) -> ExperimentConfig:
    """Read and validate a YAML config file.

    Raises ``OSError`` when the file cannot be read and :class:`ConfigError`
    for malformed YAML or schema and invariant violations.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"config: malformed YAML ({err})") from None
    return parse_config(data, **overrides)
