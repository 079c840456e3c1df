"""Experiment runners behind the command line: each returns CSV header and rows."""

from __future__ import annotations

import csv
import io
import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields, replace
from pathlib import Path

import numpy as np

from irssense.config import ExperimentConfig
from irssense.estimate import (UnidentifiableError, angle_grid, crlb_numeric, esprit_estimate, mle_estimate,
                               mle_grid, music_estimate, sample_covariance)
from irssense.reflection import (ReflectionSchedule, dft_schedule, directional_codeword, hierarchical_plan,
                                 wide_beam_codeword)
from irssense.seeding import stream
from irssense.simulate import Scenario, SnapshotSet, align_with_direct_echo, beampattern, incident_field, simulate

BEAMPATTERN_STEP_DEG = 0.1


def worker_count() -> int:
    """Trial workers allowed by ``IRSSENSE_THREADS`` (0 or unset: one per CPU)."""
    raw = os.environ.get("IRSSENSE_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"IRSSENSE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("IRSSENSE_THREADS must be >= 0")
    return n or os.cpu_count() or 1


def _ordered_map(fn, items, workers: int) -> list:
    """``map`` whose results come back in input order however many workers run."""
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(header, rows, path: Path | None) -> str:
    """Write CSV text to ``path`` (returned as well, for standard output when ``path`` is None)."""
    text = render_csv(header, rows)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def sweep_schedule(scn: Scenario) -> ReflectionSchedule:
    return dft_schedule(scn.irs_elements.num_elements).cycled(scn.snapshots)


# ---------------------------------------------------------------- beampattern


def run_beampattern(cfg: ExperimentConfig):
    """Noiseless beampattern of the directional codeword towards the first target.

    For the active architecture the codeword also carries the global phase that
    adds the reflected echo to the direct one.
    """
    grid = angle_grid(BEAMPATTERN_STEP_DEG)
    rows = []
    for arch in cfg.run_architectures:
        scn = cfg.build_scenario(arch)
        aim = scn.targets[0].angle_deg
        codeword = align_with_direct_echo(scn, directional_codeword(incident_field(scn), aim, scn.irs_elements), aim)
        power = beampattern(scn, codeword, grid)
        with np.errstate(divide="ignore"):
            dbw = 10 * np.log10(power)
        rows.extend((float(a), arch, float(p)) for a, p in zip(grid, dbw))
    return ("angle_deg", "architecture", "power_dbw"), rows


# ---------------------------------------------------------------- RMSE sweep


@dataclass(frozen=True)
class RmseRecord:
    distance_m: float
    architecture: str
    algorithm: str
    rmse_deg: float
    trials: int
    resolved_fraction: float

    def __post_init__(self):
        if not self.rmse_deg >= 0:
            raise ValueError("rmse_deg must be non-negative")
        if not 0 <= self.resolved_fraction <= 1:
            raise ValueError("resolved_fraction must lie in [0, 1]")


RMSE_HEADER = tuple(f.name for f in fields(RmseRecord))


def matched_squared_error(estimates, truth) -> float:
    """Sum of squared errors under the assignment minimising total absolute error."""
    est = np.asarray(estimates, float)
    tru = np.asarray(truth, float)
    best = min(itertools.permutations(range(tru.size)), key=lambda p: np.sum(np.abs(est[list(p)] - tru)))
    return float(np.sum((est[list(best)] - tru) ** 2))


def estimate_all(cfg: ExperimentConfig, scn: Scenario, snaps: SnapshotSet, algorithms, precomputed=None) -> dict:
    """Run each requested estimator on one record."""
    k = len(scn.targets)
    est = cfg.estimator
    out = {}
    r = None
    for alg in algorithms:
        if alg == "mle":
            out[alg] = mle_estimate(snaps, scn, k, est.mle_grid_step_deg, est.ambiguity_span_deg, est.gain_model,
                                    precomputed=precomputed)
            continue
        if r is None:
            r = sample_covariance(snaps)
        if alg == "music":
            out[alg] = music_estimate(r, scn.irs_sensors, k, est.music_grid_step_deg,
                                      ambiguity_span_deg=est.ambiguity_span_deg)
        else:
            out[alg] = esprit_estimate(r, scn.irs_sensors, k)
    return out


def _sweep_tag(distance_m: float) -> str:
    # Shared by all architectures at a distance, so their trials see common random numbers.
    return f"rmse_sweep/distance={distance_m!r}"


def run_rmse_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[RmseRecord]:
    """Monte Carlo RMSE per distance, architecture and algorithm.

    Every trial redraws the target phases and the noise from its own stream
    ``stream(master_seed, trial, tag)``; results are reduced in trial order, so
    the output does not depend on the number of workers.
    """
    workers = worker_count() if workers is None else workers
    records = []
    for dist in cfg.distances_m:
        tag = _sweep_tag(dist)
        for arch in cfg.run_architectures:
            scn = cfg.build_scenario(arch, dist)
            sched = sweep_schedule(scn)
            algorithms = cfg.algorithms_for(arch)
            truth = np.array([t.angle_deg for t in scn.targets])
            precomputed = (mle_grid(scn, sched, len(truth), cfg.estimator.gain_model, cfg.estimator.mle_grid_step_deg)
                           if "mle" in algorithms else None)

            def trial(index, scn=scn, sched=sched, algorithms=algorithms, truth=truth, precomputed=precomputed):
                rng = stream(cfg.master_seed, index, tag)
                phases = rng.uniform(0.0, 2 * np.pi, truth.size)
                trial_scn = scn.with_targets([replace(t, phase_rad=float(p)) for t, p in zip(scn.targets, phases)])
                results = estimate_all(cfg, trial_scn, simulate(trial_scn, sched, rng), algorithms, precomputed)
                return {a: (matched_squared_error(res.angles_deg, truth), not res.ambiguity_flag)
                        for a, res in results.items()}

            outcomes = _ordered_map(trial, range(cfg.trials), workers)
            for alg in algorithms:
                sq = sum(o[alg][0] for o in outcomes)
                resolved = sum(o[alg][1] for o in outcomes)
                records.append(RmseRecord(float(dist), arch, alg, float(np.sqrt(sq / (cfg.trials * truth.size))),
                                          cfg.trials, resolved / cfg.trials))
    return records


def rmse_rows(records):
    return RMSE_HEADER, [astuple(r) for r in records]


# ---------------------------------------------------------------- single-record estimate


@dataclass
class EstimateRun:
    architecture: str
    snapshots: SnapshotSet
    results: dict


def run_estimate(cfg: ExperimentConfig) -> list[EstimateRun]:
    """Simulate one record per architecture (trial 0) and estimate the target angles."""
    runs = []
    for arch in cfg.run_architectures:
        scn = cfg.build_scenario(arch)
        snaps = simulate(scn, sweep_schedule(scn), stream(cfg.master_seed, 0, f"estimate/{arch}"))
        runs.append(EstimateRun(arch, snaps, estimate_all(cfg, scn, snaps, cfg.algorithms_for(arch))))
    return runs


def estimate_rows(cfg: ExperimentConfig, runs):
    truth = sorted(cfg.target_angles)
    rows = []
    for run in runs:
        for alg, res in run.results.items():
            for i, (angle, true) in enumerate(zip(res.angles_deg, truth)):
                rows.append((run.architecture, alg, i, float(angle), float(true), bool(res.ambiguity_flag)))
    return ("architecture", "algorithm", "target", "angle_deg", "true_angle_deg", "ambiguity_flag"), rows


def spectrum_rows(res):
    grid, values = res.spectrum
    return ("angle_deg", "value"), [(float(a), float(v)) for a, v in zip(grid, values)]


def snapshot_rows(snaps: SnapshotSet):
    y = snaps.samples
    rows = [(t, m, float(y[m, t].real), float(y[m, t].imag))
            for t in range(y.shape[1]) for m in range(y.shape[0])]
    return ("snapshot", "element", "real", "imag"), rows


# ---------------------------------------------------------------- CRLB


def run_crlb(cfg: ExperimentConfig):
    """Single-target angle CRLB for every configured target under the DFT schedule."""
    rows = []
    for arch in cfg.run_architectures:
        scn = cfg.build_scenario(arch)
        sched = sweep_schedule(scn)
        for i, tgt in enumerate(scn.targets):
            try:
                bound = crlb_numeric(scn, sched, i, gain_model=cfg.estimator.gain_model)
                identifiable = True
            except UnidentifiableError:
                bound, identifiable = float("inf"), False
            rows.append((arch, i, tgt.angle_deg, tgt.distance_m, bound, float(np.sqrt(bound)), identifiable))
    header = ("architecture", "target", "angle_deg", "distance_m", "crlb_deg2", "crlb_std_deg", "identifiable")
    return header, rows


# ---------------------------------------------------------------- codebook


def codebook_schedules(cfg: ExperimentConfig, scn: Scenario) -> list[ReflectionSchedule]:
    spec = cfg.codebook
    geom = scn.irs_elements
    inc = incident_field(scn)
    if spec.kind == "dft":
        return [dft_schedule(geom.num_elements)]
    if spec.kind == "directional":
        return [ReflectionSchedule.single(directional_codeword(inc, spec.angle_deg, geom), 1, "directional")]
    if spec.kind == "wide_beam":
        return [ReflectionSchedule.single(wide_beam_codeword(spec.region_deg, spec.n_subarrays, geom, inc), 1,
                                          "wide")]
    plan = hierarchical_plan(spec.n_sectors, spec.fine_per_sector, geom, inc, spec.region_deg, spec.n_subarrays)
    return [plan.stage1] + [plan.fine_schedule(i) for i in range(spec.n_sectors)]


def run_codebook(cfg: ExperimentConfig):
    """Per-element reflection phases (radians) of the configured codebook."""
    rows = []
    for arch in cfg.run_architectures:
        scn = cfg.build_scenario(arch)
        for sched in codebook_schedules(cfg, scn):
            for t, row in enumerate(sched.phases()):
                rows.extend((arch, sched.label, t, n, float(p)) for n, p in enumerate(row))
    return ("architecture", "label", "snapshot", "element", "phase_rad"), rows
