"""DoA estimators (MUSIC, LS-ESPRIT, concentrated MLE) and a numerical CRLB."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from irssense.geometry import ArrayGeometry, plane_wave_steering
from irssense.simulate import Scenario, SnapshotSet, leakage_response, signatures, target_gains

AMBIGUITY_SPAN_DEG = 5.0
NEAR_OPTIMAL_RTOL = 1e-3
MIN_SEPARATION_DEG = 1.0
GOLDEN_TOL_DEG = 1e-4
_INV_PHI = (np.sqrt(5) - 1) / 2


class UnidentifiableError(ValueError):
    """Raised when the Fisher information matrix is singular."""


@dataclass
class EstimationResult:
    angles_deg: np.ndarray
    spectrum: tuple | None = None  # (grid_deg, values)
    ambiguity_flag: bool = False
    diagnostics: dict = field(default_factory=dict)


def angle_grid(step_deg: float, limit_deg: float = 90.0) -> np.ndarray:
    """Uniform grid strictly inside ``(-limit, limit)``."""
    n = int(round(2 * limit_deg / step_deg))
    return -limit_deg + step_deg * np.arange(1, n)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL_DEG) -> float:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _span(points: np.ndarray) -> float:
    pts = np.atleast_2d(points)
    if pts.shape[0] == 0:
        return 0.0
    return float(np.max(pts.max(axis=0) - pts.min(axis=0)))


def sample_covariance(snapshots) -> np.ndarray:
    y = snapshots.samples if isinstance(snapshots, SnapshotSet) else np.asarray(snapshots, complex)
    if y.ndim == 1:
        y = y[:, None]
    r = y @ y.conj().T / y.shape[1]
    return 0.5 * (r + r.conj().T)


def _check_covariance(r, m: int) -> np.ndarray:
    r = np.asarray(r, complex)
    if r.shape != (m, m):
        raise ValueError(f"covariance must be {m} x {m}")
    return 0.5 * (r + r.conj().T)


# ---------------------------------------------------------------- MUSIC


def music_spectrum(r, geom: ArrayGeometry, k_sources: int, grid_deg) -> np.ndarray:
    _, noise = _noise_subspace(r, geom, k_sources)
    a = plane_wave_steering(geom, grid_deg)
    return 1.0 / np.maximum(np.sum(np.abs(a.conj() @ noise) ** 2, axis=-1), np.finfo(float).tiny)


def _noise_subspace(r, geom: ArrayGeometry, k_sources: int):
    m = geom.num_elements
    if not 0 < k_sources < m:
        raise ValueError(f"k_sources must satisfy 0 < K < M={m}")
    r = _check_covariance(r, m)
    # Trace normalisation makes the eigenvectors invariant to positive scaling of R.
    scale = np.real(np.trace(r))
    w, v = np.linalg.eigh(r / scale if scale > 0 else r)
    return w, v[:, : m - k_sources]


def _local_peaks(values: np.ndarray) -> np.ndarray:
    """Interior local maxima, highest first.

    Grid endpoints are never peaks: near +-90 deg the steering vectors of a
    half-wavelength ULA alias onto each other.
    """
    inner = values[1:-1]
    idx = 1 + np.flatnonzero((inner >= values[:-2]) & (inner > values[2:]))
    return idx[np.argsort(values[idx])[::-1]]


def music_estimate(r, geom: ArrayGeometry, k_sources: int, grid_step_deg: float = 0.1,
                   min_separation_deg: float = MIN_SEPARATION_DEG,
                   ambiguity_span_deg: float = AMBIGUITY_SPAN_DEG) -> EstimationResult:
    """Spectral MUSIC with golden-section peak refinement."""
    eigvals, noise = _noise_subspace(r, geom, k_sources)
    grid = angle_grid(grid_step_deg)
    a = plane_wave_steering(geom, grid)
    spec = 1.0 / np.maximum(np.sum(np.abs(a.conj() @ noise) ** 2, axis=-1), np.finfo(float).tiny)

    def pseudo(theta):
        v = plane_wave_steering(geom, theta).conj() @ noise
        return 1.0 / max(float(np.sum(np.abs(v) ** 2)), np.finfo(float).tiny)

    chosen: list[int] = []
    for i in _local_peaks(spec):
        if all(abs(grid[i] - grid[j]) >= min_separation_deg for j in chosen):
            chosen.append(i)
        if len(chosen) == k_sources:
            break
    missing = len(chosen) < k_sources
    if missing:
        for i in np.argsort(spec)[::-1]:
            if i not in chosen:
                chosen.append(i)
            if len(chosen) == k_sources:
                break

    lim = 90.0 - 1e-9
    angles = []
    for i in chosen:
        lo, hi = max(grid[i] - grid_step_deg, -lim), min(grid[i] + grid_step_deg, lim)
        angles.append(golden_section_max(pseudo, lo, hi))

    near = grid[spec >= spec.max() * (1 - NEAR_OPTIMAL_RTOL)]
    flag = missing or _span(near[:, None]) > ambiguity_span_deg
    return EstimationResult(np.sort(angles), (grid, spec), bool(flag),
                            {"eigenvalues": np.sort(eigvals)[::-1], "separated_peaks_missing": missing})


# ---------------------------------------------------------------- ESPRIT


def esprit_estimate(r, geom: ArrayGeometry, k_sources: int) -> EstimationResult:
    """Least-squares ESPRIT on a ULA (unit displacement)."""
    m = geom.num_elements
    if not 0 < k_sources < m:
        raise ValueError(f"ESPRIT needs M >= K + 1 (M={m}, K={k_sources})")
    r = _check_covariance(r, m)
    w, v = np.linalg.eigh(r)
    es = v[:, ::-1][:, :k_sources]
    psi, *_ = np.linalg.lstsq(es[:-1], es[1:], rcond=None)
    phases = np.angle(np.linalg.eigvals(psi))
    s = phases * geom.wavelength / (2 * np.pi * geom.spacing)
    out_of_range = bool(np.any(np.abs(s) >= 1))
    lim = np.sin(np.deg2rad(90.0 - 1e-9))
    angles = np.rad2deg(np.arcsin(np.clip(s, -lim, lim)))
    return EstimationResult(np.sort(angles), None, out_of_range,
                            {"eigenvalues": w[::-1], "out_of_range": out_of_range})


# ---------------------------------------------------------------- MLE

GAIN_MODELS = ("per_snapshot", "stacked")


def _design(scn: Scenario, sched, angles, distance) -> np.ndarray:
    """Unit-gain signatures, shape ``(len(angles), T, M)``."""
    return signatures(scn, sched, angles, distance)


def _residual(y: np.ndarray, sig: np.ndarray, gain_model: str) -> float:
    """Least-squares residual of ``y`` (T x M) on the signatures ``sig`` (K x T x M)."""
    if gain_model == "stacked":
        a = sig.reshape(sig.shape[0], -1).T
        coef, *_ = np.linalg.lstsq(a, y.reshape(-1), rcond=None)
        return float(np.sum(np.abs(y.reshape(-1) - a @ coef) ** 2))
    a = np.transpose(sig, (1, 2, 0))  # T x M x K
    coef = np.linalg.pinv(a, rcond=1e-10) @ y[:, :, None]
    return float(np.sum(np.abs(y[:, :, None] - a @ coef) ** 2))


class LikelihoodGrid:
    """Trial-independent part of the grid likelihood for one set of signatures.

    ``sig`` is ``G x T x M``: one unit-gain signature per candidate angle.
    Everything that does not depend on the observation (signature norms,
    pairwise Gram matrices) is computed once, so evaluating many noisy records
    against the same scenario only costs the projections.
    """

    def __init__(self, sig: np.ndarray, k_sources: int, gain_model: str = "per_snapshot"):
        if k_sources not in (1, 2):
            raise ValueError("the grid likelihood supports one or two targets")
        if gain_model not in GAIN_MODELS:
            raise ValueError(f"gain_model must be one of {GAIN_MODELS}")
        self.k_sources = k_sources
        self.gain_model = gain_model
        # Stacked gains see the whole record as one long snapshot.
        self._sig = sig.reshape(sig.shape[0], 1, -1) if gain_model == "stacked" else sig
        norms = np.sum(np.abs(self._sig) ** 2, axis=2).T  # (T, G)
        self._norms = norms
        if k_sources == 2:
            gram = np.einsum("itm,jtm->tij", self._sig.conj(), self._sig)
            det = norms[:, :, None] * norms[:, None, :] - np.abs(gram) ** 2
            self._degenerate = ~(det > 1e-10 * norms[:, :, None] * norms[:, None, :])
            safe = np.where(self._degenerate, np.inf, det)
            self._w_i = norms[:, None, :] / safe  # weights |p_i|^2
            self._w_j = norms[:, :, None] / safe
            self._w_ij = gram / safe

    def surface(self, y: np.ndarray) -> np.ndarray:
        """Residual power of ``y`` (T x M) for every candidate (K=1) or pair (K=2).

        For K=2 the result is ``G x G`` and meaningful above the diagonal.
        Collinear pairs fall back to the better single signature.
        """
        y = y.reshape(1, -1) if self.gain_model == "stacked" else y
        energy = float(np.sum(np.abs(y) ** 2))
        proj = np.einsum("gtm,tm->tg", self._sig.conj(), y)
        power = np.abs(proj) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            single = np.where(self._norms > 0, power / self._norms, 0.0)
        if self.k_sources == 1:
            return energy - single.sum(axis=0)
        captured = (np.einsum("tij,ti->ij", self._w_i, power)
                    + np.einsum("tij,tj->ij", self._w_j, power)
                    - 2 * np.real(np.einsum("tij,ti,tj->ij", self._w_ij, proj.conj(), proj)))
        if self._degenerate.any():
            best = np.maximum(single[:, :, None], single[:, None, :])
            captured = captured + np.where(self._degenerate, best, 0.0).sum(axis=0)
        return energy - captured


def likelihood_surface(y: np.ndarray, sig: np.ndarray, k_sources: int, gain_model: str = "per_snapshot"):
    """Residual power of ``y`` (T x M) over the candidate signatures ``sig`` (G x T x M)."""
    return LikelihoodGrid(sig, k_sources, gain_model).surface(y)


def mle_grid(scn: Scenario, sched, k_sources: int, gain_model: str = "per_snapshot",
             grid_step_deg: float | None = None) -> tuple[np.ndarray, LikelihoodGrid]:
    """Candidate angles and precomputed likelihood for :func:`mle_estimate`."""
    if not scn.targets:
        raise ValueError("scenario targets are needed to fix the candidate range")
    step = grid_step_deg or (0.1 if k_sources == 1 else 1.0)
    grid = angle_grid(step)
    dist = float(np.mean([t.distance_m for t in scn.targets]))
    return grid, LikelihoodGrid(_design(scn, sched, grid, dist), k_sources, gain_model)


def mle_estimate(snapshots: SnapshotSet, scn: Scenario, k_sources: int, grid_step_deg: float | None = None,
                 ambiguity_span_deg: float = AMBIGUITY_SPAN_DEG, gain_model: str = "per_snapshot",
                 precomputed: tuple[np.ndarray, LikelihoodGrid] | None = None) -> EstimationResult:
    """Concentrated maximum-likelihood DoA using the architecture's forward model.

    Echo gains are profiled out by least squares, either one complex gain per
    target and snapshot (``"per_snapshot"``, the unknown-waveform model) or one
    per target for the whole record (``"stacked"``).  The residual is then
    minimised over angles: exhaustively on a grid (0.1 deg for one target,
    1 deg for two) followed by local refinement.  Candidate echoes sit at the
    mean range of the scenario's targets.

    ``ambiguity_flag`` is set when the grid points whose residual lies within
    0.1 % of the best one span more than ``ambiguity_span_deg``.  Pass the
    output of :func:`mle_grid` as ``precomputed`` to reuse it across records.
    """
    if snapshots.architecture != scn.architecture:
        raise ValueError(f"model mismatch: snapshots are {snapshots.architecture!r}, "
                         f"scenario is {scn.architecture!r}")
    if k_sources not in (1, 2):
        raise ValueError("mle_estimate supports one or two targets")
    if gain_model not in GAIN_MODELS:
        raise ValueError(f"gain_model must be one of {GAIN_MODELS}")
    grid, model = precomputed or mle_grid(scn, snapshots.schedule, k_sources, gain_model, grid_step_deg)
    if model.k_sources != k_sources or model.gain_model != gain_model:
        raise ValueError("precomputed likelihood does not match k_sources / gain_model")
    sched = snapshots.schedule
    dist = float(np.mean([t.distance_m for t in scn.targets]))
    y = snapshots.samples.T - leakage_response(scn, sched)
    energy = float(np.sum(np.abs(y) ** 2))
    step = float(grid[1] - grid[0])
    surface = model.surface(y)
    lim = 90.0 - 1e-9

    def cost(th):
        return _residual(y, _design(scn, sched, np.clip(np.atleast_1d(th), -lim, lim), dist), gain_model)

    if k_sources == 1:
        i = int(np.argmin(surface))
        best = golden_section_max(lambda th: -cost(th), max(grid[i] - step, -lim), min(grid[i] + step, lim))
        refined_res = cost(best)
        angles = np.array([best]) if refined_res <= surface[i] else grid[i:i + 1]
        best_res = min(refined_res, float(surface[i]))
        tol = best_res * NEAR_OPTIMAL_RTOL + 1e-12 * energy
        near = grid[surface <= best_res + tol][:, None]
        spectrum = (grid, surface)
    else:
        iu = np.triu_indices(grid.size, 1)
        res = surface[iu]
        j = int(np.argmin(res))
        angles = np.array([grid[iu[0][j]], grid[iu[1][j]]])
        best_res = float(res[j])
        tol = best_res * NEAR_OPTIMAL_RTOL + 1e-12 * energy
        sel = res <= best_res + tol
        near = np.column_stack((grid[iu[0][sel]], grid[iu[1][sel]]))
        # Polishing a flat optimum buys nothing; only refine a unique one.
        if _span(near) <= ambiguity_span_deg:
            opt = minimize(cost, angles, method="Nelder-Mead",
                           options={"xatol": GOLDEN_TOL_DEG, "fatol": 0.0, "maxiter": 400,
                                    "initial_simplex": [angles, angles + [step / 2, 0], angles + [0, step / 2]]})
            if opt.fun <= best_res:
                angles, best_res = np.clip(opt.x, -lim, lim), float(opt.fun)
        # Profile over the partner angle: best residual with one target at each grid angle.
        upper = np.triu(np.ones_like(surface, dtype=bool), 1)
        pairs = np.where(upper, surface, surface.T)
        np.fill_diagonal(pairs, np.inf)
        spectrum = (grid, pairs.min(axis=1))
    span = _span(near)
    return EstimationResult(np.sort(angles), spectrum, bool(span > ambiguity_span_deg),
                            {"residual": best_res, "residual_per_sample": best_res / y.size,
                             "near_optimal_span_deg": span, "gain_model": gain_model})


# ---------------------------------------------------------------- CRLB


def fisher_crlb(mean: Callable[[float, complex], np.ndarray], theta_deg: float, gain: complex,
                noise_power: float, gain_model: str = "stacked",
                theta_step_deg: float = 1e-5, gain_step: float = 1e-7) -> float:
    """Angle CRLB (deg^2) under circular white Gaussian noise.

    ``mean(theta_deg, gain)`` returns the noiseless ``T x M`` observation and
    must be linear in ``gain``.  Derivatives are central differences.  With
    ``gain_model="stacked"`` the parameters are ``(theta, Re gain, Im gain)``;
    with ``"per_snapshot"`` every snapshot carries its own complex gain, whose
    Fisher block is eliminated through its Schur complement.
    """
    def diff(f_plus, f_minus, h):
        return (np.asarray(f_plus) - np.asarray(f_minus)) / (2 * h)

    d_theta = diff(mean(theta_deg + theta_step_deg, gain), mean(theta_deg - theta_step_deg, gain), theta_step_deg)
    d_re = diff(mean(theta_deg, gain + gain_step), mean(theta_deg, gain - gain_step), gain_step)
    d_im = diff(mean(theta_deg, gain + 1j * gain_step), mean(theta_deg, gain - 1j * gain_step), gain_step)
    d_theta = np.atleast_2d(d_theta)
    d_re, d_im = np.atleast_2d(d_re), np.atleast_2d(d_im)
    scale = 2.0 / noise_power

    if gain_model == "stacked":
        jac = np.column_stack([d_theta.ravel(), d_re.ravel(), d_im.ravel()])
        blocks = [jac]
    elif gain_model == "per_snapshot":
        blocks = [np.column_stack([d_theta[t], d_re[t], d_im[t]]) for t in range(d_theta.shape[0])]
    else:
        raise ValueError(f"gain_model must be one of {GAIN_MODELS}")

    info = 0.0
    total = 0.0
    for jac in blocks:
        fim = scale * np.real(jac.conj().T @ jac)
        total += fim[0, 0]
        nuis = fim[1:, 1:]
        if np.linalg.eigvalsh(nuis).max() <= 0:
            continue
        # Snapshots without echo energy carry no information.
        info += fim[0, 0] - fim[0, 1:] @ np.linalg.pinv(nuis, rcond=1e-12) @ fim[1:, 0]
    if not total > 0 or info <= 1e-8 * total:
        raise UnidentifiableError("Fisher information matrix is singular; angle not identifiable")
    return float(1.0 / info)


def crlb_numeric(scn: Scenario, sched, target_index: int = 0, bs_beam=None,
                 gain_model: str = "per_snapshot") -> float:
    """Single-target angle CRLB in deg^2 under the scenario's forward model."""
    tgt = scn.targets[target_index]
    gain = target_gains(scn, [tgt])[0]

    def mean(theta, alpha):
        return alpha * signatures(scn, sched, [theta], tgt.distance_m, bs_beam)[0]

    return fisher_crlb(mean, tgt.angle_deg, gain, scn.budget.noise_power_w, gain_model)
