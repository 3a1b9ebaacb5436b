"""
Finite-section sampling and interpolation bounds for exponential systems.

A point set and a delta-grid of frequencies give the matrix E[j, k] = xi_k(x_j).
With the grid spacing equal to 1/L the columns are orthogonal over the
observation box, so sigma_min(E)^2 / mu(obs) approximates the lower frame bound
and sigma_min(E^T)^2 * (cell measure) the lower Riesz bound.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .analysis import theoretical_density
from .config import Settings, load_settings
from .exceptions import ConsistencyError, PreconditionError, StructuralError
from .groups import GroupSpec, as_rows, character_matrix, haar_measure
from .lattice import Box
from .model_sets import PointSet, SpectrumWindow, Window, dual_model_set, quasicrystal
from .runner import ExperimentRunner, Trial
from .scheme import CpScheme

logger = logging.getLogger(__name__)

_GRID_SLACK = 1e-9


class Verdict(str, Enum):
    SAMPLING = "sampling-like"
    INTERPOLATION = "interpolation-like"
    CRITICAL = "critical"


@dataclass(frozen=True, eq=False)
class FrequencySet:
    """Finite list of characters of ``group``: real (k, d), zfreq (k, l), disc (k, t)."""

    group: GroupSpec
    real: np.ndarray
    zfreq: np.ndarray
    disc: np.ndarray
    delta: float

    def __len__(self) -> int:
        return len(self.real)

    @property
    def cell(self) -> float:
        """Dual Haar measure carried by one grid frequency."""
        return self.delta ** self.group.d / self.group.order


def window_spectrum(S: Window) -> SpectrumWindow:
    """A window of R^m read as a spectrum of R^m."""
    return SpectrumWindow(GroupSpec(d=S.dim), S.boxes)


def _box_grid(box: Box, delta: float) -> np.ndarray:
    counts = np.floor(box.sides / delta + _GRID_SLACK).astype(np.int64)
    axes = [box.lo[i] + delta * np.arange(n) for i, n in enumerate(counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=1).reshape(-1, box.dim)


def make_spectrum(K: Union[SpectrumWindow, Window], delta: float) -> FrequencySet:
    """
    Grid points lo + delta * i of every real box of K, crossed with its integer
    frequencies and residues.

    Raises:
        PreconditionError: delta is not positive or exceeds a box side.
    """
    if isinstance(K, Window):
        K = window_spectrum(K)
    if delta <= 0:
        raise PreconditionError("grid spacing must be positive")
    g = K.group
    real_parts = []
    for box in K.real_boxes:
        if box.dim and np.any(box.sides < delta * (1 - _GRID_SLACK)):
            raise PreconditionError(
                f"grid spacing {delta:g} is larger than a side of box {box.to_json()}"
            )
        real_parts.append(_box_grid(box, delta) if box.dim else np.zeros((1, 0)))
    real = np.concatenate(real_parts) if real_parts else np.zeros((0, g.d))
    labels = [(z, r) for z in K.zfreqs for r in K.residues]
    n = len(real)
    return FrequencySet(
        group=g,
        real=np.tile(real, (len(labels), 1)),
        zfreq=np.repeat(as_rows([z for z, _ in labels], g.torus, np.int64), n, axis=0),
        disc=np.repeat(as_rows([r for _, r in labels], g.t, np.int64), n, axis=0),
        delta=float(delta),
    )


def sampling_matrix(points: PointSet, freqs: FrequencySet) -> np.ndarray:
    """E[j, k] = xi_k(lambda_j), one row per point and one column per frequency."""
    if points.group != freqs.group:
        raise StructuralError("points and frequencies live on different groups")
    if not len(points) or not len(freqs):
        raise PreconditionError("sampling matrix needs at least one point and one frequency")
    return character_matrix(
        points.group,
        (points.real, points.torus, points.disc),
        (freqs.real, freqs.zfreq, freqs.disc),
    )


def _singular_values(E: np.ndarray) -> np.ndarray:
    if E.size == 0:
        raise PreconditionError("empty sampling matrix")
    try:
        return linalg.svdvals(E)
    except (linalg.LinAlgError, ValueError) as exc:
        raise ConsistencyError(f"singular value decomposition failed: {exc}") from exc


def frame_bounds(E: np.ndarray, normalization: float) -> Tuple[float, float]:
    """
    (sigma_min^2, sigma_max^2) / normalization over the column space of E.
    The lower bound is 0 when E has more columns than rows.
    """
    if normalization <= 0:
        raise PreconditionError("normalization must be positive")
    s = _singular_values(np.asarray(E))
    lower = 0.0 if E.shape[1] > E.shape[0] else float(s[-1] ** 2)
    return lower / normalization, float(s[0] ** 2) / normalization


def riesz_bounds(E: np.ndarray, cell: float) -> Tuple[float, float]:
    """Frame bounds of the row system of E, scaled by the frequency cell measure."""
    if cell <= 0:
        raise PreconditionError("cell measure must be positive")
    s = _singular_values(np.asarray(E))
    lower = 0.0 if E.shape[0] > E.shape[1] else float(s[-1] ** 2)
    return lower * cell, float(s[0] ** 2) * cell


@dataclass(frozen=True)
class FrameReport:
    num_points: int
    num_freqs: int
    L: float
    spectrum_measure: float
    density: float
    aest: float
    best: float
    riesz_lower: float
    cond: float
    verdict: Verdict
    ratio: Optional[float] = None
    trial: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        out = dict(vars(self))
        out["verdict"] = self.verdict.value
        return out


def classify(aest: float, riesz_lower: float, settings: Settings) -> Verdict:
    sampling = aest > settings.theta_sampling
    interpolation = riesz_lower > settings.theta_interpolation
    if sampling and not interpolation:
        return Verdict.SAMPLING
    if interpolation and not sampling:
        return Verdict.INTERPOLATION
    return Verdict.CRITICAL


def frame_report(points: PointSet, K: Union[SpectrumWindow, Window], L: float,
                 delta: Optional[float] = None, density: Optional[float] = None,
                 settings: Optional[Settings] = None,
                 ratio: Optional[float] = None, trial: Optional[int] = None) -> FrameReport:
    """Both finite-section bounds of ``points`` against the delta-grid of K."""
    settings = settings or load_settings()
    if isinstance(K, Window):
        K = window_spectrum(K)
    if L <= 0:
        raise PreconditionError("observation size must be positive")
    delta = 1.0 / L if delta is None else delta
    if delta * L < 1.0 - _GRID_SLACK:
        logger.warning("grid spacing %g is finer than 1/L = %g: columns are no longer orthogonal "
                       "on the observation box and aest drops to 0 once they outnumber the points",
                       delta, 1.0 / L)
    freqs = make_spectrum(K, delta)
    E = sampling_matrix(points, freqs)
    g = points.group
    normalization = haar_measure([0.0] * g.d, [L] * g.d, g)
    s = _singular_values(E)
    rows, cols = E.shape
    aest = 0.0 if cols > rows else float(s[-1] ** 2) / normalization
    riesz_lower = 0.0 if rows > cols else float(s[-1] ** 2) * freqs.cell
    cond = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    if density is None:
        density = rows / normalization
    return FrameReport(
        num_points=rows,
        num_freqs=cols,
        L=float(L),
        spectrum_measure=K.measure,
        density=float(density),
        aest=aest,
        best=float(s[0] ** 2) / normalization,
        riesz_lower=riesz_lower,
        cond=cond,
        verdict=classify(aest, riesz_lower, settings),
        ratio=ratio,
        trial=trial,
    )


# --------------------------------------------------------------------------- #
#  random spectra
# --------------------------------------------------------------------------- #
def _composition(rng: np.random.Generator, total: int, parts: int) -> np.ndarray:
    """``parts`` positive integers summing to ``total``."""
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [total]]))


def _draw_zfreqs(group: GroupSpec, rng: np.random.Generator) -> Optional[Tuple[Tuple[int, ...], ...]]:
    """One to three distinct torus frequencies from [-2, 2]^l, or None without a torus."""
    if not group.torus:
        return None
    grid = np.stack(np.meshgrid(*[np.arange(-2, 3)] * group.torus, indexing="ij"), axis=-1)
    grid = grid.reshape(-1, group.torus)
    count = int(rng.integers(1, 4))
    picked = grid[np.sort(rng.choice(len(grid), size=count, replace=False))]
    return tuple(tuple(int(k) for k in z) for z in picked)


def random_spectrum(group: GroupSpec, measure: float, delta: float,
                    rng: np.random.Generator, pieces: Optional[int] = None) -> SpectrumWindow:
    """
    A union of disjoint grid-aligned intervals times random torus frequencies
    and a random residue set, with dual Haar measure exactly ``measure``.

    Interval starts and gaps are integer multiples of delta. Every piece but the
    last has a length that is a multiple of delta; the last one also absorbs
    the fractional cell, so its grid keeps the same number of points.

    Raises:
        PreconditionError: the group is not R x T^l x D, or the real part of
            the drawn spectrum is shorter than one grid cell.
    """
    if group.d != 1:
        raise PreconditionError("random spectra are drawn for R x T^l x D only")
    if measure <= 0:
        raise PreconditionError("spectrum measure must be positive")
    zfreqs = _draw_zfreqs(group, rng)
    residues = group.residues()
    keep = int(rng.integers(1, len(residues) + 1))
    chosen = residues[np.sort(rng.choice(len(residues), size=keep, replace=False))]
    labels = keep * (len(zfreqs) if zfreqs else 1)
    real_length = measure * group.order / labels
    cells = int(np.floor(real_length / delta + _GRID_SLACK))
    if cells < 1:
        raise PreconditionError(f"spectrum measure {measure:g} is below one grid cell")
    remainder = max(real_length - cells * delta, 0.0)
    parts = int(pieces) if pieces is not None else int(rng.integers(1, 4))
    parts = max(1, min(parts, cells))
    lengths = _composition(rng, cells, parts) if parts > 1 else np.array([cells])
    gaps = rng.multinomial(cells, [1.0 / (parts + 1)] * (parts + 1))
    boxes = []
    start = int(gaps[0])
    for i, (length, gap) in enumerate(zip(lengths, gaps[1:])):
        extra = remainder if i == parts - 1 else 0.0
        boxes.append(Box([start * delta], [(start + int(length)) * delta + extra]))
        start += int(length) + int(gap)
    return SpectrumWindow(group, tuple(boxes), zfreqs=zfreqs,
                          residues=tuple(tuple(int(x) for x in r) for r in chosen))


def trial_rng(seed: int, ratio_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, ratio_index, trial]))


# --------------------------------------------------------------------------- #
#  experiments
# --------------------------------------------------------------------------- #
def _cube(L: float, dim: int) -> Box:
    return Box([0.0] * dim, [float(L)] * dim)


def _sweep_trial(points: PointSet, density: float, ratio: float, ratio_index: int, trial: int,
                 L: float, delta: float, seed: int, pieces: Optional[int],
                 settings: Settings) -> FrameReport:
    rng = trial_rng(seed, ratio_index, trial)
    K = random_spectrum(points.group, ratio * density, delta, rng, pieces)
    return frame_report(points, K, L, delta, density, settings, ratio=ratio, trial=trial)


def universality_sweep(scheme: CpScheme,
                       interval: Window,
                       ratios: Sequence[float],
                       trials: int,
                       L: float,
                       delta: Optional[float] = None,
                       seed: int = 0,
                       pieces: Optional[int] = None,
                       settings: Optional[Settings] = None,
                       message_broker: Any = None) -> List[FrameReport]:
    """
    For every ratio rho, ``trials`` random spectra with mu(K) = rho * D(Lambda_I),
    each tested against Lambda_I inside [0, L). Reports come back ordered by
    ratio, then trial.
    """
    settings = settings or load_settings()
    if scheme.m != 1 or len(interval.boxes) != 1 or interval.dim != 1:
        raise PreconditionError("the universality sweep needs m = 1 and an interval window")
    if trials < 1 or L <= 0:
        raise PreconditionError("trials and L must be positive")
    delta = 1.0 / L if delta is None else float(delta)
    points = quasicrystal(scheme, interval, _cube(L, scheme.group.d), settings)
    density = theoretical_density(scheme, interval.measure)
    logger.info("universality sweep: %d points, density %.6g", len(points), density)
    jobs = [
        Trial(
            name=f"ratio={rho:g}/trial={t}",
            fn=_sweep_trial,
            args=(points, density, float(rho), i, t, L, delta, seed, pieces, settings),
            details={"ratio": float(rho), "trial": t},
        )
        for i, rho in enumerate(ratios)
        for t in range(trials)
    ]
    return ExperimentRunner(message_broker, run_id="sweep").run(jobs)


@dataclass(frozen=True)
class ProxyRange:
    """Spread of both finite-section proxies over the trials of one ratio."""

    ratio: float
    trials: int
    aest: Tuple[float, float]
    riesz_lower: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        return {"ratio": self.ratio, "trials": self.trials,
                "aest": list(self.aest), "riesz_lower": list(self.riesz_lower)}


@dataclass(frozen=True)
class CalibrationReport:
    below: ProxyRange
    above: ProxyRange

    @property
    def sampling_gap(self) -> Tuple[float, float]:
        """Open interval of thresholds separating Aest below density from Aest above it."""
        return self.above.aest[1], self.below.aest[0]

    @property
    def interpolation_gap(self) -> Tuple[float, float]:
        return self.below.riesz_lower[1], self.above.riesz_lower[0]

    def separates(self, theta_sampling: float, theta_interpolation: float) -> bool:
        lo, hi = self.sampling_gap
        ilo, ihi = self.interpolation_gap
        return lo < theta_sampling < hi and ilo < theta_interpolation < ihi

    def to_dict(self) -> Dict[str, Any]:
        return {"below": self.below.to_dict(), "above": self.above.to_dict(),
                "sampling_gap": list(self.sampling_gap),
                "interpolation_gap": list(self.interpolation_gap)}


def calibrate(reports: Sequence[FrameReport], below: float, above: float) -> CalibrationReport:
    """Groups sweep reports at two ratios into the ranges the thresholds must fall between."""

    def spread(rho: float) -> ProxyRange:
        picked = [r for r in reports if r.ratio is not None and np.isclose(r.ratio, rho)]
        if not picked:
            raise PreconditionError(f"no sweep report at ratio {rho:g}")
        aest = [r.aest for r in picked]
        riesz = [r.riesz_lower for r in picked]
        return ProxyRange(float(rho), len(picked), (min(aest), max(aest)), (min(riesz), max(riesz)))

    if not below < 1.0 < above:
        raise PreconditionError("calibration ratios must straddle 1")
    report = CalibrationReport(spread(below), spread(above))
    logger.info("calibration: sampling gap (%.3g, %.3g), interpolation gap (%.3g, %.3g)",
                *report.sampling_gap, *report.interpolation_gap)
    return report


def calibration_run(scheme: CpScheme,
                    interval: Window,
                    trials: int,
                    L: float,
                    below: float = 0.8,
                    above: float = 1.25,
                    seed: int = 7,
                    settings: Optional[Settings] = None,
                    message_broker: Any = None) -> CalibrationReport:
    """Universality sweep at one ratio on each side of the density, reduced to proxy ranges."""
    reports = universality_sweep(scheme, interval, [below, above], trials, L, seed=seed,
                                 settings=settings, message_broker=message_broker)
    return calibrate(reports, below, above)


@dataclass(frozen=True)
class DualityReport:
    """
    (i)  M_K interpolating for PW_S should force Lambda_S sampling for PW_K.
    (ii) M_K sampling for PW_S~ should force Lambda_S~ interpolating for PW_K,
         S~ the dilation of S about its centre.
    """

    dual_interpolation: FrameReport
    primal_sampling: FrameReport
    dual_sampling: FrameReport
    primal_interpolation: FrameReport
    dilation: float
    theta_sampling: float
    theta_interpolation: float

    @property
    def first_holds(self) -> bool:
        if self.dual_interpolation.riesz_lower > self.theta_interpolation:
            return self.primal_sampling.aest > self.theta_sampling
        return True

    @property
    def second_holds(self) -> bool:
        if self.dual_sampling.aest > self.theta_sampling:
            return self.primal_interpolation.riesz_lower > self.theta_interpolation
        return True

    @property
    def ok(self) -> bool:
        return self.first_holds and self.second_holds

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dual_interpolation": self.dual_interpolation.to_dict(),
            "primal_sampling": self.primal_sampling.to_dict(),
            "dual_sampling": self.dual_sampling.to_dict(),
            "primal_interpolation": self.primal_interpolation.to_dict(),
            "dilation": self.dilation,
            "first_holds": self.first_holds,
            "second_holds": self.second_holds,
        }


def duality_probe(scheme: CpScheme,
                  S: Window,
                  K: SpectrumWindow,
                  L: float,
                  delta: Optional[float] = None,
                  dilation: float = 1.05,
                  settings: Optional[Settings] = None,
                  message_broker: Any = None) -> DualityReport:
    """Finite-section shadow of both duality implications inside cubes of side L."""
    settings = settings or load_settings()
    if dilation < 1:
        raise PreconditionError("dilation factor must be at least 1")
    if K.group != scheme.group:
        raise StructuralError("spectrum and scheme live on different groups")
    delta = 1.0 / L if delta is None else float(delta)
    S_tilde = S.dilate(dilation)
    primal_obs = _cube(L, scheme.group.d)
    dual_obs = _cube(L, scheme.m)

    def primal(window: Window) -> PointSet:
        return quasicrystal(scheme, window, primal_obs, settings)

    dual_points = dual_model_set(scheme, K, dual_obs, settings)
    dual_density = theoretical_density(scheme, K.measure, dual=True)
    jobs = [
        Trial("dual_interpolation", frame_report, (dual_points, S, L, delta, dual_density, settings)),
        Trial("primal_sampling", lambda: frame_report(
            primal(S), K, L, delta, theoretical_density(scheme, S.measure), settings)),
        Trial("dual_sampling", frame_report, (dual_points, S_tilde, L, delta, dual_density, settings)),
        Trial("primal_interpolation", lambda: frame_report(
            primal(S_tilde), K, L, delta, theoretical_density(scheme, S_tilde.measure), settings)),
    ]
    reports = ExperimentRunner(message_broker, run_id="duality").run(jobs)
    return DualityReport(*reports, dilation=float(dilation),
                         theta_sampling=settings.theta_sampling,
                         theta_interpolation=settings.theta_interpolation)


def lattice_counterexample(eps: float, L: int,
                           delta: Optional[float] = None,
                           settings: Optional[Settings] = None) -> FrameReport:
    """
    Z inside [0, L) against K = [0, 1/2 - eps) u [1, 3/2 - eps): mu(K) < D(Z) = 1,
    yet the frequencies xi and xi + 1 agree on Z, so the lower frame bound is 0.
    """
    if not 0 < eps < 0.5:
        raise PreconditionError("eps must lie in (0, 1/2)")
    L = int(L)
    points = PointSet.from_real(np.arange(L, dtype=float), obs=_cube(L, 1))
    K = SpectrumWindow(GroupSpec(d=1), (Box([0.0], [0.5 - eps]), Box([1.0], [1.5 - eps])))
    return frame_report(points, K, L, delta, density=1.0, settings=settings)
