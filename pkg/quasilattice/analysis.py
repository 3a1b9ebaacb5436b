"""
Density estimators and the Poisson-measure machinery.

Test functions are Gaussian on R^m (phi) and Gaussian x trigonometric
polynomial x finite weights on G (psi); both sides of every identity below have
closed forms for this class.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import qmc

from .config import Settings, load_settings
from .events import RunEventName
from .exceptions import PreconditionError, StructuralError, TailBoundError
from .groups import GroupSpec, as_rows
from .lattice import Box, enumerate_lattice
from .model_sets import PointSet, dual_lattice_elements, lattice_elements
from .scheme import CpScheme, LatticeBasis
from .utils import publish

logger = logging.getLogger(__name__)


def tail_radius(count: float, tol: float) -> float:
    """Smallest u with count * exp(-pi u^2) <= tol."""
    return math.sqrt(max(math.log(max(count, 1.0) / tol), 0.0) / math.pi)


def halton(count: int, dim: int) -> np.ndarray:
    """First ``count`` points of the unscrambled Halton sequence in [0,1)^dim."""
    if dim == 0:
        return np.zeros((count, 0))
    return qmc.Halton(d=dim, scramble=False).random(count)


# --------------------------------------------------------------------------- #
#  test functions
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class TestFunctionSpec:
    """
    phi(y) = exp(-pi |y - c|^2 / sigma_phi^2) on R^m and
    psi(x, t, r) = exp(-pi |x|^2 / sigma_psi^2) * sum_k c_k e^{2 pi i k.t} * w(r) on G.

    ``trig`` lists (zfreq, coefficient) pairs and ``weights`` one complex weight
    per element of D in ``group.residues()`` order.
    """

    __test__ = False

    group: GroupSpec
    m: int = 1
    sigma_phi: float = 1.0
    center_phi: Optional[Tuple[float, ...]] = None
    sigma_psi: float = 1.0
    trig: Optional[Tuple[Tuple[Tuple[int, ...], complex], ...]] = None
    weights: Optional[Tuple[complex, ...]] = None

    def __post_init__(self):
        if self.sigma_phi <= 0 or self.sigma_psi <= 0:
            raise PreconditionError("Gaussian widths must be positive")
        g = self.group
        center = (0.0,) * self.m if self.center_phi is None else tuple(float(x) for x in self.center_phi)
        if len(center) != self.m:
            raise StructuralError(f"phi centre has length {len(center)}, expected {self.m}")
        trig = (((0,) * g.torus, 1.0),) if self.trig is None else self.trig
        merged: Dict[Tuple[int, ...], complex] = {}
        for k, c in trig:
            k = tuple(int(x) for x in k)
            if len(k) != g.torus:
                raise StructuralError(f"trigonometric frequency {k} must have length {g.torus}")
            merged[k] = merged.get(k, 0.0) + complex(c)
        weights = (1.0,) * g.order if self.weights is None else tuple(complex(w) for w in self.weights)
        if len(weights) != g.order:
            raise StructuralError(f"{len(weights)} weights for a finite part of order {g.order}")
        object.__setattr__(self, "center_phi", center)
        object.__setattr__(self, "trig", tuple(merged.items()))
        object.__setattr__(self, "weights", weights)

    # ---------------- phi ---------------- #
    def phi(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(-1, self.m)
        return np.exp(-np.pi * np.sum((y - np.asarray(self.center_phi)) ** 2, axis=1) / self.sigma_phi ** 2)

    @property
    def phi_integral(self) -> float:
        return self.sigma_phi ** self.m

    def phi_hat(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).reshape(-1, self.m)
        gauss = np.exp(-np.pi * self.sigma_phi ** 2 * np.sum(xi ** 2, axis=1))
        return self.sigma_phi ** self.m * gauss * np.exp(-2j * np.pi * (xi @ np.asarray(self.center_phi)))

    # ---------------- psi ---------------- #
    def _weight_index(self, disc: np.ndarray) -> np.ndarray:
        if not self.group.t:
            return np.zeros(len(disc), dtype=np.int64)
        return np.ravel_multi_index(np.mod(disc, self.group.torsion).T, self.group.torsion)

    def psi(self, real, torus, disc) -> np.ndarray:
        g = self.group
        real = np.asarray(real, dtype=float)
        k = len(real)
        real = real.reshape(k, g.d)
        torus = np.asarray(torus, dtype=float).reshape(k, g.torus)
        disc = np.asarray(disc, dtype=np.int64).reshape(k, g.t)
        gauss = np.exp(-np.pi * np.sum(real ** 2, axis=1) / self.sigma_psi ** 2)
        poly = np.zeros(k, dtype=complex)
        for freq, coef in self.trig:
            poly += coef * np.exp(2j * np.pi * (torus @ np.asarray(freq, dtype=float)))
        return gauss * poly * np.asarray(self.weights)[self._weight_index(disc)]

    @property
    def trig_constant(self) -> complex:
        return dict(self.trig).get((0,) * self.group.torus, 0.0)

    @property
    def psi_integral(self) -> complex:
        """Gaussian integral x zero-frequency coefficient x sum of the D weights."""
        return self.sigma_psi ** self.group.d * self.trig_constant * complex(np.sum(self.weights))

    def weights_hat(self, disc) -> np.ndarray:
        """w^(c) = sum_x w(x) exp(-2 pi i sum c x / n)."""
        g = self.group
        disc = as_rows(disc, g.t, np.int64)
        if not g.t:
            return np.full(len(disc), complex(np.sum(self.weights)))
        residues = g.residues()
        orders = np.asarray(g.torsion, dtype=np.int64)
        phase = np.mod(disc[:, None, :] * residues[None, :, :], orders) / orders
        return np.exp(-2j * np.pi * phase.sum(axis=2)) @ np.asarray(self.weights)

    def psi_hat(self, real, zfreq, disc) -> np.ndarray:
        g = self.group
        real = np.asarray(real, dtype=float)
        k = len(real)
        real = real.reshape(k, g.d)
        zfreq = np.asarray(zfreq, dtype=np.int64).reshape(k, g.torus)
        gauss = self.sigma_psi ** g.d * np.exp(-np.pi * self.sigma_psi ** 2 * np.sum(real ** 2, axis=1))
        coef = np.zeros(k, dtype=complex)
        for freq, c in self.trig:
            coef[np.all(zfreq == np.asarray(freq, dtype=np.int64), axis=1)] += c
        return gauss * coef * self.weights_hat(disc)

    def to_dict(self) -> Dict[str, Any]:
        def pack(z: complex):
            return [z.real, z.imag]

        return {
            "group": self.group.to_json(),
            "m": self.m,
            "sigma_phi": self.sigma_phi,
            "center_phi": list(self.center_phi),
            "sigma_psi": self.sigma_psi,
            "trig": [[list(k), pack(c)] for k, c in self.trig],
            "weights": [pack(w) for w in self.weights],
        }


# --------------------------------------------------------------------------- #
#  densities
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class DensityReport:
    sides: Tuple[float, ...]
    translates: Tuple[Tuple[float, ...], ...]
    counts: Tuple[Tuple[int, ...], ...]
    densities: Tuple[Tuple[float, ...], ...]
    theoretical: Optional[float] = None

    @property
    def lower(self) -> Tuple[float, ...]:
        """D^- estimate per side length."""
        return tuple(min(row) for row in self.densities)

    @property
    def upper(self) -> Tuple[float, ...]:
        return tuple(max(row) for row in self.densities)

    @property
    def relative_error(self) -> Optional[float]:
        """Worst relative deviation from the theoretical value at the largest side."""
        if self.theoretical is None or self.theoretical == 0:
            return None
        last = np.asarray(self.densities[-1])
        return float(np.max(np.abs(last - self.theoretical)) / self.theoretical)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sides": list(self.sides),
            "translates": [list(a) for a in self.translates],
            "counts": [list(c) for c in self.counts],
            "densities": [list(d) for d in self.densities],
            "lower": list(self.lower),
            "upper": list(self.upper),
            "theoretical": self.theoretical,
            "relative_error": self.relative_error,
        }


def empirical_density(ps: PointSet,
                      sides: Sequence[float],
                      translates: Optional[Sequence[Sequence[float]]] = None,
                      theoretical: Optional[float] = None,
                      settings: Optional[Settings] = None) -> DensityReport:
    """
    #(points with real part in Q_l(a)) / (l^d |D|) for every side l and corner a.

    The default corners are the first ``density_translates`` unscrambled Halton
    points spread over the part of the observation box where the largest cube fits.

    Raises:
        PreconditionError: a cube would leave the observation box.
    """
    settings = settings or load_settings()
    d = ps.group.d
    if d == 0:
        raise PreconditionError("densities need a real part")
    sides = tuple(float(s) for s in sides)
    if not sides or min(sides) <= 0:
        raise PreconditionError("side lengths must be positive")
    lmax = max(sides)
    lo, width = np.asarray(ps.obs.lo), ps.obs.sides
    if np.any(width < lmax):
        raise PreconditionError(
            f"observation box of sides {width.tolist()} is too small for cubes of side {lmax:g}"
        )
    if translates is None:
        corners = lo + halton(settings.density_translates, d) * (width - lmax)
    else:
        corners = np.asarray(translates, dtype=float).reshape(-1, d)
        if np.any(corners < lo) or np.any(corners + lmax > np.asarray(ps.obs.hi) + 1e-12):
            raise PreconditionError("density cubes must lie inside the observation box")

    real = np.asarray(ps.real, dtype=float)
    order = ps.group.order
    sorted_x = np.sort(real[:, 0]) if d == 1 else None
    counts: List[Tuple[int, ...]] = []
    densities: List[Tuple[float, ...]] = []
    for side in sides:
        if d == 1:
            c = (np.searchsorted(sorted_x, corners[:, 0] + side, side="left")
                 - np.searchsorted(sorted_x, corners[:, 0], side="left"))
        else:
            c = np.array([int(Box.cube(a, side).contains(real).sum()) for a in corners])
        counts.append(tuple(int(x) for x in c))
        densities.append(tuple(float(x) / (side ** d * order) for x in c))
    return DensityReport(
        sides=sides,
        translates=tuple(tuple(float(x) for x in a) for a in corners),
        counts=tuple(counts),
        densities=tuple(densities),
        theoretical=theoretical,
    )


def theoretical_density(scheme: CpScheme, measure: float, dual: bool = False) -> float:
    """|S| / s(H) for Lambda_S, or mu(K) s(H) = mu(K) / s(Gamma) for M_K."""
    return measure * scheme.section_mass if dual else measure / scheme.section_mass


# --------------------------------------------------------------------------- #
#  Riesz sums
# --------------------------------------------------------------------------- #
def riesz_limit(scheme: CpScheme, tf: TestFunctionSpec) -> complex:
    """(1 / s(H)) * integral(phi) * integral(psi)."""
    return tf.phi_integral * tf.psi_integral / scheme.section_mass


def _check_tf(scheme: CpScheme, tf: TestFunctionSpec) -> None:
    if tf.group != scheme.group or tf.m != scheme.m:
        raise StructuralError("test functions and scheme live on different groups")


def riesz_sum(scheme: CpScheme,
              tf: TestFunctionSpec,
              r: float,
              a,
              index_radius: Optional[int] = None,
              settings: Optional[Settings] = None) -> complex:
    """
    (1 / r^m) sum_h phi((p1(h) - a) / r) psi(p2(h)).

    Elements are enumerated wherever either Gaussian exceeds the tail budget
    divided by the estimated term count.

    Raises:
        TailBoundError: the required elements reach beyond ``index_radius``.
    """
    settings = settings or load_settings()
    _check_tf(scheme, tf)
    if r <= 0:
        raise PreconditionError("r must be positive")
    m, d = scheme.m, scheme.group.d
    a = np.asarray(a, dtype=float).reshape(m)
    centre = a + r * np.asarray(tf.center_phi)

    t = tail_radius(1.0, settings.tail_tolerance)
    for _ in range(3):
        volume = (2 * t * tf.sigma_phi * r) ** m * (2 * t * tf.sigma_psi) ** d
        t = tail_radius(volume * scheme.group.order / scheme.section_mass + 1.0, settings.tail_tolerance)
    internal = Box(centre - t * tf.sigma_phi * r, centre + t * tf.sigma_phi * r)
    real = Box([-t * tf.sigma_psi] * d, [t * tf.sigma_psi] * d)
    z = lattice_elements(scheme, internal, real, settings)
    if index_radius is not None and len(z):
        needed = int(np.max(np.abs(z[:, :scheme.size])))
        if needed > index_radius:
            raise TailBoundError(
                f"index radius {index_radius} is too small: the tail budget needs {needed}"
            )
    p = scheme.project(z, tol=settings.lattice_tolerance)
    values = tf.phi((p.internal - a) / r) * tf.psi(p.real, p.torus, p.disc)
    logger.debug("riesz_sum r=%g: %d terms, tail radius %.3f", r, len(z), t)
    return complex(np.sum(values) / r ** m)


def riesz_sum_dual(scheme: CpScheme,
                   tf: TestFunctionSpec,
                   r: float,
                   a,
                   settings: Optional[Settings] = None) -> complex:
    """
    The same Riesz sum evaluated on the dual lattice:
    (1 / s(H)) sum_g phi^(r q1(g)) e^{-2 pi i a.q1(g)} psi^(q2(g)).
    Its g = 0 term is riesz_limit.
    """
    settings = settings or load_settings()
    _check_tf(scheme, tf)
    if r <= 0:
        raise PreconditionError("r must be positive")
    m, d = scheme.m, scheme.group.d
    a = np.asarray(a, dtype=float).reshape(m)
    zfreqs = [k for k, _ in tf.trig]

    t = tail_radius(1.0, settings.tail_tolerance)
    for _ in range(3):
        volume = (2 * t / (tf.sigma_phi * r)) ** m * (2 * t / tf.sigma_psi) ** d
        t = tail_radius(volume * len(zfreqs) * scheme.section_mass + 1.0, settings.tail_tolerance)
    q1_half = t / (tf.sigma_phi * r)
    internal = Box([-q1_half] * m, [q1_half] * m)
    real = Box([-t / tf.sigma_psi] * d, [t / tf.sigma_psi] * d)
    w = dual_lattice_elements(scheme, internal, real, zfreqs, settings)
    q = scheme.dual_project(w, tol=settings.lattice_tolerance)
    values = (tf.phi_hat(r * q.internal) * np.exp(-2j * np.pi * (q.internal @ a))
              * tf.psi_hat(q.real, q.torus, q.disc))
    return complex(np.sum(values) / scheme.section_mass)


def _relative(value: complex, limit: complex) -> float:
    if limit == 0:
        return float(abs(value))
    return float(abs(value - limit) / abs(limit))


@dataclass(frozen=True)
class NlRow:
    r: float
    max_error: float
    mean_error: float
    spread: float


@dataclass(frozen=True)
class NlTable:
    limit: complex
    rows: Tuple[NlRow, ...] = field(default_factory=tuple)

    @property
    def decreasing(self) -> bool:
        """Error at the largest r below the error at the smallest r."""
        return len(self.rows) >= 2 and self.rows[-1].max_error < self.rows[0].max_error

    def to_dict(self) -> Dict[str, Any]:
        return {
            "limit": [self.limit.real, self.limit.imag],
            "rows": [vars(row).copy() for row in self.rows],
        }


def nl_convergence(scheme: CpScheme,
                   tf: TestFunctionSpec,
                   radii: Sequence[float],
                   translates: Optional[Sequence[Sequence[float]]] = None,
                   settings: Optional[Settings] = None,
                   broker: Any = None,
                   run_id: str = "nl") -> NlTable:
    """
    Relative error of riesz_sum to its limit for every r, max and mean over the
    translates a (absolute error when the limit is 0). ``spread`` is max - min.
    """
    settings = settings or load_settings()
    limit = riesz_limit(scheme, tf)
    if translates is None:
        translates = halton(settings.density_translates, scheme.m) * 10.0
    translates = np.asarray(translates, dtype=float).reshape(-1, scheme.m)
    rows = []
    for r in radii:
        publish(broker, run_id, RunEventName.STAGE_START, stage=f"r={r:g}")
        errors = np.array([_relative(riesz_sum(scheme, tf, r, a, settings=settings), limit)
                           for a in translates])
        row = NlRow(float(r), float(errors.max()), float(errors.mean()), float(errors.max() - errors.min()))
        rows.append(row)
        publish(broker, run_id, RunEventName.STAGE_FINISH, stage=f"r={r:g}", details=vars(row).copy())
    return NlTable(limit=complex(limit), rows=tuple(rows))


# --------------------------------------------------------------------------- #
#  Poisson summation on a lifted basis
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class PoissonCheck:
    lhs: float
    rhs: float
    diff: float

    def to_dict(self) -> Dict[str, float]:
        return {"lhs": self.lhs, "rhs": self.rhs, "diff": self.diff}


def poisson_check(basis: LatticeBasis, sigma: float, x,
                  settings: Optional[Settings] = None) -> PoissonCheck:
    """
    sum_z f(x + B z) against (1 / |det B|) sum_w f^(B^-T w) e^{2 pi i <B^-T w, x>}
    for f(y) = exp(-pi |y|^2 / sigma^2), both sides truncated by Gaussian tails.
    """
    settings = settings or load_settings()
    if sigma <= 0:
        raise PreconditionError("sigma must be positive")
    B = np.asarray(getattr(basis, "B", basis), dtype=float)
    n = B.shape[0]
    x = np.asarray(x, dtype=float).reshape(n)
    lu = linalg.lu_factor(B)
    volume = float(np.abs(np.prod(np.diag(lu[0]))))
    dual = linalg.lu_solve(lu, np.eye(n), trans=1)
    tol = settings.poisson_tail_tolerance

    t = tail_radius(1.0, tol)
    for _ in range(3):
        t = tail_radius((2 * t * sigma) ** n / volume + 1.0, tol)
    z = enumerate_lattice(B, Box(-x - t * sigma, -x + t * sigma), max_candidates=settings.max_candidates)
    y = x + z @ B.T
    lhs = float(np.sum(np.exp(-np.pi * np.sum(y ** 2, axis=1) / sigma ** 2)))

    s = tail_radius(1.0, tol)
    for _ in range(3):
        s = tail_radius((2 * s / sigma) ** n * volume + 1.0, tol)
    w = enumerate_lattice(dual, Box([-s / sigma] * n, [s / sigma] * n), max_candidates=settings.max_candidates)
    g = w @ dual.T
    terms = sigma ** n * np.exp(-np.pi * sigma ** 2 * np.sum(g ** 2, axis=1)) * np.exp(2j * np.pi * (g @ x))
    rhs = complex(np.sum(terms) / volume)
    logger.debug("poisson_check: %d primal and %d dual terms", len(z), len(w))
    return PoissonCheck(lhs=lhs, rhs=float(rhs.real), diff=float(abs(lhs - rhs)))
