"""
Groups of the form R^d x T^l x D with D = Z_{n_1} + ... + Z_{n_t} finite.

Haar measure on G is Lebesgue on R^d, the probability measure on T^l and
counting measure on D, so that [0,1)^d x T^l x {e} (a fundamental domain of
the reference lattice Z^d x {e} x D) has measure one. The dual group
R^d x Z^l x D^ carries the Plancherel-dual measure: Lebesgue, counting, and
counting divided by |D|.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .exceptions import PreconditionError, SpecParseError, StructuralError

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------- #
#  primes
# --------------------------------------------------------------------------- #
@lru_cache(maxsize=None)
def _sieve(limit: int) -> Tuple[int, ...]:
    mask = np.ones(limit + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, int(math.isqrt(limit)) + 1):
        if mask[p]:
            mask[p * p::p] = False
    return tuple(int(p) for p in np.flatnonzero(mask))


def first_primes(count: int) -> Tuple[int, ...]:
    """The first ``count`` primes, from a cached sieve that doubles until large enough."""
    if count <= 0:
        return ()
    limit = max(16, int(count * (math.log(count + 1) + math.log(math.log(count + 3)) + 2)))
    primes = _sieve(limit)
    while len(primes) < count:
        limit *= 2
        primes = _sieve(limit)
    return primes[:count]


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return p in _sieve(max(16, int(p)))


def prime_factors(n: int) -> Tuple[int, ...]:
    """Distinct prime divisors of ``n`` in increasing order."""
    out = []
    k = int(n)
    q = 2
    while q * q <= k:
        if k % q == 0:
            out.append(q)
            while k % q == 0:
                k //= q
        q += 1
    if k > 1:
        out.append(k)
    return tuple(out)


def independent_vector(n: int, eps: Optional[float] = None, offset: int = 0) -> np.ndarray:
    """
    Returns (1/sqrt(p_{s+1}), ..., 1/sqrt(p_{s+n})) for the prime sequence p.

    The entries, their reciprocals and 1 are linearly independent over the
    rationals (square roots of distinct primes). When ``eps`` is given the
    offset s is raised from ``offset`` until the Euclidean norm drops below it.

    Args:
        n (int): Number of components, at least 1.
        eps (float, optional): Strict upper bound on the norm.
        offset (int): Starting prime offset s.

    Returns:
        np.ndarray: Vector of length n.
    """
    if n < 1:
        raise PreconditionError("independent_vector needs n >= 1")
    if eps is not None and eps <= 0:
        raise PreconditionError("eps must be positive")
    s = int(offset)
    while True:
        primes = np.asarray(first_primes(s + n)[s:], dtype=float)
        xi = 1.0 / np.sqrt(primes)
        if eps is None or np.linalg.norm(xi) < eps:
            if s != offset:
                logger.debug("independent_vector: offset raised from %d to %d", offset, s)
            return xi
        s += 1


# --------------------------------------------------------------------------- #
#  group descriptors
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class GroupSpec:
    d: int = 0
    torus: int = 0
    torsion: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "torsion", tuple(int(n) for n in self.torsion))
        if self.d < 0 or self.torus < 0:
            raise StructuralError("d and torus must be non-negative")
        if any(n < 2 for n in self.torsion):
            raise StructuralError(f"cyclic orders must be >= 2, got {list(self.torsion)}")
        if self.d + self.torus + len(self.torsion) < 1:
            raise StructuralError("the group must have at least one factor")

    @property
    def t(self) -> int:
        return len(self.torsion)

    @property
    def order(self) -> int:
        """|D|."""
        return int(np.prod(self.torsion, dtype=np.int64)) if self.torsion else 1

    def dual(self) -> "DualGroupSpec":
        return dual_spec(self)

    def residues(self) -> np.ndarray:
        """All elements of D as rows, in lexicographic order."""
        if not self.torsion:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.meshgrid(*[np.arange(n) for n in self.torsion], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def to_json(self) -> Dict[str, Any]:
        return {"d": self.d, "torus": self.torus, "torsion": list(self.torsion)}

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "GroupSpec":
        if not isinstance(data, dict):
            raise SpecParseError("group spec must be a JSON object")
        unknown = set(data) - {"d", "torus", "torsion"}
        if unknown:
            raise SpecParseError(f"Unknown group spec keys: {sorted(unknown)}")
        try:
            d = int(data.get("d", 0))
            torus = int(data.get("torus", 0))
            torsion = tuple(int(n) for n in data.get("torsion", []))
        except (TypeError, ValueError) as exc:
            raise SpecParseError(f"Invalid group spec: {exc}") from exc
        try:
            return cls(d=d, torus=torus, torsion=torsion)
        except StructuralError as exc:
            raise SpecParseError(str(exc)) from exc


@dataclass(frozen=True)
class DualGroupSpec:
    d: int = 0
    zrank: int = 0
    torsion: Tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return int(np.prod(self.torsion, dtype=np.int64)) if self.torsion else 1


def dual_spec(spec: GroupSpec) -> DualGroupSpec:
    """R^d stays R^d, T^l becomes Z^l, each Z_n is self-dual."""
    return DualGroupSpec(d=spec.d, zrank=spec.torus, torsion=spec.torsion)


# --------------------------------------------------------------------------- #
#  elements
# --------------------------------------------------------------------------- #
def reduce_torus(x) -> np.ndarray:
    r = np.mod(np.asarray(x, dtype=float), 1.0)
    # mod can round tiny negatives up to exactly 1.0
    return np.where(r >= 1.0, 0.0, r)


def as_rows(x, width: int, dtype=float) -> np.ndarray:
    """``x`` as a (k, width) array; a 1-D or empty input of width 0 is one row."""
    arr = np.asarray(x, dtype=dtype)
    if width:
        return arr.reshape(-1, width)
    k = arr.shape[0] if arr.ndim == 2 else 1
    return np.zeros((k, 0), dtype=dtype)


def _check_len(name: str, values: Sequence, expected: int) -> None:
    if len(values) != expected:
        raise StructuralError(f"{name} has length {len(values)}, group expects {expected}")


@dataclass(frozen=True)
class GroupElement:
    real: Tuple[float, ...] = ()
    torus: Tuple[float, ...] = ()
    disc: Tuple[int, ...] = ()

    @classmethod
    def make(cls, spec: GroupSpec, real: Iterable[float] = (), torus: Iterable[float] = (),
             disc: Iterable[int] = ()) -> "GroupElement":
        real, torus, disc = tuple(real), tuple(torus), tuple(disc)
        _check_len("real", real, spec.d)
        _check_len("torus", torus, spec.torus)
        _check_len("disc", disc, spec.t)
        return cls(
            real=tuple(float(x) for x in real),
            torus=tuple(float(x) for x in reduce_torus(torus)),
            disc=tuple(int(x) % n for x, n in zip(disc, spec.torsion)),
        )

    @classmethod
    def identity(cls, spec: GroupSpec) -> "GroupElement":
        return cls.make(spec, [0.0] * spec.d, [0.0] * spec.torus, [0] * spec.t)

    def conforms(self, spec: GroupSpec) -> None:
        _check_len("real", self.real, spec.d)
        _check_len("torus", self.torus, spec.torus)
        _check_len("disc", self.disc, spec.t)


@dataclass(frozen=True)
class DualElement:
    real: Tuple[float, ...] = ()
    zfreq: Tuple[int, ...] = ()
    disc: Tuple[int, ...] = ()

    @classmethod
    def make(cls, spec: GroupSpec, real: Iterable[float] = (), zfreq: Iterable[int] = (),
             disc: Iterable[int] = ()) -> "DualElement":
        real, zfreq, disc = tuple(real), tuple(zfreq), tuple(disc)
        _check_len("real", real, spec.d)
        _check_len("zfreq", zfreq, spec.torus)
        _check_len("disc", disc, spec.t)
        return cls(
            real=tuple(float(x) for x in real),
            zfreq=tuple(int(k) for k in zfreq),
            disc=tuple(int(x) % n for x, n in zip(disc, spec.torsion)),
        )

    @classmethod
    def zero(cls, spec: GroupSpec) -> "DualElement":
        return cls.make(spec, [0.0] * spec.d, [0] * spec.torus, [0] * spec.t)

    def conforms(self, spec: GroupSpec) -> None:
        _check_len("real", self.real, spec.d)
        _check_len("zfreq", self.zfreq, spec.torus)
        _check_len("disc", self.disc, spec.t)


def add(a: GroupElement, b: GroupElement, spec: GroupSpec) -> GroupElement:
    a.conforms(spec)
    b.conforms(spec)
    return GroupElement.make(
        spec,
        np.add(a.real, b.real) if spec.d else (),
        np.add(a.torus, b.torus) if spec.torus else (),
        np.add(a.disc, b.disc) if spec.t else (),
    )


def negate(a: GroupElement, spec: GroupSpec) -> GroupElement:
    a.conforms(spec)
    return GroupElement.make(spec, [-x for x in a.real], [-x for x in a.torus], [-x for x in a.disc])


def dual_add(a: DualElement, b: DualElement, spec: GroupSpec) -> DualElement:
    a.conforms(spec)
    b.conforms(spec)
    return DualElement.make(
        spec,
        np.add(a.real, b.real) if spec.d else (),
        np.add(a.zfreq, b.zfreq) if spec.torus else (),
        np.add(a.disc, b.disc) if spec.t else (),
    )


def _phase(spec: GroupSpec, xi_real, xi_z, xi_disc, g_real, g_torus, g_disc) -> np.ndarray:
    """Pairing exponent xi.real.g.real + xi.z.g.torus + sum xi.disc g.disc / n, as broadcasting arrays."""
    phase = 0.0
    if spec.d:
        phase = phase + xi_real @ g_real.T
    if spec.torus:
        phase = phase + xi_z @ g_torus.T
    if spec.t:
        # integer products first, reduced mod n, so the exponent stays exact
        inv = np.asarray(spec.torsion, dtype=np.int64)
        prods = np.mod(xi_disc[:, None, :].astype(np.int64) * g_disc[None, :, :].astype(np.int64), inv)
        phase = phase + np.sum(prods / inv, axis=2)
    return np.asarray(phase, dtype=float)


def character_eval(xi: DualElement, g: GroupElement, spec: GroupSpec) -> complex:
    """exp(2 pi i (xi, g)) for the fixed identification of the dual group."""
    xi.conforms(spec)
    g.conforms(spec)
    phase = _phase(
        spec,
        np.asarray([xi.real], dtype=float), np.asarray([xi.zfreq], dtype=float),
        np.asarray([xi.disc], dtype=np.int64),
        np.asarray([g.real], dtype=float), np.asarray([g.torus], dtype=float),
        np.asarray([g.disc], dtype=np.int64),
    )
    return complex(np.exp(2j * np.pi * np.mod(phase[0, 0] if np.ndim(phase) else phase, 1.0)))


def character_matrix(spec: GroupSpec,
                     points: Tuple[np.ndarray, np.ndarray, np.ndarray],
                     freqs: Tuple[np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    """
    Matrix E[j, k] = character_eval(freq_k, point_j).

    ``points`` is (real (n, d), torus (n, l), disc (n, t)); ``freqs`` is
    (real (k, d), zfreq (k, l), disc (k, t)).
    """
    p_real, p_torus, p_disc = (np.asarray(a) for a in points)
    f_real, f_z, f_disc = (np.asarray(a) for a in freqs)
    n, k = len(p_real), len(f_real)
    for name, arr, width in (("point real", p_real, spec.d), ("point torus", p_torus, spec.torus),
                             ("point disc", p_disc, spec.t), ("freq real", f_real, spec.d),
                             ("freq zfreq", f_z, spec.torus), ("freq disc", f_disc, spec.t)):
        if arr.ndim != 2 or arr.shape[1] != width:
            raise StructuralError(f"{name} has shape {arr.shape}, group expects width {width}")
    phase = np.zeros((k, n))
    if spec.d or spec.torus or spec.t:
        phase = phase + _phase(spec, f_real.astype(float), f_z.astype(float), f_disc,
                               p_real.astype(float), p_torus.astype(float), p_disc)
    return np.exp(2j * np.pi * np.mod(phase, 1.0)).T


# --------------------------------------------------------------------------- #
#  measures
# --------------------------------------------------------------------------- #
def haar_measure(real_lo: Sequence[float], real_hi: Sequence[float], spec: GroupSpec,
                 residues: Optional[Sequence[Sequence[int]]] = None) -> float:
    """
    Haar measure of box x T^l x R, R a set of residues (all of D when ``None``).

    An inverted side counts as an empty box.
    """
    lo = np.asarray(real_lo, dtype=float).reshape(-1)
    hi = np.asarray(real_hi, dtype=float).reshape(-1)
    _check_len("box lower corner", lo, spec.d)
    _check_len("box upper corner", hi, spec.d)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise PreconditionError("Haar measure of an unbounded box")
    volume = float(np.prod(np.clip(hi - lo, 0.0, None))) if spec.d else 1.0
    if residues is None:
        count = spec.order
    else:
        count = len({tuple(int(x) % n for x, n in zip(r, spec.torsion)) for r in residues})
    return volume * count


def dual_haar_measure(real_volume: float, zfreq_count: int, residue_count: int,
                      spec: GroupSpec) -> float:
    return float(real_volume) * int(zfreq_count) * int(residue_count) / spec.order
