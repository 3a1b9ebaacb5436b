"""
Cut-and-project schemes (R^m, G, H) with G = R^d x T^l x D.

Every scheme is stored as a lifted basis B of R^N, N = m + d + l + t, factored
as B = M U:

    U = [[I, 0, W], [0, I, 0], [0, 0, diag(1/n)]]
    M = [[A, 0, 0], [c e_1^T, I, 0], [0, 0, I]]

A is the base matrix acting on the pre-image vector in R^{m+d}, c = alpha_1 gamma
couples the torus to its first coordinate, and the columns of W are the
rational translations attached to the generators of the cyclic factors. The
columns of B generate H through p1 = first m rows, the physical rows, the
torus rows mod 1 and the torsion rows times n.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .config import Settings, load_settings
from .exceptions import (
    ConsistencyError,
    EnumerationLimitError,
    ObstructedGroupError,
    PreconditionError,
    SlotCollisionError,
    SpecParseError,
    StructuralError,
)
from .groups import (
    DualElement,
    GroupElement,
    GroupSpec,
    independent_vector,
    is_prime,
    prime_factors,
    as_rows,
    reduce_torus,
)
from .lattice import covering_radius, nearest_pair, product_min_distance

logger = logging.getLogger(__name__)

LAYOUTS = ("coupled", "simple")


# --------------------------------------------------------------------------- #
#  existence
# --------------------------------------------------------------------------- #
def _prime_power(n: int, p: int) -> int:
    q = 1
    while n % (q * p) == 0:
        q *= p
    return q


def primary_decomposition(torsion: Sequence[int]) -> Dict[int, List[int]]:
    """Prime p -> orders p^e of the p-primary cyclic components of D, primes ascending."""
    out: Dict[int, List[int]] = {}
    for n in torsion:
        for p in prime_factors(int(n)):
            out.setdefault(p, []).append(_prime_power(int(n), p))
    return dict(sorted(out.items()))


def rank_p(torsion: Sequence[int], p: int) -> int:
    """Number of cyclic factors divisible by the prime ``p``."""
    if not is_prime(int(p)):
        raise PreconditionError(f"{p} is not prime")
    return sum(1 for n in torsion if int(n) % p == 0)


@dataclass(frozen=True)
class Existence:
    exists: bool
    limit: int
    prime: Optional[int] = None
    rank: int = 0

    def __bool__(self) -> bool:
        return self.exists

    @property
    def message(self) -> str:
        if self.exists:
            return "exists"
        return f"obstructed at p={self.prime}"


def scheme_exists(m: int, group: GroupSpec) -> Existence:
    """Exists unless some p-rank of D exceeds m + d; reports the smallest such prime."""
    if m < 1:
        raise PreconditionError("m must be a positive integer")
    limit = m + group.d
    for p, components in primary_decomposition(group.torsion).items():
        if len(components) > limit:
            return Existence(False, limit, p, len(components))
    return Existence(True, limit)


# --------------------------------------------------------------------------- #
#  parameters
# --------------------------------------------------------------------------- #
def build_T(alpha, beta) -> np.ndarray:
    """Symmetric block matrix [[0, alpha beta^T], [beta alpha^T, 0]] of spectral norm |alpha||beta|."""
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    b = np.atleast_1d(np.asarray(beta, dtype=float)) if np.size(beta) else np.zeros(0)
    if np.linalg.norm(a) * np.linalg.norm(b) >= 1.0:
        raise PreconditionError(
            f"|alpha| |beta| = {np.linalg.norm(a) * np.linalg.norm(b):.6g} must be < 1"
        )
    m, d = len(a), len(b)
    T = np.zeros((m + d, m + d))
    T[:m, m:] = np.outer(a, b)
    T[m:, :m] = np.outer(b, a)
    return T


@dataclass(frozen=True)
class Truncation:
    """Finite stand-in for a divisible factor: Z(p^inf) at level s, or Q with denominators Q."""

    p: Optional[int] = None
    s: Optional[int] = None
    q_denominator: Optional[int] = None

    def __post_init__(self):
        if self.q_denominator is not None:
            if self.p is not None or self.s is not None or self.q_denominator < 2:
                raise SpecParseError("a rational truncation takes only q_denominator >= 2")
        elif self.p is None or self.s is None or not is_prime(self.p) or self.s < 1:
            raise SpecParseError("a Pruefer truncation needs a prime p and a level s >= 1")

    @property
    def rational(self) -> bool:
        return self.q_denominator is not None

    @property
    def order(self) -> int:
        return int(self.q_denominator) if self.rational else int(self.p) ** int(self.s)

    def to_json(self) -> Dict[str, int]:
        if self.rational:
            return {"q_denominator": int(self.q_denominator)}
        return {"p": int(self.p), "s": int(self.s)}

    @classmethod
    def from_json(cls, data: Any) -> "Truncation":
        if not isinstance(data, dict) or not set(data) <= {"p", "s", "q_denominator"}:
            raise SpecParseError(f"Invalid truncation: {data!r}")
        try:
            return cls(**{k: int(v) for k, v in data.items()})
        except (TypeError, ValueError) as exc:
            raise SpecParseError(f"Invalid truncation {data!r}: {exc}") from exc


@dataclass(frozen=True)
class SchemeDescriptor:
    """The JSON-level description a scheme is built from."""

    m: int
    group: GroupSpec
    prime_offset: int = 0
    torsion_slots: Optional[Tuple[int, ...]] = None
    truncations: Tuple[Truncation, ...] = ()
    layout: str = "coupled"

    def __post_init__(self):
        if self.m < 1:
            raise SpecParseError("m must be a positive integer")
        if self.prime_offset < 0:
            raise SpecParseError("prime_offset must be non-negative")
        if self.layout not in LAYOUTS:
            raise SpecParseError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.layout == "simple" and (self.m != 1 or self.group.d != 1):
            raise SpecParseError("the simple layout needs m = d = 1")
        if self.torsion_slots is not None:
            object.__setattr__(self, "torsion_slots", tuple(int(j) for j in self.torsion_slots))

    def effective_group(self) -> GroupSpec:
        """The group with every truncation adjoined as a cyclic factor."""
        return GroupSpec(
            d=self.group.d,
            torus=self.group.torus,
            torsion=self.group.torsion + tuple(t.order for t in self.truncations),
        )

    @property
    def rational_count(self) -> int:
        return sum(1 for t in self.truncations if t.rational)

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "m": self.m,
            "group": self.group.to_json(),
            "prime_offset": self.prime_offset,
            "truncations": [t.to_json() for t in self.truncations],
            "layout": self.layout,
        }
        if self.torsion_slots is not None:
            out["torsion_slots"] = list(self.torsion_slots)
        return out

    @classmethod
    def from_json(cls, data: Any) -> "SchemeDescriptor":
        if not isinstance(data, dict):
            raise SpecParseError("scheme descriptor must be a JSON object")
        unknown = set(data) - {"m", "group", "prime_offset", "torsion_slots", "truncations", "layout"}
        if unknown:
            raise SpecParseError(f"Unknown scheme descriptor keys: {sorted(unknown)}")
        if "m" not in data or "group" not in data:
            raise SpecParseError("scheme descriptor needs 'm' and 'group'")
        try:
            slots = data.get("torsion_slots")
            return cls(
                m=int(data["m"]),
                group=GroupSpec.from_json(data["group"]),
                prime_offset=int(data.get("prime_offset", 0)),
                torsion_slots=None if slots is None else tuple(int(j) for j in slots),
                truncations=tuple(Truncation.from_json(t) for t in data.get("truncations", [])),
                layout=str(data.get("layout", "coupled")),
            )
        except (TypeError, ValueError) as exc:
            raise SpecParseError(f"Invalid scheme descriptor: {exc}") from exc


def fibonacci_descriptor() -> SchemeDescriptor:
    """m = d = 1, H = {(n + alpha k, n + beta k)} with alpha = 1/sqrt 2, beta = 1/sqrt 3."""
    return SchemeDescriptor(m=1, group=GroupSpec(d=1), layout="simple")


def assign_slots(torsion: Sequence[int],
                 limit: int,
                 overrides: Optional[Sequence[int]] = None,
                 force: bool = False) -> Dict[Tuple[int, int], int]:
    """
    Maps (factor index, prime) to a zero-based slot in range(limit).

    By default the factors sharing a prime take the slots 0, 1, 2, ... in
    order; ``overrides`` gives one 1-based slot per factor instead. With
    ``force`` a prime that runs out of slots wraps around cyclically.
    """
    if overrides is not None:
        if len(overrides) != len(torsion):
            raise SpecParseError(
                f"torsion_slots has {len(overrides)} entries for {len(torsion)} cyclic factors"
            )
        bad = [j for j in overrides if not 1 <= int(j) <= limit]
        if bad:
            raise SpecParseError(f"torsion_slots must lie in 1..{limit}, got {bad}")
    taken: Dict[int, List[int]] = {}
    slots: Dict[Tuple[int, int], int] = {}
    for i, n in enumerate(torsion):
        for p in prime_factors(int(n)):
            used = taken.setdefault(p, [])
            j = int(overrides[i]) - 1 if overrides is not None else len(used)
            if j >= limit:
                if not force:
                    raise ObstructedGroupError(p, rank_p(torsion, p), limit)
                j %= limit
            if j in used and not force:
                raise SlotCollisionError(p, j + 1)
            used.append(j)
            slots[(i, p)] = j
    return slots


def translation_numerators(torsion: Sequence[int],
                           slots: Mapping[Tuple[int, int], int],
                           size: int) -> np.ndarray:
    """
    Integer matrix Wnum with W = Wnum / n column-wise.

    Column i is n_i times sum_p (u_p / p^e) e_slot(i, p), u_p the inverse of
    n_i / p^e mod p^e. When every prime of a factor shares one slot this is a
    single entry congruent to 1 mod n_i (the translation 1/n_i along that slot).
    """
    wnum = np.zeros((size, len(torsion)), dtype=np.int64)
    for i, n in enumerate(torsion):
        n = int(n)
        for p in prime_factors(n):
            q = _prime_power(n, p)
            u = pow((n // q) % q, -1, q) if q > 1 else 0
            wnum[slots[(i, p)], i] += u * (n // q)
    return wnum


@dataclass(frozen=True)
class CpSchemeParams:
    """
    Scheme parameters. ``group`` already contains the truncation factors and
    ``slots`` maps (factor index, prime) to a zero-based translation slot.
    """

    m: int
    group: GroupSpec
    alpha: Tuple[float, ...]
    beta: Tuple[float, ...]
    gamma: Tuple[float, ...] = ()
    eta: Tuple[float, ...] = ()
    slots: Tuple[Tuple[int, int, int], ...] = ()
    layout: str = "coupled"
    force: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "eta"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        object.__setattr__(self, "slots", tuple(sorted(tuple(int(v) for v in s) for s in self.slots)))
        if len(self.alpha) != self.m or len(self.beta) != self.group.d or len(self.gamma) != self.group.torus:
            raise StructuralError(
                f"alpha/beta/gamma lengths {len(self.alpha)}/{len(self.beta)}/{len(self.gamma)} "
                f"do not match m={self.m}, d={self.group.d}, l={self.group.torus}"
            )
        if self.layout not in LAYOUTS:
            raise PreconditionError(f"unknown layout {self.layout!r}")
        if self.layout == "simple" and (self.m != 1 or self.group.d != 1):
            raise PreconditionError("the simple layout needs m = d = 1")

    @property
    def slot_map(self) -> Dict[Tuple[int, int], int]:
        return {(i, p): j for i, p, j in self.slots}

    def to_json(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "group": self.group.to_json(),
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "gamma": list(self.gamma),
            "eta": list(self.eta),
            "slots": [{"factor": i, "prime": p, "slot": j + 1} for i, p, j in self.slots],
            "layout": self.layout,
        }


def make_params(descriptor: SchemeDescriptor, force: bool = False) -> CpSchemeParams:
    """
    Draws alpha, beta, gamma, eta as consecutive blocks of independent_vector,
    raising the prime offset until |alpha| |beta| < 1.
    """
    group = descriptor.effective_group()
    m, d = descriptor.m, group.d
    if not force:
        existence = scheme_exists(m, group)
        if not existence:
            raise ObstructedGroupError(existence.prime, existence.rank, existence.limit)
    slots = assign_slots(group.torsion, m + d, descriptor.torsion_slots, force=force)

    count = m + d + group.torus + descriptor.rational_count
    offset = descriptor.prime_offset
    while True:
        xi = independent_vector(count, offset=offset)
        alpha, beta = xi[:m], xi[m:m + d]
        if descriptor.layout == "simple" or np.linalg.norm(alpha) * np.linalg.norm(beta) < 1.0:
            break
        offset += 1
    if offset != descriptor.prime_offset:
        logger.info("prime offset raised from %d to %d so that |alpha||beta| < 1",
                    descriptor.prime_offset, offset)
    return CpSchemeParams(
        m=m,
        group=group,
        alpha=alpha,
        beta=beta,
        gamma=xi[m + d:m + d + group.torus],
        eta=xi[m + d + group.torus:],
        slots=tuple((i, p, j) for (i, p), j in slots.items()),
        layout=descriptor.layout,
        force=force,
    )


# --------------------------------------------------------------------------- #
#  bases
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class SlotLayout:
    m: int
    d: int
    torus: int
    orders: Tuple[int, ...] = ()

    @property
    def N(self) -> int:
        return self.m + self.d + self.torus + len(self.orders)

    @property
    def internal(self) -> slice:
        return slice(0, self.m)

    @property
    def physical(self) -> slice:
        return slice(self.m, self.m + self.d)

    @property
    def torus_rows(self) -> slice:
        return slice(self.m + self.d, self.m + self.d + self.torus)

    @property
    def torsion_rows(self) -> slice:
        return slice(self.m + self.d + self.torus, self.N)

    def kinds(self) -> List[str]:
        return (["internal"] * self.m + ["physical"] * self.d + ["torus"] * self.torus
                + [f"torsion:{n}" for n in self.orders])

    def to_json(self) -> Dict[str, Any]:
        return {"m": self.m, "d": self.d, "torus": self.torus, "orders": list(self.orders)}


@dataclass(frozen=True, eq=False)
class LatticeBasis:
    """Columns of ``B`` generate a lattice of R^N; ``layout`` names what each coordinate means."""

    B: np.ndarray
    layout: Optional[SlotLayout] = None

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise StructuralError(f"basis must be square, got shape {B.shape}")
        if self.layout is not None and self.layout.N != B.shape[0]:
            raise StructuralError("slot layout does not match the basis size")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def N(self) -> int:
        return self.B.shape[0]

    @property
    def volume(self) -> float:
        """|det B| from an LU factorization with partial pivoting."""
        lu, _ = linalg.lu_factor(self.B)
        return float(np.abs(np.prod(np.diag(lu))))

    def vectors(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.B.T


@dataclass(frozen=True)
class Projected:
    """Vectorized projections of lattice vectors: p1 (or q1) rows and the group (or dual) part."""

    internal: np.ndarray
    real: np.ndarray
    torus: np.ndarray
    disc: np.ndarray


@dataclass(frozen=True, eq=False)
class CpScheme:
    params: CpSchemeParams
    basis: LatticeBasis
    dual_basis: LatticeBasis
    section_mass: float
    dual_section_mass: float
    base: np.ndarray
    base_dual: np.ndarray
    coupling: np.ndarray
    numerators: np.ndarray
    descriptor: Optional[SchemeDescriptor] = field(default=None)

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def group(self) -> GroupSpec:
        return self.params.group

    @property
    def orders(self) -> np.ndarray:
        return np.asarray(self.group.torsion, dtype=np.int64)

    @property
    def size(self) -> int:
        """Dimension m + d of the base lattice."""
        return self.m + self.group.d

    @property
    def layout(self) -> SlotLayout:
        return self.basis.layout

    # ---------------- primal side ---------------- #
    def translations(self, residues) -> np.ndarray:
        """Pre-image translations W r, one row per residue row."""
        r = as_rows(residues, self.group.t, np.int64)
        if not self.group.t:
            return np.zeros((len(r), self.size))
        return r @ (self.numerators / self.orders).T

    def lift(self, v, residues) -> np.ndarray:
        """
        Canonical lattice coordinates of the elements with base vector ``v`` and
        residue ``residues``: torsion index r in [0, n), torus index chosen so the
        torus rows land in [0, 1).
        """
        v = np.asarray(v, dtype=np.int64).reshape(-1, self.size)
        r = np.mod(as_rows(residues, self.group.t, np.int64), self.orders)
        if len(r) == 1 and len(v) != 1:
            r = np.repeat(r, len(v), axis=0)
        pre = v + self.translations(r)
        zk = -np.floor(np.outer(pre[:, 0], self.coupling)).astype(np.int64)
        return np.hstack([v, zk.reshape(len(v), -1), r])

    def project(self, z, tol: Optional[float] = None) -> Projected:
        tol = load_settings().lattice_tolerance if tol is None else tol
        lay = self.layout
        z = np.asarray(z, dtype=np.int64).reshape(-1, lay.N)
        y = self.basis.vectors(z)
        scaled = y[:, lay.torsion_rows] * self.orders
        residue = np.rint(scaled)
        if scaled.size and np.max(np.abs(scaled - residue)) > tol:
            raise ConsistencyError(
                f"torsion lift off the 1/n grid by {np.max(np.abs(scaled - residue)):.3g}"
            )
        return Projected(
            internal=y[:, lay.internal],
            real=y[:, lay.physical],
            torus=reduce_torus(y[:, lay.torus_rows]),
            disc=np.mod(residue.astype(np.int64), self.orders) if self.group.t else residue.astype(np.int64),
        )

    # ---------------- dual side ---------------- #
    def dual_disc(self, a) -> np.ndarray:
        """Residue of the dual vectors with base coordinates ``a``: -Wnum^T a mod n."""
        a = np.asarray(a, dtype=np.int64).reshape(-1, self.size)
        if not self.group.t:
            return np.zeros((len(a), 0), dtype=np.int64)
        return np.mod(-(a @ self.numerators), self.orders)

    def dual_lift(self, a, kappa) -> np.ndarray:
        """Dual lattice coordinates w = (a, kappa, s) with the torsion row in [0, n)."""
        a = np.asarray(a, dtype=np.int64).reshape(-1, self.size)
        kappa = as_rows(kappa, self.group.torus, np.int64)
        if len(kappa) == 1 and len(a) != 1:
            kappa = np.repeat(kappa, len(a), axis=0)
        if self.group.t:
            b = a @ self.numerators
            s = -((-b) // self.orders)
        else:
            s = np.zeros((len(a), 0), dtype=np.int64)
        return np.hstack([a, kappa, s])

    def dual_project(self, w, tol: Optional[float] = None) -> Projected:
        tol = load_settings().lattice_tolerance if tol is None else tol
        lay = self.layout
        w = np.asarray(w, dtype=np.int64).reshape(-1, lay.N)
        y = self.dual_basis.vectors(w)
        rows = np.hstack([y[:, lay.torus_rows], y[:, lay.torsion_rows]])
        ints = np.rint(rows)
        if rows.size and np.max(np.abs(rows - ints)) > tol:
            raise ConsistencyError(
                f"dual torus/torsion rows off the integers by {np.max(np.abs(rows - ints)):.3g}"
            )
        ints = ints.astype(np.int64)
        return Projected(
            internal=y[:, lay.internal],
            real=y[:, lay.physical],
            torus=ints[:, :self.group.torus],
            disc=np.mod(ints[:, self.group.torus:], self.orders) if self.group.t else ints[:, self.group.torus:],
        )

    def to_json(self) -> Dict[str, Any]:
        return {
            "descriptor": self.descriptor.to_json() if self.descriptor else None,
            "params": self.params.to_json(),
            "layout": self.layout.to_json(),
            "basis": self.basis.B.tolist(),
            "dual_basis": self.dual_basis.B.tolist(),
            "section_mass": self.section_mass,
            "dual_section_mass": self.dual_section_mass,
        }


def base_matrix(params: CpSchemeParams) -> np.ndarray:
    if params.layout == "simple":
        A = np.array([[1.0, params.alpha[0]], [1.0, params.beta[0]]])
    else:
        A = np.eye(params.m + params.group.d) + build_T(params.alpha, params.beta)
    if params.eta:
        A[0, 0] += params.alpha[0] * float(np.sum(params.eta))
    return A


def _check_slots(params: CpSchemeParams) -> None:
    group, limit = params.group, params.m + params.group.d
    if not params.force:
        existence = scheme_exists(params.m, group)
        if not existence:
            raise ObstructedGroupError(existence.prime, existence.rank, existence.limit)
    slots = params.slot_map
    expected = {(i, p) for i, n in enumerate(group.torsion) for p in prime_factors(n)}
    if set(slots) != expected:
        raise StructuralError("torsion slots must cover every (factor, prime) pair exactly once")
    seen: Dict[Tuple[int, int], bool] = {}
    for (i, p), j in sorted(slots.items()):
        if not 0 <= j < limit:
            raise StructuralError(f"slot {j + 1} outside 1..{limit}")
        if (p, j) in seen and not params.force:
            raise SlotCollisionError(p, j + 1)
        seen[(p, j)] = True


def build_scheme(params: CpSchemeParams,
                 settings: Optional[Settings] = None,
                 descriptor: Optional[SchemeDescriptor] = None) -> CpScheme:
    """
    Builds the lifted basis, its dual B^-T and both section masses.

    Raises:
        ObstructedGroupError: some p-rank exceeds m + d (unless ``params.force``).
        SlotCollisionError: two components of one prime share a slot.
        ConsistencyError: the dual or the mass identity misses its tolerance.
    """
    settings = settings or load_settings()
    _check_slots(params)
    group = params.group
    m, d, ell, t = params.m, group.d, group.torus, group.t
    b = m + d
    layout = SlotLayout(m=m, d=d, torus=ell, orders=group.torsion)
    N = layout.N

    A = base_matrix(params)
    c = params.alpha[0] * np.asarray(params.gamma, dtype=float)
    wnum = translation_numerators(group.torsion, params.slot_map, b)
    orders = np.asarray(group.torsion, dtype=float)

    M = np.eye(N)
    M[:b, :b] = A
    M[b:b + ell, 0] = c
    U = np.eye(N)
    if t:
        U[:b, b + ell:] = wnum / orders
        U[b + ell:, b + ell:] = np.diag(1.0 / orders)
    B = M @ U

    lu = linalg.lu_factor(B)
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() <= 1e-14 * pivots.max():
        raise ConsistencyError("lifted basis is singular")
    dual = linalg.lu_solve(lu, np.eye(N), trans=1)
    residual = float(np.max(np.abs(B.T @ dual - np.eye(N))))
    if residual > settings.dual_tolerance:
        raise ConsistencyError(f"|B^T B^-T - I| = {residual:.3g} exceeds {settings.dual_tolerance:g}")

    order = float(np.prod(orders)) if t else 1.0
    basis = LatticeBasis(B, layout)
    dual_basis = LatticeBasis(dual, layout)
    mass = basis.volume * order
    dual_mass = dual_basis.volume / order
    if abs(mass * dual_mass - 1.0) > settings.lattice_tolerance:
        raise ConsistencyError(f"s(H) s(Gamma) = {mass * dual_mass:.15g} is not 1")

    base_lu = linalg.lu_factor(A)
    base_dual = linalg.lu_solve(base_lu, np.eye(b), trans=1)
    logger.debug("built scheme m=%d group=%s: s(H)=%.12g", m, group.to_json(), mass)
    return CpScheme(
        params=params,
        basis=basis,
        dual_basis=dual_basis,
        section_mass=mass,
        dual_section_mass=dual_mass,
        base=A,
        base_dual=base_dual,
        coupling=c,
        numerators=wnum,
        descriptor=descriptor,
    )


def scheme_from_descriptor(descriptor: SchemeDescriptor,
                           force: bool = False,
                           settings: Optional[Settings] = None) -> CpScheme:
    return build_scheme(make_params(descriptor, force=force), settings=settings, descriptor=descriptor)


def scheme_from_json(data: Dict[str, Any], settings: Optional[Settings] = None) -> CpScheme:
    """
    Rebuilds a scheme from ``scheme build`` output (or a bare descriptor) and
    checks the stored basis against the rebuilt one.
    """
    if not isinstance(data, dict):
        raise SpecParseError("scheme file must hold a JSON object")
    raw = data.get("descriptor") if "basis" in data else data
    if raw is None:
        raise SpecParseError("scheme file carries no descriptor")
    scheme = scheme_from_descriptor(SchemeDescriptor.from_json(raw), settings=settings)
    if "basis" in data:
        stored = np.asarray(data["basis"], dtype=float)
        if stored.shape != scheme.basis.B.shape or np.max(np.abs(stored - scheme.basis.B)) > 1e-12:
            raise ConsistencyError("stored basis does not match the basis rebuilt from its descriptor")
    return scheme


# --------------------------------------------------------------------------- #
#  point-level API
# --------------------------------------------------------------------------- #
def project_point(scheme: CpScheme, z) -> Tuple[np.ndarray, GroupElement]:
    """(p1, p2) of the lattice vector B z."""
    z = np.asarray(z, dtype=np.int64).reshape(-1)
    if len(z) != scheme.layout.N:
        raise StructuralError(f"z has length {len(z)}, basis expects {scheme.layout.N}")
    p = scheme.project(z)
    return p.internal[0], GroupElement.make(scheme.group, p.real[0], p.torus[0], p.disc[0])


def dual_project(scheme: CpScheme, w) -> Tuple[np.ndarray, DualElement]:
    """(q1, q2) of the dual lattice vector B^-T w."""
    w = np.asarray(w, dtype=np.int64).reshape(-1)
    if len(w) != scheme.layout.N:
        raise StructuralError(f"w has length {len(w)}, basis expects {scheme.layout.N}")
    q = scheme.dual_project(w)
    return q.internal[0], DualElement.make(scheme.group, q.real[0], q.torus[0], q.disc[0])


# --------------------------------------------------------------------------- #
#  structure check
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class StructureReport:
    radius: int
    count: int
    tolerance: float
    p1_min_distance: float
    p2_min_distance: float
    p1_covering_radius: float
    p2_covering_radius: float
    witness: Optional[Tuple[int, ...]] = None

    @property
    def p1_collision(self) -> bool:
        return self.p1_min_distance <= self.tolerance

    @property
    def p2_collision(self) -> bool:
        return self.p2_min_distance <= self.tolerance

    @property
    def ok(self) -> bool:
        return not (self.p1_collision or self.p2_collision)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radius": self.radius,
            "count": self.count,
            "tolerance": self.tolerance,
            "p1_min_distance": self.p1_min_distance,
            "p2_min_distance": self.p2_min_distance,
            "p1_covering_radius": self.p1_covering_radius,
            "p2_covering_radius": self.p2_covering_radius,
            "p1_collision": self.p1_collision,
            "p2_collision": self.p2_collision,
            "witness": list(self.witness) if self.witness is not None else None,
        }


def structure_check(scheme: CpScheme, index_radius: int, tol: Optional[float] = None,
                    settings: Optional[Settings] = None) -> StructureReport:
    """
    Checks injectivity and density proxies on every element whose base vector
    has sup-norm at most ``index_radius`` (all residues).

    The witness is the coordinate difference of the closest p1 pair; for an
    obstructed group forced through it is a non-zero lattice vector with p1 = 0.
    """
    settings = settings or load_settings()
    tol = settings.lattice_tolerance if tol is None else tol
    if index_radius < 1:
        raise PreconditionError("index radius must be >= 1")
    b = scheme.size
    residues = scheme.group.residues()
    count = (2 * index_radius + 1) ** b * len(residues)
    if count > settings.max_candidates:
        raise EnumerationLimitError(f"structure check would enumerate {count} elements")

    axis = np.arange(-index_radius, index_radius + 1)
    v = np.stack(np.meshgrid(*([axis] * b), indexing="ij"), axis=-1).reshape(-1, b)
    z = np.concatenate([scheme.lift(v, r) for r in residues])
    p = scheme.project(z)

    p1_min, i, j = nearest_pair(p.internal)
    p2_min, _ = product_min_distance(p.real, p.torus, p.disc)
    p1_cover = covering_radius(p.internal)
    cell = np.hstack([p.real, p.torus])
    p2_cover = 0.0
    for r in residues:
        mask = np.all(p.disc == r, axis=1) if scheme.group.t else np.ones(len(z), dtype=bool)
        p2_cover = max(p2_cover, covering_radius(cell[mask]))
    witness = tuple(int(x) for x in z[i] - z[j])
    logger.debug("structure check R=%d: %d elements, p1 min %.3g, p2 min %.3g",
                 index_radius, len(z), p1_min, p2_min)
    return StructureReport(
        radius=int(index_radius),
        count=int(len(z)),
        tolerance=float(tol),
        p1_min_distance=float(p1_min),
        p2_min_distance=float(p2_min),
        p1_covering_radius=float(p1_cover),
        p2_covering_radius=float(p2_cover),
        witness=witness,
    )
