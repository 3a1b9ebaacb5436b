"""
Half-open boxes, integer points of lattices B Z^N inside a box, and the
distance helpers used to certify separation and density of point sets.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from .exceptions import (
    EnumerationLimitError,
    PreconditionError,
    SpecParseError,
    StructuralError,
    UndefinedResultError,
)

logger = logging.getLogger(__name__)

_CHUNK = 1 << 16


@dataclass(frozen=True)
class Box:
    """Axis-aligned half-open box [lo, hi). A zero-dimensional box holds the single point of R^0."""

    lo: Tuple[float, ...] = ()
    hi: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(x) for x in self.lo))
        object.__setattr__(self, "hi", tuple(float(x) for x in self.hi))
        if len(self.lo) != len(self.hi):
            raise StructuralError(f"box corners differ in length: {len(self.lo)} vs {len(self.hi)}")
        if any(np.isnan(self.lo)) or any(np.isnan(self.hi)):
            raise PreconditionError("box corners must not be NaN")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> np.ndarray:
        return np.clip(np.subtract(self.hi, self.lo), 0.0, None) if self.dim else np.zeros(0)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides)) if self.dim else 1.0

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    @property
    def is_empty(self) -> bool:
        return bool(np.any(np.asarray(self.hi) <= np.asarray(self.lo))) if self.dim else False

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if self.dim else pts.reshape(-1, 0)
        if pts.shape[1] != self.dim:
            raise StructuralError(f"points of width {pts.shape[1]} tested against a {self.dim}-box")
        if not self.dim:
            return np.ones(len(pts), dtype=bool)
        return np.all((pts >= np.asarray(self.lo)) & (pts < np.asarray(self.hi)), axis=1)

    def overlaps(self, other: "Box") -> bool:
        if self.dim != other.dim:
            raise StructuralError("boxes of different dimension")
        if self.is_empty or other.is_empty:
            return False
        return all(a < d and c < b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def product(self, other: "Box") -> "Box":
        return Box(self.lo + other.lo, self.hi + other.hi)

    def translate(self, offset) -> "Box":
        off = np.broadcast_to(np.asarray(offset, dtype=float), (self.dim,))
        return Box(np.add(self.lo, off), np.add(self.hi, off))

    def dilate(self, factor: float) -> "Box":
        """Scaled by ``factor`` about its centre."""
        c, half = self.center, (np.subtract(self.hi, self.lo)) / 2.0
        return Box(c - factor * half, c + factor * half)

    def negate(self) -> "Box":
        return Box([-x for x in self.hi], [-x for x in self.lo])

    @classmethod
    def cube(cls, corner, side: float) -> "Box":
        corner = np.asarray(corner, dtype=float).reshape(-1)
        return cls(corner, corner + side)

    @classmethod
    def parse(cls, text: str, dim: Optional[int] = None) -> "Box":
        """
        Parses "lo:hi" or "lo:hi,lo:hi,...". A single range is repeated ``dim`` times when given.
        """
        try:
            parts = [p.strip() for p in str(text).split(",") if p.strip()]
            pairs = [tuple(float(v) for v in p.split(":", 1)) for p in parts]
        except ValueError as exc:
            raise SpecParseError(f"Cannot parse box {text!r}: {exc}") from exc
        if not pairs or any(len(p) != 2 for p in pairs):
            raise SpecParseError(f"Cannot parse box {text!r}: expected lo:hi ranges")
        if dim is not None and len(pairs) == 1 and dim != 1:
            pairs = pairs * dim
        if dim is not None and len(pairs) != dim:
            raise SpecParseError(f"Box {text!r} has {len(pairs)} ranges, expected {dim}")
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, data: Any) -> "Box":
        if isinstance(data, str):
            return cls.parse(data)
        if isinstance(data, dict) and {"lo", "hi"} <= set(data):
            return cls(data["lo"], data["hi"])
        if isinstance(data, (list, tuple)) and len(data) == 2:
            return cls(data[0], data[1])
        raise SpecParseError(f"Invalid box: {data!r}")


# --------------------------------------------------------------------------- #
#  integer points of B Z^N
# --------------------------------------------------------------------------- #
def _matrix(basis) -> np.ndarray:
    return np.asarray(getattr(basis, "B", basis), dtype=float)


def enumerate_lattice(basis: Union[np.ndarray, Any],
                      target: Box,
                      shift: Optional[Sequence[float]] = None,
                      max_candidates: Optional[int] = None) -> np.ndarray:
    """
    All integer vectors z with B z + shift inside ``target``.

    The target's extreme corners are pulled back through B^-1 to an integer
    bounding box (one index of margin on each side). The widest coordinate is
    solved exactly per combination of the others by intersecting one interval
    per row, so only the remaining coordinates are scanned.

    Args:
        basis (np.ndarray): N x N basis matrix or anything with a ``B`` attribute.
        target (Box): Bounded half-open box in R^N.
        shift (list, optional): Offset added to every lattice vector.
        max_candidates (int, optional): Budget on the number of scanned combinations.

    Returns:
        np.ndarray: int64 array (k, N) in lexicographic order.
    """
    B = _matrix(basis)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise StructuralError(f"basis must be square, got shape {B.shape}")
    n = B.shape[0]
    if target.dim != n:
        raise StructuralError(f"target box has dimension {target.dim}, basis {n}")
    if not target.is_bounded:
        raise PreconditionError("enumeration target must be bounded")
    if target.is_empty:
        return np.zeros((0, n), dtype=np.int64)
    offset = np.zeros(n) if shift is None else np.asarray(shift, dtype=float).reshape(n)

    lu, piv = linalg.lu_factor(B)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-14 * max(pivots.max(), 1.0):
        raise PreconditionError("degenerate basis")
    inv = linalg.lu_solve((lu, piv), np.eye(n))

    lo = np.asarray(target.lo) - offset
    hi = np.asarray(target.hi) - offset
    pos, neg = np.clip(inv, 0.0, None), np.clip(inv, None, 0.0)
    zlo = np.floor(pos @ lo + neg @ hi).astype(np.int64) - 1
    zhi = np.ceil(pos @ hi + neg @ lo).astype(np.int64) + 1
    widths = zhi - zlo + 1

    last = int(np.argmax(widths))
    outer = [i for i in range(n) if i != last]
    sizes = tuple(int(w) for w in widths[outer])
    total = int(np.prod(sizes, dtype=object)) if sizes else 1
    budget = max_candidates if max_candidates is not None else 50_000_000
    if total > budget:
        raise EnumerationLimitError(
            f"enumeration would scan {total} index combinations (budget {budget})"
        )
    logger.debug("enumerate_lattice: N=%d, scanning %d combinations, solving axis %d", n, total, last)

    col = B[:, last]
    outer_cols = B[:, outer]
    found = []
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(total, start + _CHUNK))
        if outer:
            zo = np.stack(np.unravel_index(flat, sizes), axis=1).astype(np.int64) + zlo[outer]
        else:
            zo = np.zeros((len(flat), 0), dtype=np.int64)
        base = zo @ outer_cols.T + offset
        tlo = np.full(len(zo), -np.inf)
        thi = np.full(len(zo), np.inf)
        for j in range(n):
            cj = col[j]
            if cj == 0.0:
                continue
            a = (target.lo[j] - base[:, j]) / cj
            b = (target.hi[j] - base[:, j]) / cj
            tlo = np.maximum(tlo, np.minimum(a, b))
            thi = np.minimum(thi, np.maximum(a, b))
        tstart = np.maximum(np.ceil(tlo) - 1, zlo[last]).astype(np.int64)
        tstop = np.minimum(np.floor(thi) + 1, zhi[last]).astype(np.int64)
        counts = np.clip(tstop - tstart + 1, 0, None)
        count = int(counts.sum())
        if count == 0:
            continue
        rows = np.repeat(np.arange(len(zo)), counts)
        steps = np.arange(count) - np.repeat(np.cumsum(counts) - counts, counts)
        z = np.empty((count, n), dtype=np.int64)
        z[:, outer] = zo[rows]
        z[:, last] = tstart[rows] + steps
        keep = target.contains(z @ B.T + offset)
        found.append(z[keep])

    if not found:
        return np.zeros((0, n), dtype=np.int64)
    z = np.concatenate(found)
    return z[np.lexsort(z.T[::-1])]


# --------------------------------------------------------------------------- #
#  distances
# --------------------------------------------------------------------------- #
def nearest_pair(points) -> Tuple[float, int, int]:
    """Smallest Euclidean distance between two distinct rows, with their indices."""
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        raise UndefinedResultError("separation needs at least two points")
    if pts.shape[1] == 0:
        return 0.0, 0, 1
    dist, idx = cKDTree(pts).query(pts, k=2)
    # exact duplicates may come back in either slot
    other = np.where(idx[:, 0] == np.arange(len(pts)), idx[:, 1], idx[:, 0])
    i = int(np.argmin(dist[:, 1]))
    return float(dist[i, 1]), i, int(other[i])


def _images(real: np.ndarray, torus: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Copies of each (real, torus) row shifted by every vector of {-1, 0, 1}^l in the torus directions."""
    ell = torus.shape[1]
    shifts = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=ell)), dtype=float).reshape(3 ** ell, ell)
    k = len(real)
    coords = np.concatenate(
        [np.hstack([real, torus + s]) for s in shifts], axis=0
    ) if k else np.zeros((0, real.shape[1] + ell))
    owners = np.tile(np.arange(k), len(shifts))
    return coords, owners


def product_min_distance(real, torus, disc) -> Tuple[float, Tuple[int, int]]:
    """
    Minimum pairwise distance in R^d x T^l x D for the product metric
    sqrt(|dx|^2 + |dt|_T^2) + [disc differs], |dt|_T being the periodic distance.

    Returns:
        tuple: (distance, (i, j)) for a closest pair.
    """
    real = np.asarray(real, dtype=float)
    k = len(real)
    if k < 2:
        raise UndefinedResultError("separation needs at least two points")
    torus = np.asarray(torus, dtype=float).reshape(k, -1)
    disc = np.asarray(disc, dtype=np.int64).reshape(k, -1)
    real = real.reshape(k, -1)

    if disc.shape[1]:
        _, fiber = np.unique(disc, axis=0, return_inverse=True)
        fiber = fiber.reshape(-1)
    else:
        fiber = np.zeros(k, dtype=np.int64)
    members = [np.flatnonzero(fiber == f) for f in range(int(fiber.max()) + 1)]
    width = real.shape[1] + torus.shape[1]
    best, pair = np.inf, (0, 1)

    if width == 0:
        for idx in members:
            if len(idx) >= 2:
                return 0.0, (int(idx[0]), int(idx[1]))
        return 1.0, (int(members[0][0]), int(members[1][0]))

    trees, owners = [], []
    for idx in members:
        coords, own = _images(real[idx], torus[idx])
        trees.append(cKDTree(coords))
        owners.append(own)

    for f, idx in enumerate(members):
        pts = np.hstack([real[idx], torus[idx]])
        if len(idx) >= 2:
            kq = min(3 ** torus.shape[1] + 1, trees[f].n)
            dist, nb = trees[f].query(pts, k=kq)
            dist, nb = dist.reshape(len(idx), -1), nb.reshape(len(idx), -1)
            other = owners[f][nb]
            dist = np.where(other == np.arange(len(idx))[:, None], np.inf, dist)
            col = np.argmin(dist, axis=1)
            row = int(np.argmin(dist[np.arange(len(idx)), col]))
            value = float(dist[row, col[row]])
            if value < best:
                best, pair = value, (int(idx[row]), int(idx[other[row, col[row]]]))
        for g in range(f + 1, len(members)):
            dist, nb = trees[g].query(pts, k=1)
            row = int(np.argmin(dist))
            value = float(dist[row]) + 1.0
            if value < best:
                best, pair = value, (int(idx[row]), int(members[g][owners[g][nb[row]]]))
    return best, pair


def covering_radius(points, probes: int = 4096) -> float:
    """
    Covering radius of a point cloud on the torus [0,1)^k.

    Exact (half the largest circular gap) for k = 1; for k >= 2 the largest
    distance from a regular probe grid to the cloud.
    """
    pts = np.mod(np.asarray(points, dtype=float), 1.0)
    pts = np.where(pts >= 1.0, 0.0, pts)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    k = pts.shape[1]
    if k == 0:
        return 0.0
    if len(pts) == 0:
        return float(np.sqrt(k) / 2.0)
    if k == 1:
        xs = np.unique(pts[:, 0])
        gaps = np.diff(np.concatenate([xs, [xs[0] + 1.0]]))
        return float(gaps.max() / 2.0)
    side = max(8, int(round(probes ** (1.0 / k))))
    axis = (np.arange(side) + 0.5) / side
    grid = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    dist, _ = cKDTree(pts, boxsize=1.0).query(grid)
    return float(dist.max())
