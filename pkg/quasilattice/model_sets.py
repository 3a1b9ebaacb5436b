"""
Quasicrystals Lambda_S = {p2(h) : p1(h) in S} and dual model sets
M_K = {q1(g) : q2(g) in K}, enumerated inside an observation box.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .config import Settings, load_settings
from .exceptions import PreconditionError, SpecParseError, StructuralError
from .groups import GroupElement, GroupSpec, reduce_torus
from .lattice import Box, enumerate_lattice, product_min_distance
from .scheme import CpScheme
from .utils import digest

logger = logging.getLogger(__name__)


def _check_disjoint(boxes: Sequence[Box]) -> None:
    for i, a in enumerate(boxes):
        for b in boxes[i + 1:]:
            if a.overlaps(b):
                raise PreconditionError(f"window boxes overlap: {a.to_json()} and {b.to_json()}")


def _boxes_from_json(items: Any) -> Tuple[Box, ...]:
    if not isinstance(items, list):
        raise SpecParseError("boxes must be a JSON list")
    return tuple(Box.from_json(item) for item in items)


@dataclass(frozen=True)
class Window:
    """Finite disjoint union of half-open boxes in R^m."""

    boxes: Tuple[Box, ...]
    dim: int = -1

    def __post_init__(self):
        boxes = tuple(self.boxes)
        dims = {b.dim for b in boxes}
        if len(dims) > 1:
            raise StructuralError(f"window boxes have mixed dimensions {sorted(dims)}")
        dim = dims.pop() if dims else self.dim
        if dim < 1:
            raise StructuralError("a window needs a positive dimension")
        if any(not b.is_bounded for b in boxes):
            raise PreconditionError("window boxes must be bounded")
        _check_disjoint(boxes)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "dim", dim)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Window":
        return cls((Box([lo], [hi]),))

    @property
    def measure(self) -> float:
        return float(sum(b.volume for b in self.boxes))

    @property
    def center(self) -> np.ndarray:
        lo = np.min([b.lo for b in self.boxes], axis=0)
        hi = np.max([b.hi for b in self.boxes], axis=0)
        return (lo + hi) / 2.0

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        mask = np.zeros(len(pts), dtype=bool)
        for b in self.boxes:
            mask |= b.contains(pts)
        return mask

    def on_boundary(self, points, tol: float) -> np.ndarray:
        """Points within ``tol`` of a face of some box (closure-wise)."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        mask = np.zeros(len(pts), dtype=bool)
        for b in self.boxes:
            lo, hi = np.asarray(b.lo), np.asarray(b.hi)
            near = np.all((pts >= lo - tol) & (pts <= hi + tol), axis=1)
            face = np.any((np.abs(pts - lo) <= tol) | (np.abs(pts - hi) <= tol), axis=1)
            mask |= near & face
        return mask

    def negate(self) -> "Window":
        return Window(tuple(b.negate() for b in self.boxes), self.dim)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        def key(boxes):
            return sorted((tuple(b.lo), tuple(b.hi)) for b in boxes)

        mine, flipped = key(self.boxes), key(self.negate().boxes)
        return len(mine) == len(flipped) and all(
            np.allclose(a[0], b[0], atol=tol) and np.allclose(a[1], b[1], atol=tol)
            for a, b in zip(mine, flipped)
        )

    def dilate(self, factor: float) -> "Window":
        """Every box scaled by ``factor`` about the window's centre."""
        c = self.center
        return Window(
            tuple(Box(c + factor * (np.asarray(b.lo) - c), c + factor * (np.asarray(b.hi) - c))
                  for b in self.boxes),
            self.dim,
        )

    def translate(self, offset) -> "Window":
        return Window(tuple(b.translate(offset) for b in self.boxes), self.dim)

    def to_json(self) -> Dict[str, Any]:
        return {"boxes": [b.to_json() for b in self.boxes]}

    @classmethod
    def from_json(cls, data: Any) -> "Window":
        if isinstance(data, str):
            return cls((Box.parse(data),))
        if not isinstance(data, dict) or "boxes" not in data:
            raise SpecParseError("window must be a JSON object with 'boxes'")
        return cls(_boxes_from_json(data["boxes"]), int(data.get("dim", -1)))


@dataclass(frozen=True)
class SpectrumWindow:
    """
    K = (union of real boxes) x zfreqs x residues inside the dual group,
    measured with Lebesgue x counting x counting/|D|.
    """

    group: GroupSpec
    real_boxes: Tuple[Box, ...]
    zfreqs: Optional[Tuple[Tuple[int, ...], ...]] = None
    residues: Optional[Tuple[Tuple[int, ...], ...]] = None

    def __post_init__(self):
        g = self.group
        boxes = tuple(self.real_boxes) if self.real_boxes else ((Box(),) if g.d == 0 else ())
        if any(b.dim != g.d for b in boxes):
            raise StructuralError(f"spectrum boxes must have dimension {g.d}")
        if any(not b.is_bounded for b in boxes):
            raise PreconditionError("spectrum boxes must be bounded")
        _check_disjoint(boxes)
        raw = ((0,) * g.torus,) if self.zfreqs is None else self.zfreqs
        zfreqs = tuple(dict.fromkeys(tuple(int(k) for k in z) for z in raw))
        if any(len(z) != g.torus for z in zfreqs):
            raise StructuralError(f"zfreqs must have length {g.torus}")
        if self.residues is None:
            residues = tuple(tuple(int(x) for x in r) for r in g.residues())
        else:
            if any(len(r) != g.t for r in self.residues):
                raise StructuralError(f"residues must have length {g.t}")
            residues = tuple(dict.fromkeys(
                tuple(int(x) % n for x, n in zip(r, g.torsion)) for r in self.residues
            ))
        object.__setattr__(self, "real_boxes", boxes)
        object.__setattr__(self, "zfreqs", zfreqs)
        object.__setattr__(self, "residues", residues)

    @property
    def real_measure(self) -> float:
        return float(sum(b.volume for b in self.real_boxes))

    @property
    def measure(self) -> float:
        return self.real_measure * len(self.zfreqs) * len(self.residues) / self.group.order

    @property
    def is_empty(self) -> bool:
        return not self.real_boxes or not self.zfreqs or not self.residues or self.real_measure == 0.0

    def contains(self, real, zfreq, disc) -> np.ndarray:
        g = self.group
        real = np.asarray(real, dtype=float)
        k = len(real)
        real = real.reshape(k, g.d)
        zfreq = np.asarray(zfreq, dtype=np.int64).reshape(k, g.torus)
        disc = np.asarray(disc, dtype=np.int64).reshape(k, g.t)
        mask = np.zeros(k, dtype=bool)
        for b in self.real_boxes:
            mask |= b.contains(real)
        if g.torus:
            mask &= _row_member(zfreq, self.zfreqs)
        if g.t:
            mask &= _row_member(disc, self.residues)
        return mask

    def dilate(self, factor: float) -> "SpectrumWindow":
        return replace(self, real_boxes=tuple(b.dilate(factor) for b in self.real_boxes))

    def to_json(self) -> Dict[str, Any]:
        return {
            "real_boxes": [b.to_json() for b in self.real_boxes if b.dim],
            "zfreqs": [list(z) for z in self.zfreqs],
            "residues": [list(r) for r in self.residues],
        }

    @classmethod
    def from_json(cls, data: Any, group: GroupSpec) -> "SpectrumWindow":
        if not isinstance(data, dict):
            raise SpecParseError("spectrum must be a JSON object")
        unknown = set(data) - {"real_boxes", "zfreqs", "residues"}
        if unknown:
            raise SpecParseError(f"Unknown spectrum keys: {sorted(unknown)}")
        residues = data.get("residues", "all")
        try:
            return cls(
                group=group,
                real_boxes=_boxes_from_json(data.get("real_boxes", [])),
                zfreqs=tuple(tuple(z) for z in data.get("zfreqs", [[0] * group.torus])),
                residues=None if residues == "all" else tuple(tuple(r) for r in residues),
            )
        except (TypeError, ValueError) as exc:
            raise SpecParseError(f"Invalid spectrum: {exc}") from exc


def _row_member(rows, allowed) -> np.ndarray:
    """Mask of the integer rows of ``rows`` that occur in ``allowed``."""
    rows = np.asarray(rows, dtype=np.int64)
    allowed = np.asarray(allowed, dtype=np.int64).reshape(-1, rows.shape[1])
    if not len(rows) or not len(allowed):
        return np.zeros(len(rows), dtype=bool)
    lo = np.minimum(rows.min(axis=0), allowed.min(axis=0))
    span = np.maximum(rows.max(axis=0), allowed.max(axis=0)) - lo + 1
    keys = np.ravel_multi_index((rows - lo).T, span)
    return np.isin(keys, np.ravel_multi_index((allowed - lo).T, span))


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    Points of a model set with the lattice coordinates that produced them.

    ``real``/``torus``/``disc`` are the coordinates in ``group`` (G for Lambda_S,
    R^m for M_K); ``internal`` is the value tested against the window (p1, or
    the real part of q2) and ``labels`` the integer part of q2 for dual sets.
    """

    group: GroupSpec
    kind: str
    coords: np.ndarray
    real: np.ndarray
    torus: np.ndarray
    disc: np.ndarray
    internal: np.ndarray
    labels: np.ndarray
    obs: Box
    window: Optional[Window] = None
    scheme_id: str = ""

    def __len__(self) -> int:
        return len(self.real)

    def element(self, i: int) -> GroupElement:
        return GroupElement.make(self.group, self.real[i], self.torus[i], self.disc[i])

    def without(self, i: int) -> "PointSet":
        keep = np.arange(len(self)) != i
        return self._subset(keep)

    def _subset(self, keep: np.ndarray) -> "PointSet":
        return replace(
            self,
            coords=self.coords[keep], real=self.real[keep], torus=self.torus[keep],
            disc=self.disc[keep], internal=self.internal[keep], labels=self.labels[keep],
        )

    @classmethod
    def from_real(cls, points, obs: Optional[Box] = None) -> "PointSet":
        """A plain point set of R^d (coordinates double as their own labels)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        d = pts.shape[1]
        if obs is None:
            obs = Box(pts.min(axis=0), pts.max(axis=0) + 1.0) if len(pts) else Box([0.0] * d, [0.0] * d)
        return cls(
            group=GroupSpec(d=d),
            kind="plain",
            coords=np.zeros((len(pts), 0), dtype=np.int64),
            real=pts,
            torus=np.zeros((len(pts), 0)),
            disc=np.zeros((len(pts), 0), dtype=np.int64),
            internal=np.zeros((len(pts), 0)),
            labels=np.zeros((len(pts), 0), dtype=np.int64),
            obs=obs,
        )


def scheme_id(scheme: CpScheme) -> str:
    if scheme.descriptor is not None:
        return digest(scheme.descriptor.to_json())[:16]
    return digest(scheme.params.to_json())[:16]


# --------------------------------------------------------------------------- #
#  enumeration
# --------------------------------------------------------------------------- #
def lattice_elements(scheme: CpScheme, internal_box: Box, real_box: Box,
                     settings: Optional[Settings] = None) -> np.ndarray:
    """
    Canonical coordinates of every h in H with p1(h) in ``internal_box`` and
    p2(h).real in ``real_box``, enumerated residue by residue.
    """
    settings = settings or load_settings()
    if internal_box.dim != scheme.m or real_box.dim != scheme.group.d:
        raise StructuralError("box dimensions do not match the scheme")
    target = internal_box.product(real_box)
    chunks = []
    for r in scheme.group.residues():
        shift = scheme.base @ scheme.translations(r)[0]
        v = enumerate_lattice(scheme.base, target, shift=shift, max_candidates=settings.max_candidates)
        if len(v):
            chunks.append(scheme.lift(v, r))
    if not chunks:
        return np.zeros((0, scheme.layout.N), dtype=np.int64)
    return np.concatenate(chunks)


def dual_lattice_elements(scheme: CpScheme, internal_box: Box, real_box: Box,
                          zfreqs: Iterable[Sequence[int]],
                          settings: Optional[Settings] = None) -> np.ndarray:
    """
    Canonical dual coordinates of every g in Gamma with q1(g) in ``internal_box``,
    q2(g).real in ``real_box`` and q2(g).zfreq in ``zfreqs`` (any residue).
    """
    settings = settings or load_settings()
    if internal_box.dim != scheme.m or real_box.dim != scheme.group.d:
        raise StructuralError("box dimensions do not match the scheme")
    target = internal_box.product(real_box)
    chunks = []
    for kappa in zfreqs:
        kappa = np.asarray(kappa, dtype=np.int64).reshape(scheme.group.torus)
        shift = -float(scheme.coupling @ kappa) * scheme.base_dual[:, 0] if scheme.group.torus else None
        a = enumerate_lattice(scheme.base_dual, target, shift=shift, max_candidates=settings.max_candidates)
        if len(a):
            chunks.append(scheme.dual_lift(a, kappa))
    if not chunks:
        return np.zeros((0, scheme.layout.N), dtype=np.int64)
    return np.concatenate(chunks)


def _unique_rows(z: np.ndarray) -> np.ndarray:
    if not len(z):
        return z
    return np.unique(z, axis=0)


def quasicrystal(scheme: CpScheme, S: Window, obs: Box,
                 settings: Optional[Settings] = None) -> PointSet:
    """
    Lambda_S inside ``obs``: every p2(h) with p1(h) in S and p2(h).real in obs,
    any torus or disc value. Points come back in lexicographic coordinate order.
    """
    settings = settings or load_settings()
    if S.dim != scheme.m:
        raise StructuralError(f"window has dimension {S.dim}, scheme has m={scheme.m}")
    if obs.dim != scheme.group.d:
        raise StructuralError(f"observation box has dimension {obs.dim}, group has d={scheme.group.d}")
    if not obs.is_bounded:
        raise PreconditionError("observation box must be bounded")
    parts = [lattice_elements(scheme, b, obs, settings) for b in S.boxes if not b.is_empty]
    z = _unique_rows(np.concatenate(parts)) if parts else np.zeros((0, scheme.layout.N), dtype=np.int64)
    p = scheme.project(z, tol=settings.lattice_tolerance)
    keep = S.contains(p.internal) & obs.contains(p.real)
    logger.debug("quasicrystal: %d points (window measure %.6g)", int(keep.sum()), S.measure)
    return PointSet(
        group=scheme.group,
        kind="quasicrystal",
        coords=z[keep],
        real=p.real[keep],
        torus=p.torus[keep],
        disc=p.disc[keep],
        internal=p.internal[keep],
        labels=np.zeros((int(keep.sum()), 0), dtype=np.int64),
        obs=obs,
        window=S,
        scheme_id=scheme_id(scheme),
    )


def dual_model_set(scheme: CpScheme, K: SpectrumWindow, obs: Box,
                   settings: Optional[Settings] = None) -> PointSet:
    """M_K inside ``obs``: every q1(g) with q2(g) in K."""
    settings = settings or load_settings()
    if K.group != scheme.group:
        raise StructuralError("spectrum and scheme live on different groups")
    if obs.dim != scheme.m:
        raise StructuralError(f"observation box has dimension {obs.dim}, scheme has m={scheme.m}")
    if not obs.is_bounded:
        raise PreconditionError("observation box must be bounded")
    N, ell = scheme.layout.N, scheme.group.torus
    parts = []
    if not K.is_empty:
        parts = [dual_lattice_elements(scheme, obs, b, K.zfreqs, settings) for b in K.real_boxes]
    w = _unique_rows(np.concatenate(parts)) if parts else np.zeros((0, N), dtype=np.int64)
    q = scheme.dual_project(w, tol=settings.lattice_tolerance)
    keep = obs.contains(q.internal) & K.contains(q.real, q.torus, q.disc)
    k = int(keep.sum())
    logger.debug("dual model set: %d points (spectrum measure %.6g)", k, K.measure)
    return PointSet(
        group=GroupSpec(d=scheme.m),
        kind="dual",
        coords=w[keep],
        real=q.internal[keep],
        torus=np.zeros((k, 0)),
        disc=np.zeros((k, 0), dtype=np.int64),
        internal=q.real[keep],
        labels=np.hstack([q.torus[keep], q.disc[keep]]).reshape(k, ell + scheme.group.t),
        obs=obs,
        scheme_id=scheme_id(scheme),
    )


# --------------------------------------------------------------------------- #
#  metric properties
# --------------------------------------------------------------------------- #
def min_separation(ps: PointSet) -> float:
    """Minimum pairwise product-metric distance (see lattice.product_min_distance)."""
    distance, _ = product_min_distance(ps.real, ps.torus, ps.disc)
    return distance


def _symmetry_keys(real, torus, disc) -> np.ndarray:
    # torus coordinates embedded on circles so that 0 and 1 coincide
    angle = 2.0 * np.pi * np.asarray(torus, dtype=float)
    circle = np.hstack([np.cos(angle), np.sin(angle)]) / (2.0 * np.pi)
    return np.hstack([np.asarray(real, dtype=float), circle, 3.0 * np.asarray(disc, dtype=float)])


def symmetry_check(ps: PointSet, tol: float = 1e-9) -> bool:
    """
    True iff -x belongs to the set for every point x whose negation lies in the
    observation box. Points whose window coordinate sits on the window
    boundary are skipped (half-open windows are symmetric only up to those).
    """
    if ps.kind != "quasicrystal" or ps.window is None:
        raise PreconditionError("symmetry check needs a quasicrystal together with its window")
    if not ps.window.is_symmetric():
        raise PreconditionError("symmetry check needs a symmetric window")
    if len(ps) == 0:
        return True
    orders = np.asarray(ps.group.torsion, dtype=np.int64)
    neg_real = -ps.real
    neg_torus = reduce_torus(-ps.torus)
    neg_disc = np.mod(-ps.disc, orders) if ps.group.t else ps.disc
    candidates = ps.obs.contains(neg_real) & ~ps.window.on_boundary(ps.internal, tol)
    if not candidates.any():
        return True
    tree = cKDTree(_symmetry_keys(ps.real, ps.torus, ps.disc))
    dist, _ = tree.query(_symmetry_keys(neg_real, neg_torus, neg_disc)[candidates])
    return bool(np.all(dist <= tol))
