# quasilattice/visualization.py
from __future__ import annotations

from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np


def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ImportError(
            "SVG output needs the optional extras:\n"
            "  pip install quasilattice[viz]   # includes matplotlib"
        )
    # fixed ids and no creation date keep the SVG byte-identical between runs
    matplotlib.rcParams["svg.hashsalt"] = "quasilattice"
    return plt


def _save(fig, filename: str | Path) -> Path:
    out = Path(filename).with_suffix(".svg")
    fig.savefig(out, format="svg", metadata={"Date": None})
    return out


def points_svg(ps: Any, filename: str | Path, *, title: Optional[str] = None) -> Path:
    """
    Scatter plot of a point set, one colour per finite-part fiber.

    In one real dimension the vertical axis is the window coordinate, so the
    strip of the cut-and-project picture is visible; otherwise the first two
    real coordinates are drawn.
    """
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(8, 4))
    real = np.asarray(ps.real, dtype=float)
    if real.shape[1] >= 2:
        xs, ys, ylabel = real[:, 0], real[:, 1], "x1"
    elif ps.internal.shape[1]:
        xs, ys, ylabel = real[:, 0], np.asarray(ps.internal, dtype=float)[:, 0], "window coordinate"
    else:
        xs, ys, ylabel = real[:, 0], np.zeros(len(real)), ""

    disc = np.asarray(ps.disc)
    fibers = np.unique(disc, axis=0) if disc.shape[1] else np.zeros((1, 0), dtype=np.int64)
    for fiber in fibers:
        mask = np.all(disc == fiber, axis=1) if disc.shape[1] else np.ones(len(xs), dtype=bool)
        label = "r=" + ",".join(str(int(v)) for v in fiber) if disc.shape[1] else None
        ax.scatter(xs[mask], ys[mask], s=4, label=label)
    if disc.shape[1]:
        ax.legend(loc="upper right", fontsize=7)
    ax.set_xlabel("x0")
    ax.set_ylabel(ylabel)
    ax.set_title(title or f"{ps.kind} ({len(ps)} points)")
    out = _save(fig, filename)
    plt.close(fig)
    return out


def sweep_svg(reports: Sequence[Any], filename: str | Path, *,
              theta_sampling: float, theta_interpolation: float) -> Path:
    """Lower frame bound and lower Riesz bound against mu(K) / D(Lambda)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ratios = np.array([r.ratio for r in reports], dtype=float)
    ax.scatter(ratios, [r.aest for r in reports], s=10, marker="o", label="Aest (sampling)")
    ax.scatter(ratios, [r.riesz_lower for r in reports], s=10, marker="x", label="Riesz lower (interpolation)")
    ax.axhline(theta_sampling, color="grey", linestyle="--", linewidth=0.8)
    if theta_interpolation != theta_sampling:
        ax.axhline(theta_interpolation, color="grey", linestyle=":", linewidth=0.8)
    ax.axvline(1.0, color="black", linewidth=0.5)
    ax.set_yscale("symlog", linthresh=min(theta_sampling, theta_interpolation) / 10)
    ax.set_xlabel("mu(K) / D(Lambda)")
    ax.set_ylabel("normalized bound")
    ax.legend(fontsize=7)
    out = _save(fig, filename)
    plt.close(fig)
    return out
