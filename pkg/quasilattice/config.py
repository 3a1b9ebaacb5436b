from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional

from .exceptions import SpecParseError


@dataclass(frozen=True)
class Settings:
    """
    Tolerances and calibration constants shared by every module.

    ``theta_sampling`` and ``theta_interpolation`` are the verdict thresholds of
    the sampling lab; the remaining values are numerical budgets.
    """

    theta_sampling: float = 1e-3
    theta_interpolation: float = 1e-3
    tail_tolerance: float = 1e-12
    poisson_tail_tolerance: float = 1e-13
    lattice_tolerance: float = 1e-9
    dual_tolerance: float = 1e-10
    max_candidates: int = 50_000_000
    density_translates: int = 16

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base: Optional["Settings"] = None) -> "Settings":
        base = base or cls()
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SpecParseError(f"Unknown calibration keys: {sorted(unknown)}")
        try:
            return replace(base, **{k: type(getattr(base, k))(v) for k, v in data.items()})
        except (TypeError, ValueError) as exc:
            raise SpecParseError(f"Invalid calibration value: {exc}") from exc

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@lru_cache(maxsize=1)
def _packaged() -> Settings:
    raw = resources.files("quasilattice").joinpath("calibration.json").read_text(encoding="utf-8")
    return Settings.from_dict(json.loads(raw))


def load_settings(path: Optional[str | Path] = None) -> Settings:
    """Packaged calibration, or the JSON file at ``path`` layered on top of it."""
    base = _packaged()
    if path is None:
        return base
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecParseError(f"Cannot read calibration file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SpecParseError(f"Calibration file {path} must hold a JSON object")
    return Settings.from_dict(data, base=base)
