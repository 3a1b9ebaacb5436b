"""
Command-line front end.

Exit codes: 0 success, 1 input error, 2 obstructed group, 3 numerical failure.
"""
from __future__ import annotations

import inspect
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (TestFunctionSpec, empirical_density, nl_convergence, poisson_check,
                       theoretical_density)
from .config import Settings, load_settings
from .decorators import build_parser, command
from .exceptions import (ConsistencyError, EnumerationLimitError, ObstructedGroupError,
                         PreconditionError, QuasilatticeError, SlotCollisionError, SpecParseError,
                         StructuralError, TailBoundError, UndefinedResultError)
from .groups import GroupSpec
from .lattice import Box
from .model_sets import SpectrumWindow, Window, dual_model_set, quasicrystal
from .models import (DUALITY_COLUMNS, NL_COLUMNS, SWEEP_COLUMNS, csv_text, density_rows,
                     duality_rows, existence_payload, header_payload, json_text, nl_rows,
                     point_rows, scheme_payload, sweep_rows)
from .sampling import duality_probe, lattice_counterexample, universality_sweep
from .scheme import (CpScheme, SchemeDescriptor, fibonacci_descriptor, scheme_exists,
                     scheme_from_descriptor, scheme_from_json)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_OBSTRUCTED = 2
EXIT_NUMERICAL = 3


class NumericalFailure(QuasilatticeError):
    """A computed result violated the invariant named in the message."""


# --------------------------------------------------------------------------- #
#  input helpers
# --------------------------------------------------------------------------- #
def _read_json(text: str, what: str) -> Any:
    """A JSON file path or inline JSON."""
    stripped = str(text).strip()
    try:
        if stripped.startswith(("{", "[")):
            return json.loads(stripped)
        return json.loads(Path(stripped).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{what}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise SpecParseError(f"{what}: cannot read {stripped!r} ({exc.strerror})") from exc


def _load_scheme(text: str, settings: Settings) -> CpScheme:
    data = _read_json(text, "scheme")
    if isinstance(data, dict) and "scheme" in data:
        data = data["scheme"]
    return scheme_from_json(data, settings)


def _window(text: str, dim: int) -> Window:
    """``lo:hi[,lo:hi...]`` boxes separated by ``;``, or a window JSON object/file."""
    stripped = str(text).strip()
    if stripped.startswith("{") or Path(stripped).is_file():
        return Window.from_json(_read_json(stripped, "window"))
    return Window(tuple(Box.parse(part, dim) for part in stripped.split(";") if part.strip()))


def _spectrum(text: str, group: GroupSpec) -> SpectrumWindow:
    """Like ``_window`` for the real part; a JSON object may also list zfreqs and residues."""
    stripped = str(text).strip()
    if stripped.startswith("{") or Path(stripped).is_file():
        return SpectrumWindow.from_json(_read_json(stripped, "spectrum"), group)
    return SpectrumWindow(group, tuple(Box.parse(part, group.d) for part in stripped.split(";") if part.strip()))


def _positive(name: str, value: Optional[float]) -> None:
    if value is not None and value <= 0:
        raise SpecParseError(f"--{name.replace('_', '-')} must be positive, got {value}")


def _cube(L: float, dim: int) -> Box:
    return Box([0.0] * dim, [float(L)] * dim)


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _svg_path(svg: Optional[str]) -> Optional[Path]:
    return Path(svg) if svg else None


# --------------------------------------------------------------------------- #
#  commands
# --------------------------------------------------------------------------- #
@command(summary="Decide whether a complete CP scheme exists for R^m and a group.")
def cmd_exists(group: str, m: int = 1, out: Optional[str] = None) -> int:
    """
    Checks the p-rank obstruction of the finite part against m + d.

    Args:
        group: group JSON (inline or a file path), e.g. {"d": 1, "torsion": [2, 2]}.
        m: dimension of the physical space R^m.
        out: optional JSON report path.
    """
    _positive("m", m)
    spec = GroupSpec.from_json(_read_json(group, "group"))
    result = scheme_exists(m, spec)
    print(result.message)
    if out is not None:
        header = header_payload("exists", None, {"group": spec.to_json(), "m": m})
        _emit(json_text(header, existence_payload(m, spec.to_json(), result)), out)
    return EXIT_OK if result else EXIT_OBSTRUCTED


@command(name="scheme build", summary="Build a CP scheme from a descriptor and write it as JSON.")
def cmd_scheme_build(spec: Optional[str] = None, fibonacci: bool = False, force: bool = False,
                     out: Optional[str] = None, calibration: Optional[str] = None) -> int:
    """
    Builds the lattice basis, its dual and section masses.

    Args:
        spec: scheme descriptor JSON (inline or a file path).
        fibonacci: build the built-in Fibonacci scheme instead of --spec.
        force: build even when the group is obstructed (slots wrap around).
        out: output JSON path (stdout when omitted).
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    if fibonacci == (spec is not None):
        raise SpecParseError("give exactly one of --spec and --fibonacci")
    descriptor = fibonacci_descriptor() if fibonacci else SchemeDescriptor.from_json(_read_json(spec, "spec"))
    scheme = scheme_from_descriptor(descriptor, force=force, settings=settings)
    header = header_payload("scheme build", None, {"descriptor": descriptor.to_json(), "force": force})
    _emit(json_text(header, scheme_payload(scheme)), out)
    logger.info("built scheme with s(H) = %.12g", scheme.section_mass)
    return EXIT_OK


@command(summary="Enumerate a quasicrystal (or, with --spectrum, a dual model set) in [0, L)^d.")
def cmd_points(scheme: str, L: float, window: Optional[str] = None, spectrum: Optional[str] = None,
               out: Optional[str] = None, svg: Optional[str] = None,
               calibration: Optional[str] = None) -> int:
    """
    Writes one CSV row per point.

    Args:
        scheme: scheme JSON written by "scheme build".
        L: side of the observation cube.
        window: window S in R^m as lo:hi boxes separated by ';' or JSON.
        spectrum: spectrum K in the dual group; selects the dual model set M_K.
        out: output CSV path (stdout when omitted).
        svg: also draw the points into this SVG file.
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    _positive("L", L)
    cp = _load_scheme(scheme, settings)
    if (window is None) == (spectrum is None):
        raise SpecParseError("give exactly one of --window and --spectrum")
    if window is not None:
        S = _window(window, cp.m)
        ps = quasicrystal(cp, S, _cube(L, cp.group.d), settings)
        inputs = {"scheme": cp.to_json(), "window": S.to_json(), "L": L}
    else:
        K = _spectrum(spectrum, cp.group)
        ps = dual_model_set(cp, K, _cube(L, cp.m), settings)
        inputs = {"scheme": cp.to_json(), "spectrum": K.to_json(), "L": L}
    columns, rows = point_rows(ps)
    _emit(csv_text(header_payload("points", None, inputs), columns, rows), out)
    svg_out = _svg_path(svg)
    if svg_out is not None:
        from .visualization import points_svg
        points_svg(ps, svg_out)
    return EXIT_OK


@command(summary="Empirical densities over cubes of the given sides against the theoretical value.")
def cmd_density(scheme: str, sides: List[float], window: Optional[str] = None,
                spectrum: Optional[str] = None, L: Optional[float] = None,
                tolerance: Optional[float] = None, out: Optional[str] = None,
                calibration: Optional[str] = None) -> int:
    """
    Counts points per cube for Halton-spread corners.

    Args:
        scheme: scheme JSON written by "scheme build".
        sides: comma-separated cube sides, e.g. 10,100,1000.
        window: window S for Lambda_S (lo:hi boxes or JSON).
        spectrum: spectrum K for the dual model set M_K.
        L: side of the observation cube (default twice the largest side).
        tolerance: fail with exit code 3 when the relative error at the largest side exceeds this.
        out: output CSV path (stdout when omitted).
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    if not sides:
        raise SpecParseError("--sides needs at least one value")
    for s in sides:
        _positive("sides", s)
    _positive("L", L)
    L = float(L) if L is not None else 2.0 * max(sides)
    cp = _load_scheme(scheme, settings)
    if (window is None) == (spectrum is None):
        raise SpecParseError("give exactly one of --window and --spectrum")
    if window is not None:
        S = _window(window, cp.m)
        ps = quasicrystal(cp, S, _cube(L, cp.group.d), settings)
        expected = theoretical_density(cp, S.measure)
        inputs = {"scheme": cp.to_json(), "window": S.to_json()}
    else:
        K = _spectrum(spectrum, cp.group)
        ps = dual_model_set(cp, K, _cube(L, cp.m), settings)
        expected = theoretical_density(cp, K.measure, dual=True)
        inputs = {"scheme": cp.to_json(), "spectrum": K.to_json()}
    inputs.update(sides=list(sides), L=L)
    report = empirical_density(ps, sides, theoretical=expected, settings=settings)
    columns, rows = density_rows(report)
    rows = [row + [expected] for row in rows]
    _emit(csv_text(header_payload("density", None, inputs), columns + ["theoretical"], rows), out)
    error = report.relative_error
    print(f"density at side {report.sides[-1]:g}: [{report.lower[-1]:.6g}, {report.upper[-1]:.6g}], "
          f"theoretical {expected:.6g}, relative error {'n/a' if error is None else format(error, '.3g')}",
          file=sys.stderr)
    if tolerance is not None and error is not None and error > tolerance:
        raise NumericalFailure(f"density formula: relative error {error:.3g} exceeds {tolerance:g}")
    return EXIT_OK


@command(summary="Two-sided Poisson summation check on the lifted lattice basis.")
def cmd_poisson(scheme: str, sigmas: List[float] = (0.5, 1.0, 2.0), count: int = 20, seed: int = 0,
                tolerance: float = 1e-10, out: Optional[str] = None,
                calibration: Optional[str] = None) -> int:
    """
    Compares sum_z f(x + Bz) with its dual-lattice evaluation at random shifts x.

    Args:
        scheme: scheme JSON written by "scheme build".
        sigmas: comma-separated Gaussian widths.
        count: number of random shifts per width.
        seed: seed of the shift generator.
        tolerance: largest accepted |lhs - rhs| (exit code 3 above it).
        out: output CSV path (stdout when omitted).
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    _positive("count", count)
    for s in sigmas:
        _positive("sigmas", s)
    cp = _load_scheme(scheme, settings)
    rng = np.random.default_rng(seed)
    shifts = rng.uniform(-1.0, 1.0, size=(count, cp.layout.N))
    rows = []
    for sigma in sigmas:
        for i, x in enumerate(shifts):
            check = poisson_check(cp.basis, sigma, x, settings)
            rows.append([sigma, i, check.lhs, check.rhs, check.diff])
    inputs = {"scheme": cp.to_json(), "sigmas": list(sigmas), "count": count}
    _emit(csv_text(header_payload("poisson", seed, inputs), ["sigma", "shift", "lhs", "rhs", "diff"], rows), out)
    worst = max(row[-1] for row in rows)
    print(f"max |lhs - rhs| = {worst:.3g}", file=sys.stderr)
    if worst > tolerance:
        raise NumericalFailure(f"Poisson summation: difference {worst:.3g} exceeds {tolerance:g}")
    return EXIT_OK


@command(summary="Convergence of Riesz sums to (1/s(H)) int(phi) int(psi).")
def cmd_nl(scheme: str, radii: List[float] = (10.0, 100.0, 1000.0), sigma_phi: float = 1.0,
           sigma_psi: float = 1.0, out: Optional[str] = None,
           calibration: Optional[str] = None) -> int:
    """
    Tabulates the relative error over Halton translates for every r.

    Args:
        scheme: scheme JSON written by "scheme build".
        radii: comma-separated values of r.
        sigma_phi: width of the Gaussian on R^m.
        sigma_psi: width of the Gaussian on the real part of G.
        out: output CSV path (stdout when omitted).
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    for r in radii:
        _positive("radii", r)
    _positive("sigma_phi", sigma_phi)
    _positive("sigma_psi", sigma_psi)
    cp = _load_scheme(scheme, settings)
    tf = TestFunctionSpec(cp.group, m=cp.m, sigma_phi=sigma_phi, sigma_psi=sigma_psi)
    table = nl_convergence(cp, tf, radii, settings=settings)
    inputs = {"scheme": cp.to_json(), "test_functions": tf.to_dict(), "radii": list(radii)}
    _emit(csv_text(header_payload("nl", None, inputs), NL_COLUMNS, nl_rows(table)), out)
    return EXIT_OK


@command(summary="Random-spectrum sweep of sampling and interpolation bounds for a simple quasicrystal.")
def cmd_sweep(scheme: str, interval: str = "0:1", ratios: List[float] = (0.5, 0.8, 1.0, 1.25),
              trials: int = 20, L: float = 500.0, delta: Optional[float] = None,
              pieces: Optional[int] = None, seed: int = 7, out: Optional[str] = None,
              svg: Optional[str] = None, calibration: Optional[str] = None) -> int:
    """
    One CSV row per (ratio, trial).

    Args:
        scheme: scheme JSON written by "scheme build" (m = 1).
        interval: window interval lo:hi.
        ratios: comma-separated values of mu(K) / D(Lambda).
        trials: random spectra per ratio.
        L: side of the observation interval [0, L).
        delta: frequency grid spacing (default 1/L).
        pieces: number of intervals per random spectrum (random 1-3 when omitted).
        seed: sweep seed.
        out: output CSV path (stdout when omitted).
        svg: also plot the bounds against the ratio into this SVG file.
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    _positive("trials", trials)
    _positive("L", L)
    _positive("delta", delta)
    _positive("pieces", pieces)
    for r in ratios:
        _positive("ratios", r)
    cp = _load_scheme(scheme, settings)
    window = _window(interval, cp.m)
    reports = universality_sweep(cp, window, ratios, trials, L, delta=delta, seed=seed,
                                 pieces=pieces, settings=settings)
    inputs = {"scheme": cp.to_json(), "interval": window.to_json(), "ratios": list(ratios),
              "trials": trials, "L": L, "delta": delta, "pieces": pieces}
    _emit(csv_text(header_payload("sweep", seed, inputs), SWEEP_COLUMNS, sweep_rows(reports)), out)
    svg_out = _svg_path(svg)
    if svg_out is not None:
        from .visualization import sweep_svg
        sweep_svg(reports, svg_out, theta_sampling=settings.theta_sampling,
                  theta_interpolation=settings.theta_interpolation)
    return EXIT_OK


@command(summary="Finite-section check of both duality implications between Lambda_S and M_K.")
def cmd_duality(scheme: str, window: str, spectrum: str, L: float = 200.0,
                delta: Optional[float] = None, dilation: float = 1.05,
                out: Optional[str] = None, calibration: Optional[str] = None) -> int:
    """
    Writes the four frame reports; exit code 3 when an implication fails.

    Args:
        scheme: scheme JSON written by "scheme build".
        window: window S (lo:hi boxes or JSON).
        spectrum: spectrum K in the dual group.
        L: side of the observation cubes.
        delta: frequency grid spacing (default 1/L).
        dilation: factor of the slight dilation of S about its centre.
        out: output CSV path (stdout when omitted).
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    _positive("L", L)
    _positive("delta", delta)
    _positive("dilation", dilation)
    cp = _load_scheme(scheme, settings)
    S = _window(window, cp.m)
    K = _spectrum(spectrum, cp.group)
    report = duality_probe(cp, S, K, L, delta=delta, dilation=dilation, settings=settings)
    inputs = {"scheme": cp.to_json(), "window": S.to_json(), "spectrum": K.to_json(), "L": L,
              "delta": delta, "dilation": dilation}
    _emit(csv_text(header_payload("duality", None, inputs), DUALITY_COLUMNS, duality_rows(report)), out)
    if not report.ok:
        failed = "first" if not report.first_holds else "second"
        raise NumericalFailure(f"duality: the {failed} implication fails on this finite section")
    return EXIT_OK


@command(summary="Integers against a two-interval spectrum of measure below 1: never sampling.")
def cmd_counterexample(eps: float = 0.1, L: int = 200, out: Optional[str] = None,
                       calibration: Optional[str] = None) -> int:
    """
    Frame report of Z against [0, 1/2 - eps) u [1, 3/2 - eps).

    Args:
        eps: gap parameter in (0, 1/2).
        L: number of integers sampled.
        out: output CSV path (stdout when omitted).
        calibration: calibration JSON overriding the packaged tolerances.
    """
    settings = load_settings(calibration)
    report = lattice_counterexample(eps, L, settings=settings)
    rows = [[None, None, report.spectrum_measure, report.num_points, report.num_freqs, report.aest,
             report.best, report.riesz_lower, report.cond, report.verdict]]
    _emit(csv_text(header_payload("counterexample", None, {"eps": eps, "L": L}), SWEEP_COLUMNS, rows), out)
    return EXIT_OK


# --------------------------------------------------------------------------- #
#  entry point
# --------------------------------------------------------------------------- #
def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ObstructedGroupError):
        return EXIT_OBSTRUCTED
    if isinstance(exc, (ConsistencyError, TailBoundError, NumericalFailure)):
        return EXIT_NUMERICAL
    if isinstance(exc, (SpecParseError, PreconditionError, StructuralError, SlotCollisionError,
                        UndefinedResultError, EnumerationLimitError)):
        return EXIT_INPUT
    return EXIT_NUMERICAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        parser = build_parser("quasilattice", __version__)
        parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
        args = parser.parse_args(argv)
        if args.verbose:
            logging.getLogger("quasilattice").setLevel(logging.INFO)
        handler = getattr(args, "_handler", None)
        if handler is None:
            parser.print_help(sys.stderr)
            return EXIT_INPUT
        accepted = inspect.signature(handler).parameters
        kwargs: Dict[str, Any] = {k: v for k, v in vars(args).items() if k in accepted}
        return int(handler(**kwargs) or EXIT_OK)
    except QuasilatticeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except ImportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
