import csv
import io
import json
import math
import numbers
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from . import __version__
from .utils import input_hashes

TOOL = "quasilattice"


def header_payload(command: str, seed: Optional[int], inputs: Dict[str, Any]) -> Dict[str, Any]:
    """Provenance block written at the top of every output file."""
    return {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "seed": seed,
        "inputs": input_hashes(inputs),
    }


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(value)
    if isinstance(value, numbers.Real):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def csv_text(header: Dict[str, Any], columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV with ``# key: value`` comment lines carrying the header."""
    out = io.StringIO()
    for key in ("tool", "version", "command", "seed"):
        out.write(f"# {key}: {format_value(header.get(key))}\n")
    for name, value in header.get("inputs", {}).items():
        out.write(f"# input {name}: sha256={value}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return out.getvalue()


def json_text(header: Dict[str, Any], payload: Dict[str, Any]) -> str:
    body = {"header": header, **payload}
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=True) + "\n"


def existence_payload(m: int, group: Dict[str, Any], result) -> Dict[str, Any]:
    return {
        "m": m,
        "group": group,
        "exists": result.exists,
        "limit": result.limit,
        "prime": result.prime,
        "rank": result.rank,
        "message": result.message,
    }


def scheme_payload(scheme) -> Dict[str, Any]:
    return {"scheme": scheme.to_json()}


def point_rows(ps) -> Tuple[List[str], List[List[Any]]]:
    """Columns x*, t*, r*, w* (window coordinate) and the integer coordinates z*."""
    g = ps.group
    columns = ([f"x{i}" for i in range(g.d)] + [f"t{i}" for i in range(g.torus)]
               + [f"r{i}" for i in range(g.t)] + [f"w{i}" for i in range(ps.internal.shape[1])]
               + [f"label{i}" for i in range(ps.labels.shape[1])]
               + [f"z{i}" for i in range(ps.coords.shape[1])])
    rows = []
    for i in range(len(ps)):
        rows.append(
            [float(x) for x in ps.real[i]] + [float(x) for x in ps.torus[i]]
            + [int(x) for x in ps.disc[i]] + [float(x) for x in ps.internal[i]]
            + [int(x) for x in ps.labels[i]] + [int(x) for x in ps.coords[i]]
        )
    return columns, rows


def density_rows(report) -> Tuple[List[str], List[List[Any]]]:
    columns = ["side"] + [f"a{i}" for i in range(len(report.translates[0]))] + ["count", "density"]
    rows = []
    for side, counts, values in zip(report.sides, report.counts, report.densities):
        for a, c, v in zip(report.translates, counts, values):
            rows.append([side, *a, c, v])
    return columns, rows


NL_COLUMNS = ["r", "max_error", "mean_error", "spread"]


def nl_rows(table) -> List[List[Any]]:
    return [[row.r, row.max_error, row.mean_error, row.spread] for row in table.rows]


SWEEP_COLUMNS = ["ratio", "trial", "mu_K", "num_points", "num_freqs", "Aest", "Best",
                 "riesz_lower", "cond", "verdict"]


def sweep_rows(reports) -> List[List[Any]]:
    return [
        [r.ratio, r.trial, r.spectrum_measure, r.num_points, r.num_freqs, r.aest, r.best,
         r.riesz_lower, r.cond, r.verdict]
        for r in reports
    ]


DUALITY_COLUMNS = ["probe", "num_points", "num_freqs", "mu_K", "density", "Aest", "Best",
                   "riesz_lower", "cond", "verdict"]


def duality_rows(report) -> List[List[Any]]:
    rows = []
    for probe in ("dual_interpolation", "primal_sampling", "dual_sampling", "primal_interpolation"):
        r = getattr(report, probe)
        rows.append([probe, r.num_points, r.num_freqs, r.spectrum_measure, r.density, r.aest,
                     r.best, r.riesz_lower, r.cond, r.verdict])
    return rows
