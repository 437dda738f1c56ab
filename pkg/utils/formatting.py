"""Report rows, CSV/JSON rendering and plot-data series."""

import csv
import io
import json
import math
import re
from dataclasses import asdict, dataclass

from core.errors import ReportError

VERDICTS = ("pass", "fail", "inconclusive", "n/a")
PROVENANCES = ("closed-form", "quadrature", "sampled", "")
REPORT_HEADER = ("quantity", "value", "tolerance", "verdict", "provenance")


@dataclass(frozen=True)
class ReportRow:
    quantity: str
    value: float
    tolerance: float = 0.0
    verdict: str = "n/a"
    provenance: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ReportError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if self.provenance not in PROVENANCES:
            raise ReportError(f"provenance must be one of {PROVENANCES}, got {self.provenance!r}")


def format_number(x: float) -> str:
    """Twelve significant digits; identical inputs give identical text."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def slugify(text: str) -> str:
    """Lower-case, filesystem-safe name for plot files."""
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_") or "series"


def report_csv(rows: list[ReportRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for row in rows:
        writer.writerow(
            (row.quantity, format_number(row.value), format_number(row.tolerance), row.verdict, row.provenance)
        )
    return buffer.getvalue()


def _json_number(x: float):
    return x if math.isfinite(x) else format_number(x)


def report_json(rows: list[ReportRow], meta: dict | None = None) -> str:
    """JSON mirror of report_csv; non-finite numbers become strings."""
    payload = {
        "meta": meta or {},
        "rows": [
            {**asdict(row), "value": _json_number(row.value), "tolerance": _json_number(row.tolerance)}
            for row in rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def plot_csv(series: list[tuple[float, float]]) -> str:
    """Two-column x,y data with a strictly increasing first column."""
    if not series:
        raise ReportError("plot series is empty")
    xs = [x for x, _ in series]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ReportError("plot series x values must be strictly increasing")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("x", "y"))
    for x, y in series:
        writer.writerow((format_number(x), format_number(y)))
    return buffer.getvalue()


def format_table(rows: list[ReportRow]) -> str:
    """Aligned plain-text table for the terminal."""
    cells = [REPORT_HEADER] + [
        (r.quantity, format_number(r.value), format_number(r.tolerance), r.verdict, r.provenance)
        for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(REPORT_HEADER))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
