"""Load and validate the evaluator metrics file and the district-count CSV."""

import csv
import json
from pathlib import Path

import jsonschema


class MetricsError(ValueError):
    """An input artifact fails schema or invariant checks."""


_POINT = {
    "type": "array",
    "minItems": 2,
    "maxItems": 2,
    "items": {"type": "number", "minimum": 0.0, "maximum": 1.0},
}

_SERIES = {"type": "array", "items": {"type": "number", "minimum": 0.0}}

METRICS_SCHEMA = {
    "type": "object",
    "required": ["roc", "densities"],
    "properties": {
        "counts": {"type": "object"},
        "metrics": {"type": "object"},
        "roc": {
            "type": "object",
            "required": ["points", "auc"],
            "properties": {
                "points": {"type": "array", "minItems": 2, "items": _POINT},
                "auc": {"type": "number", "minimum": 0.0, "maximum": 1.0},
            },
        },
        "densities": {
            "type": "object",
            "required": ["bins", "tp", "tn", "fp", "fn"],
            "properties": {
                "bins": {"type": "integer", "minimum": 2},
                "tp": _SERIES,
                "tn": _SERIES,
                "fp": _SERIES,
                "fn": _SERIES,
            },
        },
    },
}

QUADRANTS = ("tp", "tn", "fp", "fn")


def load_metrics(path: Path | str) -> dict:
    """Parse a metrics JSON file, enforcing schema and curve invariants."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as err:
        raise MetricsError(f"{path}: {err}") from err
    try:
        jsonschema.validate(raw, METRICS_SCHEMA)
    except jsonschema.ValidationError as err:
        raise MetricsError(f"{path}: {err.message}") from err

    points = raw["roc"]["points"]
    if points[0] != [0.0, 0.0] or points[-1] != [1.0, 1.0]:
        raise MetricsError(
            f"{path}: roc points must start at (0, 0) and end at (1, 1), "
            f"got {tuple(points[0])} .. {tuple(points[-1])}"
        )
    bins = raw["densities"]["bins"]
    for name in QUADRANTS:
        series = raw["densities"][name]
        if len(series) != bins:
            raise MetricsError(
                f"{path}: densities.{name} has length {len(series)}, expected {bins}"
            )
    return raw


def load_district_counts(path: Path | str) -> list[tuple[str, int]]:
    """Read (district, count) rows from a lexstats district-count CSV."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            missing = [c for c in ("district", "count") if c not in fields]
            if missing:
                raise MetricsError(f"{path}: missing column(s) {', '.join(missing)}")
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                try:
                    rows.append((rec["district"], int(rec["count"])))
                except (TypeError, ValueError) as err:
                    raise MetricsError(f"{path}:{lineno}: bad count") from err
    except OSError as err:
        raise MetricsError(f"{path}: {err}") from err
    if not rows:
        raise MetricsError(f"{path}: no data rows")
    return rows
