"""Flattened result rows: filtering, grouping, plot series, CSV export.

One row per trial with every configuration entry as a column. Inactive
conditional parameters are rendered as the reserved ``__inactive__`` token so
they stay distinguishable from genuinely missing values, which render empty.
"""

from __future__ import annotations

import csv
import math
import re
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

INACTIVE = "__inactive__"

FIXED_COLUMNS = (
    "study_id",
    "trial_id",
    "state",
    "seed",
    "bracket",
    "steps",
    "final_value",
    "last_value",
)

_FILTER_RE = re.compile(r"^([A-Za-z_][\w.+-]*)(>=|<=|=)(.*)$")


class ResultError(ValueError):
    pass


class UnknownColumnError(ResultError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"unknown column {column!r}")


class FilterError(ResultError):
    def __init__(self, token: str, reason: str = "malformed filter"):
        self.token = token
        super().__init__(f"{reason}: {token!r}")


def flatten_study(state: Any) -> tuple[list[str], list[dict[str, Any]]]:
    """(columns, rows) for a study state; column set is study-wide consistent."""
    meta = state.meta
    if meta is None:
        raise ResultError("study has no header; cannot flatten")
    param_names = sorted(meta.param_names)
    cache_cols = sorted({f"cache_hit.{k}" for t in state.trials.values() for k in t.cache_hits})
    columns = list(FIXED_COLUMNS) + param_names + cache_cols
    rows = []
    for tid in sorted(state.trials):
        t = state.trials[tid]
        row: dict[str, Any] = {
            "study_id": meta.study_id,
            "trial_id": t.id,
            "state": t.state,
            "seed": t.seed,
            "bracket": t.bracket,
            "steps": t.steps,
            "final_value": t.final_value,
            "last_value": t.last_value,
        }
        entries = t.config.entries
        for name in param_names:
            row[name] = entries.get(name, INACTIVE)
        for col in cache_cols:
            row[col] = t.cache_hits.get(col[len("cache_hit.") :])
        rows.append(row)
    return columns, rows


@dataclass(frozen=True)
class Predicate:
    column: str
    op: str  # "=", ">=", "<="
    token: str

    def matches(self, row: Mapping[str, Any]) -> bool:
        if self.column not in row:
            raise UnknownColumnError(self.column)
        value = row[self.column]
        if self.op == "=":
            if value is None:
                return self.token == ""
            if isinstance(value, bool):
                return self.token.lower() == str(value).lower()
            if isinstance(value, (int, float)):
                try:
                    return float(value) == float(self.token)
                except ValueError:
                    return False
            return str(value) == self.token
        if value is None or isinstance(value, bool) or not isinstance(value, (int, float)):
            return False
        try:
            bound = float(self.token)
        except ValueError:
            raise FilterError(self.token, "range filter needs a numeric bound") from None
        return value >= bound if self.op == ">=" else value <= bound


def parse_filters(expression: str | None) -> list[Predicate]:
    """Parse the comma-conjunction mini-grammar: ``col=value, col>=x, col<=x``."""
    if not expression:
        return []
    predicates = []
    for token in expression.split(","):
        token = token.strip()
        if not token:
            continue
        match = _FILTER_RE.match(token)
        if match is None:
            raise FilterError(token)
        predicates.append(Predicate(column=match.group(1), op=match.group(2), token=match.group(3)))
    return predicates


def filter_rows(
    rows: Sequence[Mapping[str, Any]], predicates: Sequence[Predicate]
) -> list[Mapping[str, Any]]:
    return [row for row in rows if all(p.matches(row) for p in predicates)]


AGGREGATES = ("mean", "std", "median", "count", "best")


@dataclass(frozen=True)
class GroupRow:
    key: tuple[Any, ...]
    count: int
    value: float | None


@dataclass(frozen=True)
class GroupedTable:
    group_by: tuple[str, ...]
    aggregate: str
    metric: str
    groups: tuple[GroupRow, ...]


def query(
    rows: Sequence[Mapping[str, Any]],
    filters: Sequence[Predicate] | str | None = None,
    group_by: Sequence[str] = (),
    aggregate: str = "mean",
    metric: str = "final_value",
    direction: str = "minimize",
) -> GroupedTable:
    """Conjunctive filter, then group and aggregate the chosen metric.

    Groups are keyed by distinct value tuples and returned key-sorted;
    ``best`` is direction-aware.
    """
    if isinstance(filters, str):
        filters = parse_filters(filters)
    kept = filter_rows(rows, filters or [])
    if aggregate not in AGGREGATES:
        raise ResultError(f"unknown aggregate {aggregate!r}")
    for col in list(group_by) + [metric]:
        if kept and col not in kept[0]:
            raise UnknownColumnError(col)

    buckets: dict[tuple, list[Mapping[str, Any]]] = {}
    for row in kept:
        key = tuple(row[c] for c in group_by)
        buckets.setdefault(key, []).append(row)

    def agg(values: list[float]) -> float | None:
        if not values:
            return None
        if aggregate == "mean":
            return float(statistics.fmean(values))
        if aggregate == "std":
            return float(statistics.pstdev(values))
        if aggregate == "median":
            return float(statistics.median(values))
        if aggregate == "best":
            return float(min(values) if direction == "minimize" else max(values))
        raise AssertionError(aggregate)

    groups = []
    for key in sorted(buckets, key=lambda k: tuple(str(v) for v in k)):
        bucket = buckets[key]
        if aggregate == "count":
            groups.append(GroupRow(key=key, count=len(bucket), value=float(len(bucket))))
            continue
        values = [
            float(row[metric])
            for row in bucket
            if isinstance(row[metric], (int, float)) and not isinstance(row[metric], bool)
        ]
        groups.append(GroupRow(key=key, count=len(bucket), value=agg(values)))
    return GroupedTable(
        group_by=tuple(group_by), aggregate=aggregate, metric=metric, groups=tuple(groups)
    )


def best_so_far(values: Sequence[float], direction: str = "minimize") -> list[float]:
    """Running best: running minimum when minimizing, maximum otherwise."""
    out: list[float] = []
    best: float | None = None
    for v in values:
        if best is None:
            best = v
        elif direction == "minimize":
            best = min(best, v)
        else:
            best = max(best, v)
        out.append(best)
    return out


@dataclass(frozen=True)
class Series:
    label: str
    points: tuple[tuple[Any, float], ...]


def plot_series(
    rows: Sequence[Mapping[str, Any]],
    x: str,
    y: str,
    group_by: str | None = None,
    transform: str | None = None,
    direction: str = "minimize",
) -> list[Series]:
    """One labeled (x, y) series per group, points sorted by x.

    ``transform="best_so_far"`` replaces y values with their running best,
    suitable for optimize-study progress curves.
    """
    if rows:
        for col in [x, y] + ([group_by] if group_by else []):
            if col not in rows[0]:
                raise UnknownColumnError(col)
    if transform not in (None, "best_so_far"):
        raise ResultError(f"unknown transform {transform!r}")

    usable = []
    for row in rows:
        yv = row[y]
        if yv is None or row[x] is None or row[x] == INACTIVE:
            continue
        if isinstance(yv, bool) or not isinstance(yv, (int, float)):
            raise ResultError(f"column {y!r} is not numeric")
        usable.append(row)

    buckets: dict[Any, list[Mapping[str, Any]]] = {}
    for row in usable:
        buckets.setdefault(row[group_by] if group_by else None, []).append(row)

    def sort_key(row: Mapping[str, Any]) -> Any:
        xv = row[x]
        if isinstance(xv, bool) or not isinstance(xv, (int, float)):
            return (1, str(xv))
        return (0, float(xv))

    series = []
    for key in sorted(buckets, key=lambda k: str(k)):
        bucket = sorted(buckets[key], key=sort_key)
        points = [(row[x], float(row[y])) for row in bucket]
        if transform == "best_so_far":
            bests = best_so_far([p[1] for p in points], direction)
            points = [(p[0], b) for p, b in zip(points, bests)]
        label = "all" if group_by is None else f"{group_by}={key}"
        series.append(Series(label=label, points=tuple(points)))
    return series


def _render_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ResultError("non-finite value in export")
        return repr(value)
    return str(value)


def export_csv(
    rows: Sequence[Mapping[str, Any]],
    path: str | Path,
    columns: Sequence[str] | None = None,
) -> Path:
    """RFC-4180-style export; floats use shortest round-trip rendering."""
    if not rows:
        raise ResultError("no rows to export")
    if columns is None:
        columns = list(rows[0].keys())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_render_cell(row.get(col)) for col in columns])
    return path


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        as_int = int(text)
        if str(as_int) == text:
            return as_int
    except ValueError:
        pass
    try:
        as_float = float(text)
        if repr(as_float) == text:
            return as_float
    except ValueError:
        pass
    return text


def load_csv(path: str | Path) -> tuple[list[str], list[dict[str, Any]]]:
    """Inverse of :func:`export_csv` for canonical exports.

    Only canonically rendered integers and reals are re-typed; anything else
    stays a string, which keeps export -> load -> export byte-stable.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [
            {col: _parse_cell(cell) for col, cell in zip(header, line)} for line in reader
        ]
    return header, rows
