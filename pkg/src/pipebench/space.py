"""Conditional pipeline parameter spaces.

A :class:`PipelineSpace` describes the five-stage configuration space a study
searches over: every parameter belongs to one stage (tiling, normalization,
feature_extractor, aggregator, training) and may be guarded by a condition on
a categorical parent. A :class:`Configuration` is one concrete point in that
space, canonically ordered and hashable, so it can be serialized, hashed, and
used as a cache key.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping

STAGES = ("tiling", "normalization", "feature_extractor", "aggregator", "training")

KINDS = ("continuous-linear", "continuous-log", "integer", "categorical")
NUMERIC_KINDS = ("continuous-linear", "continuous-log", "integer")

#: Default ceiling for :func:`enumerate_grid`.
DEFAULT_GRID_CAP = 100_000

Value = str | int | float


class SpaceError(ValueError):
    """Raised when a space or configuration violates its contract."""


class GridTooLargeError(SpaceError):
    """Grid enumeration would exceed the configured cap."""

    def __init__(self, cardinality: int, cap: int):
        self.cardinality = cardinality
        self.cap = cap
        super().__init__(f"grid too large: {cardinality} configurations exceed cap {cap}")


class NonFiniteValueError(SpaceError):
    """A real-valued entry is NaN or infinite."""


@dataclass(frozen=True)
class Condition:
    """Activation guard: the parameter is active iff ``parent`` takes one of ``values``."""

    parent: str
    values: tuple[str, ...]

    def activates(self, parent_value: Value) -> bool:
        return str(parent_value) in self.values


@dataclass(frozen=True)
class ParamSpec:
    """One tunable parameter of a pipeline stage."""

    name: str
    stage: str
    kind: str
    low: float | None = None
    high: float | None = None
    choices: tuple[str, ...] | None = None
    condition: Condition | None = None

    @property
    def is_numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS


@dataclass(frozen=True)
class Violation:
    """One broken invariant, naming the offending parameter and rule."""

    param: str
    rule: str

    def __str__(self) -> str:
        return f"{self.param}: {self.rule}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(str(v) for v in self.violations)


@dataclass(frozen=True)
class PipelineSpace:
    """An ordered collection of parameters spanning the five pipeline stages."""

    name: str
    params: tuple[ParamSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))

    def param(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(p.name == name for p in self.params)

    def stage_of(self, name: str) -> str:
        return self.param(name).stage


@dataclass(frozen=True)
class Configuration:
    """One concrete point of a space: name-sorted entries, hashable."""

    space_name: str
    items: tuple[tuple[str, Value], ...]

    @classmethod
    def from_dict(cls, space_name: str, entries: Mapping[str, Value]) -> "Configuration":
        for name, value in entries.items():
            if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                raise SpaceError(f"{name}: unsupported value type {type(value).__name__}")
        items = tuple(sorted(entries.items(), key=lambda kv: kv[0]))
        return cls(space_name=space_name, items=items)

    @property
    def entries(self) -> dict[str, Value]:
        return dict(self.items)

    def __getitem__(self, name: str) -> Value:
        for key, value in self.items:
            if key == name:
                return value
        raise KeyError(name)

    def get(self, name: str, default: Value | None = None) -> Value | None:
        try:
            return self[name]
        except KeyError:
            return default

    def __contains__(self, name: str) -> bool:
        return any(key == name for key, _ in self.items)

    def __iter__(self) -> Iterator[str]:
        return (key for key, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)


def validate_space(space: PipelineSpace, *, require_all_stages: bool = True) -> ValidationReport:
    """Check every space invariant; violations are data, not exceptions.

    ``require_all_stages`` enforces that each of the five stages has at least
    one parameter, which is required before a space is run in benchmark or
    optimize mode but not for partial spaces under construction.
    """
    violations: list[Violation] = []
    by_name: dict[str, ParamSpec] = {}
    for p in space.params:
        if p.name in by_name:
            violations.append(Violation(p.name, "duplicate parameter name"))
            continue
        by_name[p.name] = p

    for p in by_name.values():
        if p.stage not in STAGES:
            violations.append(Violation(p.name, f"unknown stage {p.stage!r}"))
        if p.kind not in KINDS:
            violations.append(Violation(p.name, f"unknown kind {p.kind!r}"))
            continue
        if p.is_numeric:
            if p.low is None or p.high is None:
                violations.append(Violation(p.name, "numeric kind requires low and high"))
            elif not (math.isfinite(p.low) and math.isfinite(p.high)):
                violations.append(Violation(p.name, "bounds must be finite"))
            elif not p.low < p.high:
                violations.append(Violation(p.name, "requires low < high"))
            elif p.kind == "continuous-log" and p.low <= 0:
                violations.append(Violation(p.name, "log domain requires low > 0"))
            elif p.kind == "integer" and (int(p.low) != p.low or int(p.high) != p.high):
                violations.append(Violation(p.name, "integer kind requires integral bounds"))
            if p.choices is not None:
                violations.append(Violation(p.name, "numeric kind must not declare choices"))
        else:
            if not p.choices:
                violations.append(Violation(p.name, "categorical requires non-empty choices"))
            elif len(set(p.choices)) != len(p.choices):
                violations.append(Violation(p.name, "categorical choices must be distinct"))
            if p.low is not None or p.high is not None:
                violations.append(Violation(p.name, "categorical must not declare bounds"))

    for p in by_name.values():
        cond = p.condition
        if cond is None:
            continue
        parent = by_name.get(cond.parent)
        if parent is None:
            violations.append(Violation(p.name, f"unknown parent {cond.parent!r}"))
            continue
        if parent.kind != "categorical":
            violations.append(Violation(p.name, f"parent {cond.parent!r} is not categorical"))
            continue
        if not cond.values:
            violations.append(Violation(p.name, "condition requires activating values"))
        else:
            dead = [v for v in cond.values if v not in (parent.choices or ())]
            if dead:
                violations.append(
                    Violation(p.name, f"activating values {dead} are not choices of {cond.parent!r}")
                )

    # Condition edges must form a forest: each param has at most one parent by
    # construction, so only cycles remain to be ruled out.
    for p in by_name.values():
        seen = {p.name}
        cur = p
        while cur.condition is not None:
            nxt = by_name.get(cur.condition.parent)
            if nxt is None:
                break
            if nxt.name in seen:
                violations.append(Violation(p.name, "condition edges form a cycle"))
                break
            seen.add(nxt.name)
            cur = nxt

    if require_all_stages:
        present = {p.stage for p in by_name.values()}
        for stage in STAGES:
            if stage not in present:
                violations.append(Violation(f"<{stage}>", f"stage {stage!r} has no parameter"))

    return ValidationReport(tuple(violations))


def sampling_order(space: PipelineSpace) -> list[ParamSpec]:
    """Parameters ordered so every parent precedes its children.

    Ties are broken by name, so the order is deterministic for a given space.
    """
    remaining = sorted(space.params, key=lambda p: p.name)
    placed: dict[str, ParamSpec] = {}
    ordered: list[ParamSpec] = []
    while remaining:
        progressed = False
        for p in list(remaining):
            if p.condition is None or p.condition.parent in placed:
                ordered.append(p)
                placed[p.name] = p
                remaining.remove(p)
                progressed = True
        if not progressed:
            names = [p.name for p in remaining]
            raise SpaceError(f"conditions do not form a forest: {names}")
    return ordered


def is_active(param: ParamSpec, assignment: Mapping[str, Value]) -> bool:
    """Whether ``param`` is active given the (partial) assignment of its ancestors."""
    cond = param.condition
    if cond is None:
        return True
    if cond.parent not in assignment:
        return False
    return cond.activates(assignment[cond.parent])


def config_violations(space: PipelineSpace, config: Configuration) -> list[str]:
    """Invariant check for one configuration: active-set match and in-domain values."""
    problems: list[str] = []
    if config.space_name != space.name:
        problems.append(f"space mismatch: {config.space_name!r} != {space.name!r}")
        return problems
    entries = config.entries
    for name in entries:
        if name not in space:
            problems.append(f"unknown parameter {name!r}")
    if problems:
        return problems

    for p in sampling_order(space):
        active = is_active(p, entries)
        if active and p.name not in entries:
            problems.append(f"{p.name}: active parameter missing")
        if not active and p.name in entries:
            problems.append(f"{p.name}: inactive parameter present")
        if p.name not in entries:
            continue
        value = entries[p.name]
        if p.kind == "categorical":
            if not isinstance(value, str) or value not in (p.choices or ()):
                problems.append(f"{p.name}: {value!r} is not a declared choice")
        elif p.kind == "integer":
            if isinstance(value, bool) or not isinstance(value, int):
                problems.append(f"{p.name}: expected integer, got {type(value).__name__}")
            elif not (p.low <= value <= p.high):
                problems.append(f"{p.name}: {value} outside [{p.low}, {p.high}]")
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                problems.append(f"{p.name}: expected real, got {type(value).__name__}")
            elif not math.isfinite(float(value)):
                problems.append(f"{p.name}: non-finite value")
            elif not (p.low <= float(value) <= p.high):
                problems.append(f"{p.name}: {value} outside [{p.low}, {p.high}]")
    return problems


def check_config(space: PipelineSpace, config: Configuration) -> None:
    problems = config_violations(space, config)
    if problems:
        raise SpaceError(f"invalid configuration: {'; '.join(problems)}")


def render_real(x: float) -> str:
    """Shortest round-trip scientific rendering: ``0.001 -> '1e-3'``.

    The mantissa carries exactly the digits of the shortest decimal that
    round-trips to ``x``, so equal floats render to equal strings on every
    platform and ``float(render_real(x)) == x``.
    """
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteValueError("non-finite value")
    if x == 0.0:
        return "0e0"
    sign = "-" if x < 0 else ""
    text = repr(abs(x))
    mantissa, _, exp_part = text.partition("e")
    exp = int(exp_part) if exp_part else 0
    int_part, _, frac_part = mantissa.partition(".")
    digits = int_part + frac_part
    first = next(i for i, ch in enumerate(digits) if ch != "0")
    exp10 = len(int_part) - 1 - first + exp
    sig = digits[first:].rstrip("0") or "0"
    body = sig[0] if len(sig) == 1 else f"{sig[0]}.{sig[1:]}"
    return f"{sign}{body}e{exp10}"


def render_value(value: Value) -> str:
    if isinstance(value, bool):
        raise SpaceError("boolean configuration values are not supported")
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return render_real(value)


def canonical_serialize(config: Configuration) -> bytes:
    """Deterministic byte form: ``name=value`` lines sorted by name.

    A pure function of the entry set; equal configurations produce equal
    bytes regardless of construction order.
    """
    lines = []
    for name, value in config.items:
        lines.append(f"{name}={render_value(value)}\n")
    return "".join(lines).encode("utf-8")


def config_digest(config: Configuration) -> str:
    return hashlib.sha256(canonical_serialize(config)).hexdigest()


def subconfig(space: PipelineSpace, config: Configuration, stages: Iterable[str]) -> Configuration:
    """Restriction of ``config`` to parameters whose stage is in ``stages``."""
    stage_set = set(stages)
    if not stage_set:
        raise SpaceError("stages must be non-empty")
    unknown = stage_set - set(STAGES)
    if unknown:
        raise SpaceError(f"unknown stages: {sorted(unknown)}")
    kept = {
        name: value for name, value in config.items if space.stage_of(name) in stage_set
    }
    return Configuration.from_dict(config.space_name, kept)


def grid_values(param: ParamSpec, numeric_grid_points: int) -> list[Value]:
    """Per-parameter grid: choices in declaration order, or an inclusive numeric grid.

    Numeric grids include both endpoints; log grids are geometric. Integer
    grids are rounded to the nearest integer and deduplicated, so a narrow
    range may yield fewer than ``numeric_grid_points`` values.
    """
    import numpy as np

    if param.kind == "categorical":
        return list(param.choices or ())
    if numeric_grid_points < 1:
        raise SpaceError("numeric_grid_points must be >= 1")
    low, high = float(param.low), float(param.high)
    if numeric_grid_points == 1:
        raw = [low]
    elif param.kind == "continuous-log":
        raw = np.geomspace(low, high, numeric_grid_points).tolist()
    else:
        raw = np.linspace(low, high, numeric_grid_points).tolist()
    if param.kind == "integer":
        values: list[Value] = []
        for x in raw:
            v = int(np.rint(x))
            v = min(max(v, int(param.low)), int(param.high))
            if v not in values:
                values.append(v)
        return values
    return [float(x) for x in raw]


def count_grid(space: PipelineSpace, numeric_grid_points: int) -> int:
    """Exact cardinality of the conditional grid without materializing it."""
    by_name = {p.name: p for p in space.params}
    children: dict[str, list[ParamSpec]] = {p.name: [] for p in space.params}
    roots: list[ParamSpec] = []
    for p in space.params:
        if p.condition is None:
            roots.append(p)
        else:
            children[p.condition.parent].append(p)

    def subtotal(param: ParamSpec) -> int:
        total = 0
        for value in grid_values(param, numeric_grid_points):
            weight = 1
            for child in children[param.name]:
                if child.condition.activates(value):
                    weight *= subtotal(child)
            total += weight
        return total

    count = 1
    for p in roots:
        count *= subtotal(p)
    # Unreachable conditional parameters (never activated) contribute nothing;
    # they simply stay absent from every configuration.
    del by_name
    return count


def enumerate_grid(
    space: PipelineSpace,
    numeric_grid_points: int,
    *,
    cap: int = DEFAULT_GRID_CAP,
) -> list[Configuration]:
    """All configurations of the conditional grid, deterministically ordered.

    Ordering is lexicographic over name-sorted parameters with absent
    conditional parameters sorting first and values compared by their grid or
    declaration index.
    """
    # Stage coverage is a run-mode invariant checked by the engine; partial
    # spaces may still be enumerated (e.g. in tests and tooling).
    report = validate_space(space, require_all_stages=False)
    if not report.ok:
        raise SpaceError(f"invalid space: {report}")
    cardinality = count_grid(space, numeric_grid_points)
    if cardinality > cap:
        raise GridTooLargeError(cardinality, cap)

    order = sampling_order(space)
    values = {p.name: grid_values(p, numeric_grid_points) for p in space.params}
    names_sorted = sorted(p.name for p in space.params)

    results: list[tuple[tuple, Configuration]] = []
    assignment: dict[str, Value] = {}
    indices: dict[str, int] = {}

    def expand(pos: int) -> None:
        if pos == len(order):
            key = tuple(
                (1, indices[name]) if name in assignment else (0, 0)
                for name in names_sorted
            )
            results.append((key, Configuration.from_dict(space.name, assignment)))
            return
        param = order[pos]
        if not is_active(param, assignment):
            expand(pos + 1)
            return
        for idx, value in enumerate(values[param.name]):
            assignment[param.name] = value
            indices[param.name] = idx
            expand(pos + 1)
            del assignment[param.name]
            del indices[param.name]

    expand(0)
    results.sort(key=lambda pair: pair[0])
    return [config for _, config in results]


def serialize_space(space: PipelineSpace) -> dict[str, Any]:
    """JSON-ready description, the inverse of :func:`space_from_dict`."""
    params = []
    for p in space.params:
        entry: dict[str, Any] = {"name": p.name, "stage": p.stage, "kind": p.kind}
        if p.is_numeric:
            entry["low"] = p.low
            entry["high"] = p.high
        else:
            entry["choices"] = list(p.choices or ())
        if p.condition is not None:
            entry["condition"] = {
                "parent": p.condition.parent,
                "values": list(p.condition.values),
            }
        params.append(entry)
    return {"name": space.name, "params": params}


def space_from_dict(data: Mapping[str, Any]) -> PipelineSpace:
    params = []
    for entry in data["params"]:
        condition = None
        if entry.get("condition"):
            condition = Condition(
                parent=entry["condition"]["parent"],
                values=tuple(entry["condition"]["values"]),
            )
        params.append(
            ParamSpec(
                name=entry["name"],
                stage=entry["stage"],
                kind=entry["kind"],
                low=entry.get("low"),
                high=entry.get("high"),
                choices=tuple(entry["choices"]) if entry.get("choices") else None,
                condition=condition,
            )
        )
    return PipelineSpace(name=data["name"], params=tuple(params))


def space_fingerprint(space: PipelineSpace) -> str:
    """Stable digest of the space declaration, used to guard journal resume."""
    import json

    blob = json.dumps(serialize_space(space), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
