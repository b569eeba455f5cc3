"""Early-termination policies over intermediate validation values.

Two decision rules are provided as pure functions (median-vs-peers and
successive-halving rung truncation) plus engine-facing policy objects that
add warm-up handling and bracket bookkeeping. Policies never mutate state;
the engine hands them a snapshot of peer curves at decision time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class PrunerError(ValueError):
    pass


class NoReportError(PrunerError):
    """The trial has no recorded value at the requested step."""


@dataclass(frozen=True)
class IntermediateCurve:
    """Per-trial reported values, strictly increasing in step."""

    trial_id: int
    points: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        last_step = None
        for step, value in self.points:
            if step < 0:
                raise PrunerError(f"trial {self.trial_id}: negative step {step}")
            if last_step is not None and step <= last_step:
                raise PrunerError(f"trial {self.trial_id}: steps must strictly increase")
            if not math.isfinite(value):
                raise PrunerError(f"trial {self.trial_id}: non-finite value at step {step}")
            last_step = step

    def value_at(self, step: int) -> float | None:
        for s, v in self.points:
            if s == step:
                return v
        return None

    @property
    def last(self) -> tuple[int, float] | None:
        return self.points[-1] if self.points else None


def _adjust(value: float, direction: str) -> float:
    return value if direction == "minimize" else -value


def median_should_prune(
    curve: IntermediateCurve,
    peers: Sequence[IntermediateCurve],
    step: int,
    direction: str,
    warmup_trials: int = 5,
    warmup_steps: int = 1,
) -> bool:
    """Prune iff strictly worse than the median of peer values at ``step``.

    Returns False during warm-up: when fewer than ``warmup_trials`` peers
    have reported at this step, or when ``step`` is below ``warmup_steps``.
    A value exactly equal to the median survives.
    """
    own = curve.value_at(step)
    if own is None:
        raise NoReportError(f"trial {curve.trial_id}: no report at step {step}")
    if step < warmup_steps:
        return False
    peer_values = [v for p in peers if (v := p.value_at(step)) is not None]
    if len(peer_values) < warmup_trials:
        return False
    ranked = sorted(_adjust(v, direction) for v in peer_values)
    mid = len(ranked) // 2
    if len(ranked) % 2:
        median = ranked[mid]
    else:
        median = 0.5 * (ranked[mid - 1] + ranked[mid])
    return _adjust(own, direction) > median


@dataclass(frozen=True)
class HyperbandSchedule:
    """Geometric rung budgets shared by a family of successive-halving brackets.

    Bracket ``s`` (0..s_max) checks the first ``s + 1`` rungs of the
    geometric ladder ``r_min * eta**k`` (each capped at ``R``): bracket
    ``s_max`` climbs the full ladder while bracket 0 only cuts at ``r_min``,
    so the bracket family spans a range of early-stopping aggressiveness.
    """

    r_min: int
    R: int
    eta: int

    def __post_init__(self) -> None:
        if self.r_min < 1:
            raise PrunerError("r_min must be >= 1")
        if self.R < self.r_min:
            raise PrunerError("R must be >= r_min")
        if self.eta < 2:
            raise PrunerError("eta must be an integer >= 2")

    @property
    def s_max(self) -> int:
        return int(math.floor(math.log(self.R / self.r_min) / math.log(self.eta)))

    @property
    def n_brackets(self) -> int:
        return self.s_max + 1

    def bracket_rungs(self, bracket: int) -> tuple[int, ...]:
        if not 0 <= bracket <= self.s_max:
            raise PrunerError(f"bracket {bracket} outside [0, {self.s_max}]")
        rungs = []
        for k in range(bracket + 1):
            rungs.append(min(self.r_min * self.eta**k, self.R))
        return tuple(rungs)

    @property
    def brackets(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.bracket_rungs(s) for s in range(self.n_brackets))


def hyperband_assign_bracket(trial_id: int, schedule: HyperbandSchedule) -> int:
    """Round-robin bracket assignment: ``trial_id mod (s_max + 1)``."""
    return trial_id % schedule.n_brackets


def sha_should_prune(
    curve: IntermediateCurve,
    rung_values: Sequence[tuple[int, float]],
    rung: int,
    eta: int,
    direction: str,
) -> bool:
    """Successive-halving cut: survive iff within the top ``ceil(m / eta)``.

    ``rung_values`` are (trial_id, value) pairs recorded at this rung within
    the trial's bracket; the deciding trial's own value is included
    automatically if missing. Ties at the cut boundary keep the lower trial
    id.
    """
    own = curve.value_at(rung)
    if own is None:
        raise NoReportError(f"trial {curve.trial_id}: no report at step {rung}")
    entries = list(rung_values)
    if curve.trial_id not in [tid for tid, _ in entries]:
        entries.append((curve.trial_id, own))
    m = len(entries)
    n_keep = math.ceil(m / eta)
    ranked = sorted(entries, key=lambda pair: (_adjust(pair[1], direction), pair[0]))
    survivors = {tid for tid, _ in ranked[:n_keep]}
    return curve.trial_id not in survivors


@dataclass(frozen=True)
class TrialView:
    """Engine snapshot of one peer trial at decision time."""

    trial_id: int
    bracket: int | None
    state: str
    curve: IntermediateCurve


class NoPruner:
    name = "none"

    def assign_bracket(self, trial_id: int) -> int | None:
        return None

    def should_prune(
        self,
        trial_id: int,
        bracket: int | None,
        step: int,
        snapshot: Sequence[TrialView],
        direction: str,
    ) -> bool:
        return False

    def describe(self) -> dict:
        return {"type": "none"}


class MedianPruner:
    """Prune below-median trials once enough peers exist at the step."""

    name = "median"

    def __init__(self, warmup_trials: int = 5, warmup_steps: int = 1):
        self.warmup_trials = warmup_trials
        self.warmup_steps = warmup_steps

    def assign_bracket(self, trial_id: int) -> int | None:
        return None

    def should_prune(
        self,
        trial_id: int,
        bracket: int | None,
        step: int,
        snapshot: Sequence[TrialView],
        direction: str,
    ) -> bool:
        own = next(v.curve for v in snapshot if v.trial_id == trial_id)
        peers = [v.curve for v in snapshot if v.trial_id != trial_id]
        return median_should_prune(
            own,
            peers,
            step,
            direction,
            warmup_trials=self.warmup_trials,
            warmup_steps=self.warmup_steps,
        )

    def describe(self) -> dict:
        return {
            "type": "median",
            "warmup_trials": self.warmup_trials,
            "warmup_steps": self.warmup_steps,
        }


class HyperbandPruner:
    """Asynchronous bracketed successive halving.

    Trials are assigned to brackets round-robin at creation; at each rung
    budget of its bracket, a trial survives only if it ranks within the top
    ``1/eta`` of the values recorded at that rung so far. The first
    ``warmup_trials`` trials always run to completion.
    """

    name = "hyperband"

    def __init__(
        self,
        r_min: int = 1,
        R: int = 27,
        eta: int = 3,
        warmup_trials: int = 5,
        warmup_steps: int = 1,
    ):
        self.schedule = HyperbandSchedule(r_min=r_min, R=R, eta=eta)
        self.warmup_trials = warmup_trials
        self.warmup_steps = warmup_steps

    def assign_bracket(self, trial_id: int) -> int:
        return hyperband_assign_bracket(trial_id, self.schedule)

    def should_prune(
        self,
        trial_id: int,
        bracket: int | None,
        step: int,
        snapshot: Sequence[TrialView],
        direction: str,
    ) -> bool:
        if trial_id < self.warmup_trials or step < self.warmup_steps:
            return False
        if bracket is None or step not in self.schedule.bracket_rungs(bracket):
            return False
        own = next(v.curve for v in snapshot if v.trial_id == trial_id)
        rung_values = [
            (v.trial_id, value)
            for v in snapshot
            if v.bracket == bracket and (value := v.curve.value_at(step)) is not None
        ]
        return sha_should_prune(own, rung_values, step, self.schedule.eta, direction)

    def describe(self) -> dict:
        return {
            "type": "hyperband",
            "r_min": self.schedule.r_min,
            "R": self.schedule.R,
            "eta": self.schedule.eta,
            "warmup_trials": self.warmup_trials,
            "warmup_steps": self.warmup_steps,
        }
