"""Study orchestration: trial lifecycles, persistence, and resume.

Both operating modes share one trial lifecycle: obtain a configuration
(sampled or enumerated), consult the artifact cache, evaluate with per-step
reporting, consult the pruner after every step, and append every transition
to the journal. The in-memory study state is maintained by applying exactly
the events that were journaled, so replaying a journal reconstructs the
identical state by construction.
"""

from __future__ import annotations

import math
import os
import threading
import time
import warnings
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence

import numpy as np

from .cache import ArtifactKey, NullCache
from .contract import CacheAccessor, EvaluationError, Evaluator
from .journal import (
    EV_CACHE,
    EV_STATE_CHANGED,
    EV_STUDY_FINISHED,
    EV_STUDY_STARTED,
    EV_TRIAL_CREATED,
    EV_TRIAL_RESTARTED,
    EV_VALUE_REPORTED,
    JournalCorruptError,
    StudyJournal,
    replay_journal,
)
from .pruners import IntermediateCurve, NoPruner, TrialView
from .samplers import HistoryEntry, ObservationHistory
from .space import (
    DEFAULT_GRID_CAP,
    Configuration,
    PipelineSpace,
    enumerate_grid,
    serialize_space,
    space_fingerprint,
    validate_space,
)

JOURNAL_NAME = "journal.ndjson"
RESULTS_NAME = "results.csv"

# Seed-stream tag separating sampler draws from evaluator seeds.
_SAMPLER_STREAM = 7919


class StudyError(RuntimeError):
    pass


class JournalMismatchError(StudyError):
    """The journal was produced for a different space or configuration."""


class StudyLockedError(StudyError):
    pass


TERMINAL_STATES = ("complete", "pruned", "failed")
_LEGAL_TRANSITIONS = {
    ("created", "running"),
    ("running", "complete"),
    ("running", "pruned"),
    ("running", "failed"),
}


@dataclass
class TrialRecord:
    """Full lifecycle state of one trial, reconstructible from the journal."""

    id: int
    config: Configuration
    seed: int
    bracket: int | None = None
    state: str = "created"
    points: list[tuple[int, float]] = field(default_factory=list)
    final_value: float | None = None
    error: str | None = None
    started_at: float | None = None
    ended_at: float | None = None
    cache_hits: dict[str, bool] = field(default_factory=dict)

    def curve(self) -> IntermediateCurve:
        return IntermediateCurve(trial_id=self.id, points=tuple(self.points))

    @property
    def steps(self) -> int:
        return len(self.points)

    @property
    def last_value(self) -> float | None:
        return self.points[-1][1] if self.points else None


@dataclass
class StudyMeta:
    study_id: str
    mode: str
    direction: str
    seed: int
    space: dict[str, Any]
    space_fingerprint: str
    metric: str = "value"
    budget: int | None = None
    repeats: int | None = None
    grid_points: int | None = None
    sampler: dict[str, Any] | None = None
    pruner: dict[str, Any] | None = None
    config_fingerprint: str | None = None
    config_text: str | None = None

    @property
    def param_names(self) -> list[str]:
        return [p["name"] for p in self.space["params"]]


@dataclass
class StudyState:
    """Event-fold of a journal; also the engine's live in-memory state."""

    meta: StudyMeta | None = None
    trials: dict[int, TrialRecord] = field(default_factory=dict)
    last_seq: int = 0
    status: str = "running"
    finish_reason: str | None = None

    def apply(self, record: dict[str, Any]) -> None:
        event = record["event"]
        self.last_seq = record["seq"]
        if event == EV_STUDY_STARTED:
            if self.meta is not None:
                raise JournalCorruptError("duplicate study_started event")
            self.meta = StudyMeta(
                study_id=record["study_id"],
                mode=record["mode"],
                direction=record["direction"],
                seed=record["seed"],
                space=record["space"],
                space_fingerprint=record["space_fingerprint"],
                metric=record.get("metric", "value"),
                budget=record.get("budget"),
                repeats=record.get("repeats"),
                grid_points=record.get("grid_points"),
                sampler=record.get("sampler"),
                pruner=record.get("pruner"),
                config_fingerprint=record.get("config_fingerprint"),
                config_text=record.get("config_text"),
            )
            return
        if self.meta is None:
            raise JournalCorruptError(f"{event} before study_started")
        if event == EV_STUDY_FINISHED:
            self.status = record["status"]
            self.finish_reason = record.get("reason")
            return

        tid = record["id"]
        if event == EV_TRIAL_CREATED:
            if tid in self.trials:
                raise JournalCorruptError(f"trial {tid} created twice")
            self.trials[tid] = TrialRecord(
                id=tid,
                config=Configuration.from_dict(self.meta.space["name"], record["config"]),
                seed=record["seed"],
                bracket=record.get("bracket"),
            )
            return
        trial = self.trials.get(tid)
        if trial is None:
            raise JournalCorruptError(f"{event} for unknown trial {tid}")
        if event == EV_STATE_CHANGED:
            new_state = record["state"]
            if (trial.state, new_state) not in _LEGAL_TRANSITIONS:
                raise JournalCorruptError(
                    f"trial {tid}: illegal transition {trial.state} -> {new_state}"
                )
            trial.state = new_state
            if new_state == "running":
                trial.started_at = record.get("ts")
            else:
                trial.ended_at = record.get("ts")
            if new_state == "complete":
                value = record.get("final_value")
                if value is None or not math.isfinite(value):
                    raise JournalCorruptError(f"trial {tid}: complete without finite value")
                trial.final_value = float(value)
            if new_state == "failed":
                trial.error = record.get("error")
        elif event == EV_VALUE_REPORTED:
            if trial.state != "running":
                raise JournalCorruptError(f"trial {tid}: report while {trial.state}")
            step, value = record["step"], record["value"]
            if trial.points and step <= trial.points[-1][0]:
                raise JournalCorruptError(f"trial {tid}: non-increasing step {step}")
            if not math.isfinite(value):
                raise JournalCorruptError(f"trial {tid}: non-finite reported value")
            trial.points.append((int(step), float(value)))
        elif event == EV_TRIAL_RESTARTED:
            if trial.state != "running":
                raise JournalCorruptError(f"trial {tid}: restart while {trial.state}")
            trial.points.clear()
            trial.cache_hits.clear()
            trial.error = None
        elif event == EV_CACHE:
            trial.cache_hits[record["stages"]] = bool(record["hit"])
        else:
            raise JournalCorruptError(f"unknown event {event!r}")

    def history(self, direction: str) -> ObservationHistory:
        entries = []
        for tid in sorted(self.trials):
            r = self.trials[tid]
            if r.state == "complete":
                entries.append(HistoryEntry(r.config, r.final_value, "complete"))
            elif r.state == "pruned":
                entries.append(HistoryEntry(r.config, r.last_value, "pruned"))
        return ObservationHistory(direction=direction, entries=tuple(entries))

    def views(self) -> list[TrialView]:
        return [
            TrialView(trial_id=r.id, bracket=r.bracket, state=r.state, curve=r.curve())
            for r in self.trials.values()
        ]

    def counts(self) -> dict[str, int]:
        out = {"created": 0, "running": 0, "complete": 0, "pruned": 0, "failed": 0}
        for r in self.trials.values():
            out[r.state] += 1
        return out


def build_state(events: Iterable[dict[str, Any]]) -> StudyState:
    """Fold journaled events into a study state, checking lifecycle legality."""
    state = StudyState()
    for record in events:
        state.apply(record)
    return state


@dataclass(frozen=True)
class StudyResult:
    config: Configuration
    value: float
    trial_id: int
    degraded: bool = False


@dataclass(frozen=True)
class ConfigStats:
    config: Configuration
    n_complete: int
    n_failed: int
    mean: float | None
    std: float | None


@dataclass(frozen=True)
class BenchmarkSummary:
    stats: tuple[ConfigStats, ...]
    aborted: bool = False

    def best(self, direction: str = "minimize") -> ConfigStats:
        ranked = [s for s in self.stats if s.mean is not None]
        if not ranked:
            raise StudyError("study produced no values")
        sign = 1.0 if direction == "minimize" else -1.0
        return min(ranked, key=lambda s: sign * s.mean)


def estimate_speedup(n_configurations: int, n_trials: int, cost_fraction: float) -> float:
    """Expected wall-clock gain of guided search over exhaustive evaluation.

    Computes configurations / (trials * cost_fraction); warns when the cost
    fraction falls outside the empirically typical [0.05, 0.3] band.
    """
    if n_configurations < 1 or n_trials < 1:
        raise ValueError("n_configurations and n_trials must be >= 1")
    if not 0.0 < cost_fraction <= 1.0:
        raise ValueError(f"cost_fraction must be in (0, 1], got {cost_fraction}")
    if not 0.05 <= cost_fraction <= 0.3:
        warnings.warn(
            f"cost_fraction {cost_fraction} outside the typical [0.05, 0.3] range",
            stacklevel=2,
        )
    return (n_configurations / n_trials) / cost_fraction


class StudyLock:
    """Single-owner lock on a study directory with stale-lock takeover.

    The lock file's mtime doubles as a heartbeat; a lock whose heartbeat is
    older than ``stale_after`` seconds is presumed dead and taken over.
    """

    def __init__(self, study_dir: str | Path, *, stale_after: float = 30.0):
        self.path = Path(study_dir) / ".study.lock"
        self.stale_after = stale_after

    def acquire(self) -> "StudyLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        for _ in range(3):
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                with os.fdopen(fd, "w") as fh:
                    fh.write(str(os.getpid()))
                return self
            except FileExistsError:
                try:
                    age = time.time() - self.path.stat().st_mtime
                except FileNotFoundError:
                    continue
                if age > self.stale_after:
                    self.path.unlink(missing_ok=True)
                    continue
                raise StudyLockedError(
                    f"study directory is owned by another process ({self.path})"
                )
        raise StudyLockedError(f"could not acquire study lock {self.path}")

    def heartbeat(self) -> None:
        try:
            os.utime(self.path)
        except FileNotFoundError:
            pass

    def release(self) -> None:
        self.path.unlink(missing_ok=True)

    def __enter__(self) -> "StudyLock":
        return self.acquire()

    def __exit__(self, *exc: object) -> None:
        self.release()


class _TrialCacheAccessor:
    """Journals hit/miss per lookup and tags the trial's record."""

    def __init__(self, runner: "_Runner", trial: TrialRecord):
        self._runner = runner
        self._trial = trial

    def get_or_compute(self, key: ArtifactKey, producer: Callable[[], Any]) -> tuple[Any, bool]:
        value, hit = self._runner.cache.get_or_compute(key, producer)
        self._runner.emit(
            EV_CACHE,
            {
                "id": self._trial.id,
                "key": str(key),
                "stages": "+".join(key.stage_set),
                "hit": hit,
            },
        )
        return value, hit


class _Runner:
    """Shared machinery of both modes over one journal-backed state."""

    def __init__(
        self,
        *,
        state: StudyState,
        journal: StudyJournal,
        space: PipelineSpace,
        evaluator: Evaluator,
        direction: str,
        cache: CacheAccessor | None,
        pruner: Any,
        concurrency: int,
        prune_enabled: bool,
    ):
        self.state = state
        self.journal = journal
        self.space = space
        self.evaluator = evaluator
        self.direction = direction
        self.cache = cache if cache is not None else NullCache()
        self.pruner = pruner if pruner is not None else NoPruner()
        self.concurrency = max(1, concurrency)
        self.prune_enabled = prune_enabled
        self.lock = threading.RLock()

    def emit(self, event: str, payload: dict[str, Any]) -> None:
        with self.lock:
            record = {"ts": time.time(), **payload}
            seq = self.journal.append(event, record)
            self.state.apply({"seq": seq, "event": event, **record})

    def create_trial(
        self, trial_id: int, config: Configuration, seed: int
    ) -> TrialRecord:
        bracket = self.pruner.assign_bracket(trial_id) if self.prune_enabled else None
        payload: dict[str, Any] = {
            "id": trial_id,
            "seed": seed,
            "config": config.entries,
        }
        if bracket is not None:
            payload["bracket"] = bracket
        self.emit(EV_TRIAL_CREATED, payload)
        return self.state.trials[trial_id]

    def execute_trial(self, trial: TrialRecord, fresh: bool) -> None:
        if fresh:
            self.emit(EV_STATE_CHANGED, {"id": trial.id, "state": "running"})
        else:
            self.emit(EV_TRIAL_RESTARTED, {"id": trial.id})
        prune_flag = False

        def report(step: int, value: float) -> bool:
            nonlocal prune_flag
            if not isinstance(step, int) or isinstance(step, bool) or step < 0:
                raise EvaluationError(f"invalid report step {step!r}")
            value = float(value)
            if not math.isfinite(value):
                raise EvaluationError(f"non-finite reported value at step {step}")
            with self.lock:
                self.emit(
                    EV_VALUE_REPORTED, {"id": trial.id, "step": step, "value": value}
                )
                if not self.prune_enabled:
                    return False
                should = self.pruner.should_prune(
                    trial.id, trial.bracket, step, self.state.views(), self.direction
                )
            if should:
                prune_flag = True
            return should

        accessor = _TrialCacheAccessor(self, trial)
        try:
            final = self.evaluator(trial.config, trial.seed, report, accessor)
        except Exception as exc:  # a broken trial must not sink the study
            message = str(exc) if isinstance(exc, EvaluationError) else f"{type(exc).__name__}: {exc}"
            self.emit(
                EV_STATE_CHANGED, {"id": trial.id, "state": "failed", "error": message}
            )
            return
        if prune_flag:
            self.emit(EV_STATE_CHANGED, {"id": trial.id, "state": "pruned"})
            return
        try:
            final = float(final)
        except (TypeError, ValueError):
            self.emit(
                EV_STATE_CHANGED,
                {"id": trial.id, "state": "failed", "error": "evaluator returned no value"},
            )
            return
        if not math.isfinite(final):
            self.emit(
                EV_STATE_CHANGED,
                {"id": trial.id, "state": "failed", "error": "non-finite final value"},
            )
            return
        self.emit(
            EV_STATE_CHANGED,
            {"id": trial.id, "state": "complete", "final_value": final},
        )

    def drive(
        self,
        work: Iterator[tuple[TrialRecord, bool]],
        stop: Callable[[], bool] | None = None,
    ) -> bool:
        """Run trials from ``work``; returns True when stopped early."""
        if self.concurrency == 1:
            for trial, fresh in work:
                self.execute_trial(trial, fresh)
                if stop is not None and stop():
                    return True
            return False
        stopped = False
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            futures: set = set()
            for trial, fresh in work:
                while len(futures) >= self.concurrency:
                    done, futures = wait(futures, return_when=FIRST_COMPLETED)
                    for f in done:
                        f.result()
                    if stop is not None and stop():
                        stopped = True
                        break
                if stopped:
                    break
                futures.add(pool.submit(self.execute_trial, trial, fresh))
            done, _ = wait(futures)
            for f in done:
                f.result()
        if not stopped and stop is not None and stop():
            stopped = True
        return stopped


def _sampler_rng(study_seed: int, trial_id: int) -> np.random.Generator:
    return np.random.default_rng([study_seed, _SAMPLER_STREAM, trial_id])


def _study_dir(journal: StudyJournal) -> Path:
    return journal.path.parent


def _write_results(state: StudyState, path: Path | None) -> None:
    if path is None:
        return
    from . import results

    columns, rows = results.flatten_study(state)
    results.export_csv(rows, path, columns=columns)


def _start_study(
    journal: StudyJournal,
    state: StudyState,
    *,
    study_id: str,
    mode: str,
    direction: str,
    seed: int,
    space: PipelineSpace,
    evaluator: Evaluator,
    sampler: Any = None,
    pruner: Any = None,
    budget: int | None = None,
    repeats: int | None = None,
    grid_points: int | None = None,
    config_fingerprint: str | None = None,
    config_text: str | None = None,
) -> None:
    if not journal.is_fresh:
        raise StudyError(
            f"{journal.path} already contains events; use resume to continue the study"
        )
    payload: dict[str, Any] = {
        "ts": time.time(),
        "study_id": study_id,
        "mode": mode,
        "direction": direction,
        "seed": seed,
        "space": serialize_space(space),
        "space_fingerprint": space_fingerprint(space),
        "metric": getattr(evaluator, "metric_name", "value"),
    }
    if budget is not None:
        payload["budget"] = budget
    if repeats is not None:
        payload["repeats"] = repeats
    if grid_points is not None:
        payload["grid_points"] = grid_points
    if sampler is not None and hasattr(sampler, "describe"):
        payload["sampler"] = sampler.describe()
    if pruner is not None and hasattr(pruner, "describe"):
        payload["pruner"] = pruner.describe()
    if config_fingerprint is not None:
        payload["config_fingerprint"] = config_fingerprint
    if config_text is not None:
        payload["config_text"] = config_text
    seq = journal.append(EV_STUDY_STARTED, payload)
    state.apply({"seq": seq, "event": EV_STUDY_STARTED, **payload})


def _validated(space: PipelineSpace) -> None:
    report = validate_space(space)
    if not report.ok:
        raise StudyError(f"invalid space: {report}")


def _benchmark_plan(
    grid: Sequence[Configuration], repeats: int, seed: int
) -> list[tuple[Configuration, int]]:
    return [
        (config, seed + r) for config in grid for r in range(repeats)
    ]


def _benchmark_summary(state: StudyState, grid: Sequence[Configuration], aborted: bool) -> BenchmarkSummary:
    by_config: dict[Configuration, list[TrialRecord]] = {c: [] for c in grid}
    for trial in state.trials.values():
        by_config.setdefault(trial.config, []).append(trial)
    stats = []
    for config in grid:
        trials = by_config.get(config, [])
        values = [t.final_value for t in trials if t.state == "complete"]
        n_failed = sum(1 for t in trials if t.state == "failed")
        mean = float(np.mean(values)) if values else None
        # identical repeats have exactly zero spread; avoid mean-subtraction dust
        if not values:
            std = None
        elif min(values) == max(values):
            std = 0.0
        else:
            std = float(np.std(values))
        stats.append(
            ConfigStats(
                config=config,
                n_complete=len(values),
                n_failed=n_failed,
                mean=mean,
                std=std,
            )
        )
    return BenchmarkSummary(stats=tuple(stats), aborted=aborted)


def _run_benchmark_plan(
    runner: _Runner,
    plan: Sequence[tuple[Configuration, int]],
    max_failure_rate: float,
) -> bool:
    """Execute outstanding plan entries; returns True when aborted."""

    def outstanding() -> Iterator[tuple[TrialRecord, bool]]:
        for trial_id, (config, seed) in enumerate(plan):
            with runner.lock:
                existing = runner.state.trials.get(trial_id)
                if existing is not None and existing.state in TERMINAL_STATES:
                    continue
                if existing is not None and existing.config != config:
                    raise JournalMismatchError(
                        f"trial {trial_id}: journaled configuration differs from the plan"
                    )
                if existing is None:
                    trial = runner.create_trial(trial_id, config, seed)
                    fresh = True
                else:
                    trial = existing
                    fresh = existing.state == "created"
            yield trial, fresh

    def failure_abort() -> bool:
        counts = runner.state.counts()
        finished = counts["complete"] + counts["failed"]
        if finished < 5 and finished < len(plan):
            return False
        return finished > 0 and counts["failed"] / finished > max_failure_rate

    return runner.drive(outstanding(), stop=failure_abort)


def run_benchmark(
    space: PipelineSpace,
    evaluator: Evaluator,
    numeric_grid_points: int,
    repeats: int,
    journal: StudyJournal,
    *,
    direction: str = "minimize",
    seed: int = 0,
    cache: CacheAccessor | None = None,
    concurrency: int = 1,
    max_failure_rate: float = 0.5,
    study_id: str | None = None,
    grid_cap: int = DEFAULT_GRID_CAP,
    config_fingerprint: str | None = None,
    config_text: str | None = None,
    write_results: bool = True,
) -> BenchmarkSummary:
    """Evaluate every grid configuration ``repeats`` times; never prunes.

    Per-repeat seeds are ``seed + r``, paired across configurations. A
    failure rate above ``max_failure_rate`` (once at least five trials have
    finished) aborts the study, preserving partial results.
    """
    _validated(space)
    if repeats < 1:
        raise StudyError("repeats must be >= 1")
    grid = enumerate_grid(space, numeric_grid_points, cap=grid_cap)
    state = StudyState()
    _start_study(
        journal,
        state,
        study_id=study_id or _study_dir(journal).name,
        mode="benchmark",
        direction=direction,
        seed=seed,
        space=space,
        evaluator=evaluator,
        repeats=repeats,
        grid_points=numeric_grid_points,
        config_fingerprint=config_fingerprint,
        config_text=config_text,
    )
    runner = _Runner(
        state=state,
        journal=journal,
        space=space,
        evaluator=evaluator,
        direction=direction,
        cache=cache,
        pruner=None,
        concurrency=concurrency,
        prune_enabled=False,
    )
    aborted = _run_benchmark_plan(runner, _benchmark_plan(grid, repeats, seed), max_failure_rate)
    reason = "failure rate exceeded" if aborted else None
    payload = {"ts": time.time(), "status": "aborted" if aborted else "complete"}
    if reason:
        payload["reason"] = reason
    seq = journal.append(EV_STUDY_FINISHED, payload)
    state.apply({"seq": seq, "event": EV_STUDY_FINISHED, **payload})
    if write_results:
        _write_results(state, _study_dir(journal) / RESULTS_NAME)
    return _benchmark_summary(state, grid, aborted)


def best_result(state: StudyState, direction: str) -> StudyResult:
    """Argbest over complete trials; falls back to intermediates, flagged."""
    sign = 1.0 if direction == "minimize" else -1.0
    complete = [t for t in state.trials.values() if t.state == "complete"]
    if complete:
        best = min(complete, key=lambda t: (sign * t.final_value, t.id))
        return StudyResult(
            config=best.config, value=best.final_value, trial_id=best.id, degraded=False
        )
    with_points = [t for t in state.trials.values() if t.points]
    if not with_points:
        raise StudyError("study produced no values")
    best = min(with_points, key=lambda t: (sign * t.last_value, t.id))
    return StudyResult(
        config=best.config, value=best.last_value, trial_id=best.id, degraded=True
    )


def _run_optimize_plan(
    runner: _Runner,
    sampler: Any,
    budget: int,
    seed: int,
) -> None:
    def work() -> Iterator[tuple[TrialRecord, bool]]:
        # Restart trials that were running when a previous process died.
        for tid in sorted(runner.state.trials):
            trial = runner.state.trials[tid]
            if trial.state == "running":
                yield trial, False
            elif trial.state == "created":
                yield trial, True
        while True:
            with runner.lock:
                next_id = (max(runner.state.trials) + 1) if runner.state.trials else 0
                if next_id >= budget:
                    return
                history = runner.state.history(runner.direction)
                config = sampler.sample(
                    runner.space, history, _sampler_rng(seed, next_id), trial_id=next_id
                )
                trial = runner.create_trial(next_id, config, seed + next_id)
            yield trial, True

    runner.drive(work())


def run_optimize(
    space: PipelineSpace,
    evaluator: Evaluator,
    sampler: Any,
    pruner: Any,
    budget: int,
    direction: str,
    journal: StudyJournal,
    *,
    seed: int = 0,
    cache: CacheAccessor | None = None,
    concurrency: int = 1,
    study_id: str | None = None,
    config_fingerprint: str | None = None,
    config_text: str | None = None,
    write_results: bool = True,
) -> StudyResult:
    """Budgeted guided search: sample, evaluate, prune, persist, repeat.

    Trial seeds are ``seed + trial_id``; sampler draws come from a seed
    stream keyed by (study seed, trial id), so a resumed study continues the
    exact stream an uninterrupted run would have used.
    """
    _validated(space)
    if budget < 1:
        raise StudyError("budget must be >= 1")
    if direction not in ("minimize", "maximize"):
        raise StudyError(f"unknown direction {direction!r}")
    state = StudyState()
    _start_study(
        journal,
        state,
        study_id=study_id or _study_dir(journal).name,
        mode="optimize",
        direction=direction,
        seed=seed,
        space=space,
        evaluator=evaluator,
        sampler=sampler,
        pruner=pruner,
        budget=budget,
        config_fingerprint=config_fingerprint,
        config_text=config_text,
    )
    runner = _Runner(
        state=state,
        journal=journal,
        space=space,
        evaluator=evaluator,
        direction=direction,
        cache=cache,
        pruner=pruner,
        concurrency=concurrency,
        prune_enabled=True,
    )
    _run_optimize_plan(runner, sampler, budget, seed)
    result = best_result(state, direction)
    payload = {"ts": time.time(), "status": "complete", "best_trial": result.trial_id}
    seq = journal.append(EV_STUDY_FINISHED, payload)
    state.apply({"seq": seq, "event": EV_STUDY_FINISHED, **payload})
    if write_results:
        _write_results(state, _study_dir(journal) / RESULTS_NAME)
    return result


def locate_journal(study_path: str | Path) -> Path:
    path = Path(study_path)
    if path.is_dir():
        path = path / JOURNAL_NAME
    if not path.exists():
        raise StudyError(f"no journal at {path}")
    return path


def resume(
    study_path: str | Path,
    space: PipelineSpace,
    evaluator: Evaluator,
    *,
    sampler: Any = None,
    pruner: Any = None,
    cache: CacheAccessor | None = None,
    budget: int | None = None,
    concurrency: int = 1,
    max_failure_rate: float = 0.5,
    fsync: bool = True,
    write_results: bool = True,
) -> BenchmarkSummary | StudyResult:
    """Continue an interrupted study from its journal.

    Terminal trials are kept as-is; trials that were running restart from
    scratch with their original id, seed, and configuration. Refuses to run
    when the supplied space does not match the journal's fingerprint.
    """
    journal_path = locate_journal(study_path)
    state = build_state(replay_journal(journal_path))
    if state.meta is None:
        raise StudyError(f"{journal_path}: journal has no study header")
    meta = state.meta
    fingerprint = space_fingerprint(space)
    if fingerprint != meta.space_fingerprint:
        raise JournalMismatchError(
            "refusing to resume: space fingerprint "
            f"{fingerprint[:12]} differs from journal's {meta.space_fingerprint[:12]}"
        )
    journal = StudyJournal(journal_path, fsync=fsync)
    runner = _Runner(
        state=state,
        journal=journal,
        space=space,
        evaluator=evaluator,
        direction=meta.direction,
        cache=cache,
        pruner=pruner,
        concurrency=concurrency,
        prune_enabled=meta.mode == "optimize",
    )
    if meta.mode == "benchmark":
        grid = enumerate_grid(space, meta.grid_points, cap=10**18)
        plan = _benchmark_plan(grid, meta.repeats, meta.seed)
        aborted = _run_benchmark_plan(runner, plan, max_failure_rate)
        payload = {"ts": time.time(), "status": "aborted" if aborted else "complete"}
        seq = journal.append(EV_STUDY_FINISHED, payload)
        state.apply({"seq": seq, "event": EV_STUDY_FINISHED, **payload})
        if write_results:
            _write_results(state, journal_path.parent / RESULTS_NAME)
        return _benchmark_summary(state, grid, aborted)

    if sampler is None:
        raise StudyError("resuming an optimize study requires a sampler")
    total_budget = budget if budget is not None else meta.budget
    if total_budget is None:
        raise StudyError("journal does not record a budget and none was given")
    _run_optimize_plan(runner, sampler, total_budget, meta.seed)
    result = best_result(state, meta.direction)
    payload = {"ts": time.time(), "status": "complete", "best_trial": result.trial_id}
    seq = journal.append(EV_STUDY_FINISHED, payload)
    state.apply({"seq": seq, "event": EV_STUDY_FINISHED, **payload})
    if write_results:
        _write_results(state, journal_path.parent / RESULTS_NAME)
    return result


def load_state(study_path: str | Path) -> StudyState:
    """Replay a study directory's journal into a state snapshot."""
    return build_state(replay_journal(locate_journal(study_path)))
