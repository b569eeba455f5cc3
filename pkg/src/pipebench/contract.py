"""The evaluation contract between the study engine and evaluators.

An evaluator is a callable ``(config, seed, report, cache) -> float`` that:

* calls ``report(step, value)`` once per budget unit (here: training epoch,
  1-based) with its current validation metric,
* stops promptly when ``report`` returns True (the prune signal) — whatever
  it returns afterwards is ignored and the trial is recorded as pruned,
* returns its final metric on completion, and
* may use ``cache.get_or_compute(key, producer) -> (artifact, hit)`` to
  reuse expensive stage artifacts across trials.

Raising :class:`EvaluationError` marks the trial as failed without stopping
the study.
"""

from __future__ import annotations

from typing import Any, Callable, Protocol

from .cache import ArtifactKey
from .space import Configuration

ReportFn = Callable[[int, float], bool]


class EvaluationError(RuntimeError):
    """A trial-level failure; the study records it and continues."""


class CacheAccessor(Protocol):
    def get_or_compute(
        self, key: ArtifactKey, producer: Callable[[], Any]
    ) -> tuple[Any, bool]: ...


class Evaluator(Protocol):
    def __call__(
        self,
        config: Configuration,
        seed: int,
        report: ReportFn,
        cache: CacheAccessor,
    ) -> float: ...
