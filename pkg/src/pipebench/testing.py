"""Deterministic test doubles and space fuzzing helpers.

The analytic evaluator satisfies the evaluation contract with a pure
function of the configuration (the seed is ignored), which makes repeat
determinism and resume golden-file checks exact.
"""

from __future__ import annotations

import numpy as np

from .contract import CacheAccessor, ReportFn
from .space import (
    STAGES,
    Condition,
    Configuration,
    ParamSpec,
    PipelineSpace,
    Value,
)


class AnalyticEvaluator:
    """Separable quadratic objective over the configuration.

    Numeric parameters contribute their squared normalized distance to a
    target (default: the domain midpoint, geometric for log-scale);
    categorical parameters contribute ``index / len(choices)`` relative to a
    target choice (default: the first). Reports a curve converging to the
    final value over ``epochs`` steps.
    """

    metric_name = "value"

    def __init__(
        self,
        space: PipelineSpace,
        targets: dict[str, Value] | None = None,
        epochs: int = 5,
        fail_on: frozenset[str] = frozenset(),
    ):
        self.space = space
        self.targets = targets or {}
        self.epochs = epochs
        self.fail_on = fail_on

    def _target(self, name: str) -> Value | None:
        if name in self.targets:
            return self.targets[name]
        param = self.space.param(name)
        if param.kind == "categorical":
            return (param.choices or (None,))[0]
        if param.kind == "continuous-log":
            return float(np.sqrt(param.low * param.high))
        if param.kind == "integer":
            return int((param.low + param.high) // 2)
        return (param.low + param.high) / 2.0

    def value(self, config: Configuration) -> float:
        total = 0.0
        for name, value in config.items:
            param = self.space.param(name)
            target = self._target(name)
            if param.kind == "categorical":
                choices = list(param.choices or ())
                total += abs(choices.index(value) - choices.index(target)) / len(choices)
            elif param.kind == "continuous-log":
                span = np.log(param.high) - np.log(param.low)
                total += float((np.log(value) - np.log(target)) / span) ** 2
            else:
                span = param.high - param.low
                total += ((float(value) - float(target)) / span) ** 2
        return total

    def __call__(
        self,
        config: Configuration,
        seed: int,
        report: ReportFn,
        cache: CacheAccessor | None = None,
    ) -> float:
        from .contract import EvaluationError

        for name, value in config.items:
            if f"{name}={value}" in self.fail_on:
                raise EvaluationError(f"planted failure on {name}={value}")
        final = self.value(config)
        for epoch in range(1, self.epochs + 1):
            current = final + (self.epochs - epoch) / self.epochs
            if report(epoch, current):
                return current
        return final


class FailingEvaluator:
    """Always raises; exercises failure-rate abort paths."""

    metric_name = "value"

    def __call__(self, config, seed, report, cache=None) -> float:
        from .contract import EvaluationError

        raise EvaluationError("planted failure")


def single_choice(name: str, stage: str, choice: str) -> ParamSpec:
    return ParamSpec(name=name, stage=stage, kind="categorical", choices=(choice,))


def minimal_space(name: str = "minimal") -> PipelineSpace:
    """Smallest valid five-stage space: one fixed choice per stage."""
    return PipelineSpace(
        name=name,
        params=tuple(
            single_choice(f"{stage}_choice", stage, "only") for stage in STAGES
        ),
    )


def random_space(rng: np.random.Generator, name: str = "fuzzed") -> PipelineSpace:
    """Random valid space with conditional children, for fuzz tests.

    Every stage gets at least one parameter; some categorical parameters
    grow conditional children activated by a strict subset of their choices.
    """
    params: list[ParamSpec] = []
    categorical_pool: list[ParamSpec] = []
    for stage in STAGES:
        n_params = int(rng.integers(1, 3))
        for i in range(n_params):
            pname = f"{stage[:4]}_{i}"
            kind = rng.choice(["categorical", "continuous-linear", "continuous-log", "integer"])
            if kind == "categorical" or not params:
                n_choices = int(rng.integers(2, 5))
                spec = ParamSpec(
                    name=pname,
                    stage=stage,
                    kind="categorical",
                    choices=tuple(f"c{j}" for j in range(n_choices)),
                )
                categorical_pool.append(spec)
            elif kind == "integer":
                low = int(rng.integers(0, 5))
                spec = ParamSpec(
                    name=pname, stage=stage, kind="integer",
                    low=low, high=low + int(rng.integers(2, 20)),
                )
            elif kind == "continuous-log":
                low = float(10 ** rng.uniform(-5, 0))
                spec = ParamSpec(
                    name=pname, stage=stage, kind="continuous-log",
                    low=low, high=low * float(10 ** rng.uniform(1, 3)),
                )
            else:
                low = float(rng.uniform(-5, 5))
                spec = ParamSpec(
                    name=pname, stage=stage, kind="continuous-linear",
                    low=low, high=low + float(rng.uniform(0.5, 10)),
                )
            params.append(spec)

    conditional: list[ParamSpec] = []
    for parent in categorical_pool:
        if rng.random() < 0.5 and len(parent.choices) >= 2:
            n_active = int(rng.integers(1, len(parent.choices)))
            active = tuple(sorted(rng.choice(parent.choices, size=n_active, replace=False)))
            kind = rng.choice(["categorical", "integer"])
            cname = f"{parent.name}_child"
            if kind == "categorical":
                child = ParamSpec(
                    name=cname,
                    stage=parent.stage,
                    kind="categorical",
                    choices=tuple(f"k{j}" for j in range(int(rng.integers(2, 4)))),
                    condition=Condition(parent=parent.name, values=active),
                )
            else:
                child = ParamSpec(
                    name=cname, stage=parent.stage, kind="integer",
                    low=0, high=int(rng.integers(2, 6)),
                    condition=Condition(parent=parent.name, values=active),
                )
            conditional.append(child)
    return PipelineSpace(name=name, params=tuple(params + conditional))
