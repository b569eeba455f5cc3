"""Shared spaces, evaluators, and small run helpers."""

from __future__ import annotations

import numpy as np
import pytest

from pipebench.journal import StudyJournal
from pipebench.mil import MILEvaluator, PipelineEffect, SyntheticGenSpec
from pipebench.space import Condition, ParamSpec, PipelineSpace


def cat(name, stage, *choices, parent=None, values=()):
    cond = Condition(parent=parent, values=tuple(values)) if parent else None
    return ParamSpec(
        name=name, stage=stage, kind="categorical", choices=tuple(choices), condition=cond
    )


def analytic_space() -> PipelineSpace:
    """Five-stage space with a conditional branch, for fast analytic runs."""
    return PipelineSpace(
        name="analytic",
        params=(
            cat("tile", "tiling", "t1", "t2"),
            cat("norm", "normalization", "plain"),
            cat("feat", "feature_extractor", "f1", "f2", "f3"),
            cat("agg", "aggregator", "A", "B"),
            ParamSpec(
                name="heads", stage="aggregator", kind="integer", low=1, high=2,
                condition=Condition(parent="agg", values=("B",)),
            ),
            ParamSpec(name="x", stage="training", kind="continuous-linear", low=0.0, high=1.0),
        ),
    )


def planted_space(tiles=("256", "512"), lr_low=0.05, lr_high=1.0) -> PipelineSpace:
    """The synthetic evaluator's search space with the planted optimum."""
    return PipelineSpace(
        name="planted",
        params=(
            ParamSpec(name="tile_size", stage="tiling", kind="categorical", choices=tuple(tiles)),
            ParamSpec(name="normalization", stage="normalization", kind="categorical",
                      choices=("none", "A", "B")),
            ParamSpec(name="feature_extractor", stage="feature_extractor", kind="categorical",
                      choices=("weak", "medium", "strong")),
            ParamSpec(name="aggregator", stage="aggregator", kind="categorical",
                      choices=("mean", "max", "attention")),
            ParamSpec(name="lr", stage="training", kind="continuous-log",
                      low=lr_low, high=lr_high),
        ),
    )


def make_mil_evaluator(space, *, data_seed=0, n_train=64, n_val=96, epochs=27, **kwargs):
    gen = SyntheticGenSpec(seed=data_seed, n_train=n_train, n_val=n_val)
    return MILEvaluator(space, gen, PipelineEffect(), default_epochs=epochs, **kwargs)


def fresh_journal(tmp_path, name="study", fsync=False) -> StudyJournal:
    study_dir = tmp_path / name
    study_dir.mkdir(parents=True, exist_ok=True)
    return StudyJournal(study_dir / "journal.ndjson", fsync=fsync)


class SimulatedKill(BaseException):
    """Stand-in for a hard process kill; must escape trial failure handling."""


class KillingEvaluator:
    """Wraps an evaluator and dies mid-report on the n-th evaluate call."""

    def __init__(self, inner, kill_on_call: int, kill_at_step: int = 2):
        self.inner = inner
        self.kill_on_call = kill_on_call
        self.kill_at_step = kill_at_step
        self.calls = 0
        self.metric_name = getattr(inner, "metric_name", "value")

    def __call__(self, config, seed, report, cache=None):
        self.calls += 1
        lethal = self.calls == self.kill_on_call

        def wrapped(step, value):
            if lethal and step == self.kill_at_step:
                raise SimulatedKill()
            return report(step, value)

        return self.inner(config, seed, wrapped, cache)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
