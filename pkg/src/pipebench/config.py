"""Strict study configuration files.

One YAML file declares an entire run: mode, space, sampler, pruner,
evaluator, budget, and execution knobs. Parsing is strict — unknown keys are
fatal and name the nearest valid key — because a silently ignored typo in a
sweep definition is the classic way to benchmark the wrong thing.
"""

from __future__ import annotations

import difflib
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .mil import MILEvaluator, PipelineEffect, SyntheticGenSpec
from .pruners import HyperbandPruner, MedianPruner, NoPruner
from .samplers import GridSampler, RandomSampler, TPEParams, TPESampler
from .space import Condition, ParamSpec, PipelineSpace, validate_space
from .testing import AnalyticEvaluator

MODES = ("benchmark", "optimize")
DIRECTIONS = ("minimize", "maximize")

TOP_KEYS = {
    "mode",
    "study",
    "output_dir",
    "seed",
    "direction",
    "budget",
    "repeats",
    "grid_points",
    "concurrency",
    "max_failure_rate",
    "space",
    "sampler",
    "pruner",
    "evaluator",
    "cache",
}
SPACE_KEYS = {"name", "params"}
PARAM_KEYS = {"name", "stage", "kind", "low", "high", "choices", "condition"}
CONDITION_KEYS = {"parent", "values"}
SAMPLER_KEYS = {
    "type",
    "n_startup",
    "gamma_fraction",
    "n_candidates",
    "bandwidth_floor",
    "grid_points",
}
PRUNER_KEYS = {"type", "warmup_trials", "warmup_steps", "r_min", "R", "eta"}
EVALUATOR_KEYS = {
    "type",
    "d",
    "d_sig",
    "witness_rate",
    "base_noise",
    "n_train",
    "n_val",
    "data_seed",
    "lr",
    "epochs",
    "weight_decay",
    "attention_hidden",
    "task",
    "n_models",
    "persist",
    "effect",
    "targets",
}
EFFECT_KEYS = {"instance_budget", "noise_multipliers", "signal_amplitudes"}
CACHE_KEYS = {"enabled", "shared_root"}


class ConfigError(ValueError):
    pass


def _check_keys(section: Mapping[str, Any], allowed: set[str], where: str) -> None:
    for key in section:
        if key not in allowed:
            hints = difflib.get_close_matches(str(key), sorted(allowed), n=1)
            hint = f" (did you mean {hints[0]!r}?)" if hints else ""
            raise ConfigError(f"unknown key {key!r} in {where}{hint}")


def _require(section: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in section or section[key] is None:
        raise ConfigError(f"missing required key {key!r} in {where}")
    return section[key]


def _as_int(value: Any, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where} must be >= {minimum}, got {value}")
    return value


def _as_real(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def build_space(block: Mapping[str, Any]) -> PipelineSpace:
    _check_keys(block, SPACE_KEYS, "space")
    raw_params = _require(block, "params", "space")
    if not isinstance(raw_params, list) or not raw_params:
        raise ConfigError("space.params must be a non-empty list")
    params = []
    for i, entry in enumerate(raw_params):
        where = f"space.params[{i}]"
        if not isinstance(entry, Mapping):
            raise ConfigError(f"{where} must be a mapping")
        _check_keys(entry, PARAM_KEYS, where)
        name = str(_require(entry, "name", where))
        kind = str(_require(entry, "kind", where))
        stage = str(_require(entry, "stage", where))
        condition = None
        if entry.get("condition") is not None:
            cond = entry["condition"]
            if not isinstance(cond, Mapping):
                raise ConfigError(f"{where}.condition must be a mapping")
            _check_keys(cond, CONDITION_KEYS, f"{where}.condition")
            values = _require(cond, "values", f"{where}.condition")
            if not isinstance(values, list) or not values:
                raise ConfigError(f"{where}.condition.values must be a non-empty list")
            condition = Condition(
                parent=str(_require(cond, "parent", f"{where}.condition")),
                values=tuple(str(v) for v in values),
            )
        choices = entry.get("choices")
        if choices is not None:
            if not isinstance(choices, list):
                raise ConfigError(f"{where}.choices must be a list")
            choices = tuple(str(c) for c in choices)
        low = entry.get("low")
        high = entry.get("high")
        params.append(
            ParamSpec(
                name=name,
                stage=stage,
                kind=kind,
                low=_as_real(low, f"{where}.low") if low is not None else None,
                high=_as_real(high, f"{where}.high") if high is not None else None,
                choices=choices,
                condition=condition,
            )
        )
    return PipelineSpace(name=str(block.get("name", "space")), params=tuple(params))


def build_sampler(block: Mapping[str, Any] | None, default_grid_points: int):
    block = block or {"type": "random"}
    _check_keys(block, SAMPLER_KEYS, "sampler")
    kind = str(block.get("type", "random"))
    if kind == "random":
        return RandomSampler()
    if kind == "tpe":
        return TPESampler(
            TPEParams(
                n_startup=_as_int(block.get("n_startup", 10), "sampler.n_startup", 1),
                gamma_fraction=_as_real(block.get("gamma_fraction", 0.25), "sampler.gamma_fraction"),
                n_candidates=_as_int(block.get("n_candidates", 24), "sampler.n_candidates", 1),
                bandwidth_floor=_as_real(
                    block.get("bandwidth_floor", 1e-3), "sampler.bandwidth_floor"
                ),
            )
        )
    if kind == "grid":
        return GridSampler(
            numeric_grid_points=_as_int(
                block.get("grid_points", default_grid_points), "sampler.grid_points", 1
            )
        )
    raise ConfigError(f"unknown sampler type {kind!r} (expected random, tpe, or grid)")


def build_pruner(block: Mapping[str, Any] | None):
    block = block or {"type": "none"}
    _check_keys(block, PRUNER_KEYS, "pruner")
    kind = str(block.get("type", "none"))
    if kind == "none":
        return NoPruner()
    warmup_trials = _as_int(block.get("warmup_trials", 5), "pruner.warmup_trials", 0)
    warmup_steps = _as_int(block.get("warmup_steps", 1), "pruner.warmup_steps", 0)
    if kind == "median":
        return MedianPruner(warmup_trials=warmup_trials, warmup_steps=warmup_steps)
    if kind == "hyperband":
        return HyperbandPruner(
            r_min=_as_int(block.get("r_min", 1), "pruner.r_min", 1),
            R=_as_int(block.get("R", 27), "pruner.R", 1),
            eta=_as_int(block.get("eta", 3), "pruner.eta", 2),
            warmup_trials=warmup_trials,
            warmup_steps=warmup_steps,
        )
    raise ConfigError(f"unknown pruner type {kind!r} (expected none, median, or hyperband)")


@dataclass(frozen=True)
class EvaluatorSettings:
    kind: str
    gen: SyntheticGenSpec | None
    effect: PipelineEffect | None
    lr: float
    epochs: int
    weight_decay: float
    attention_hidden: int
    task: str
    n_models: int
    persist: bool
    targets: dict[str, Any]


def build_evaluator_settings(
    block: Mapping[str, Any] | None, study_seed: int
) -> EvaluatorSettings:
    block = block or {"type": "synthetic"}
    _check_keys(block, EVALUATOR_KEYS, "evaluator")
    kind = str(block.get("type", "synthetic"))
    if kind not in ("synthetic", "analytic"):
        raise ConfigError(f"unknown evaluator type {kind!r} (expected synthetic or analytic)")
    effect = None
    gen = None
    if kind == "synthetic":
        raw_effect = block.get("effect") or {}
        _check_keys(raw_effect, EFFECT_KEYS, "evaluator.effect")
        effect = PipelineEffect(
            instance_budget=_as_int(
                raw_effect.get("instance_budget", 4096), "evaluator.effect.instance_budget", 1
            ),
            noise_multipliers={
                str(k): _as_real(v, "noise multiplier")
                for k, v in (raw_effect.get("noise_multipliers")
                             or PipelineEffect().noise_multipliers).items()
            },
            signal_amplitudes={
                str(k): _as_real(v, "signal amplitude")
                for k, v in (raw_effect.get("signal_amplitudes")
                             or PipelineEffect().signal_amplitudes).items()
            },
        )
        gen = SyntheticGenSpec(
            d=_as_int(block.get("d", 16), "evaluator.d", 1),
            d_sig=_as_int(block.get("d_sig", 4), "evaluator.d_sig", 1),
            witness_rate=_as_real(block.get("witness_rate", 0.1), "evaluator.witness_rate"),
            base_noise=_as_real(block.get("base_noise", 1.5), "evaluator.base_noise"),
            n_train=_as_int(block.get("n_train", 64), "evaluator.n_train", 2),
            n_val=_as_int(block.get("n_val", 96), "evaluator.n_val", 2),
            seed=_as_int(block.get("data_seed", study_seed), "evaluator.data_seed", 0),
        )
    return EvaluatorSettings(
        kind=kind,
        gen=gen,
        effect=effect,
        lr=_as_real(block.get("lr", 0.5), "evaluator.lr"),
        epochs=_as_int(block.get("epochs", 27), "evaluator.epochs", 1),
        weight_decay=_as_real(block.get("weight_decay", 0.0), "evaluator.weight_decay"),
        attention_hidden=_as_int(block.get("attention_hidden", 8), "evaluator.attention_hidden", 1),
        task=str(block.get("task", "classification")),
        n_models=_as_int(block.get("n_models", 1), "evaluator.n_models", 1),
        persist=bool(block.get("persist", True)),
        targets=dict(block.get("targets") or {}),
    )


@dataclass(frozen=True)
class StudySettings:
    """Validated contents of one configuration file."""

    mode: str
    study: str
    output_dir: str
    seed: int
    direction: str
    concurrency: int
    budget: int | None
    repeats: int
    grid_points: int
    max_failure_rate: float
    space: PipelineSpace
    sampler: Any
    pruner: Any
    evaluator: EvaluatorSettings
    cache_enabled: bool
    cache_root: str | None
    fingerprint: str
    text: str


def config_fingerprint(data: Mapping[str, Any]) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_config(text: str) -> StudySettings:
    """Parse and validate a configuration document (strict keys, valid space)."""
    data = yaml.safe_load(text)
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a mapping")
    _check_keys(data, TOP_KEYS, "configuration")

    mode = str(_require(data, "mode", "configuration"))
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    direction = str(data.get("direction", "minimize"))
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")

    space = build_space(_require(data, "space", "configuration"))
    report = validate_space(space)
    if not report.ok:
        raise ConfigError(f"invalid space: {report}")

    seed = _as_int(data.get("seed", 0), "seed", 0)
    grid_points = _as_int(data.get("grid_points", 3), "grid_points", 1)
    repeats = _as_int(data.get("repeats", 1), "repeats", 1)
    budget = data.get("budget")
    if mode == "optimize":
        budget = _as_int(_require(data, "budget", "configuration"), "budget", 1)
    elif budget is not None:
        raise ConfigError("budget applies only to optimize mode")

    pruner = build_pruner(data.get("pruner"))
    if mode == "benchmark" and not isinstance(pruner, NoPruner):
        raise ConfigError("benchmark mode never prunes; remove the pruner section")

    raw_cache = data.get("cache") or {}
    _check_keys(raw_cache, CACHE_KEYS, "cache")

    output_dir = _require(data, "output_dir", "configuration")
    study = str(data.get("study") or Path(str(output_dir)).name)

    max_failure_rate = _as_real(data.get("max_failure_rate", 0.5), "max_failure_rate")
    if not 0.0 < max_failure_rate <= 1.0:
        raise ConfigError(f"max_failure_rate must be in (0, 1], got {max_failure_rate}")

    return StudySettings(
        mode=mode,
        study=study,
        output_dir=str(output_dir),
        seed=seed,
        direction=direction,
        concurrency=_as_int(data.get("concurrency", 1), "concurrency", 1),
        budget=budget,
        repeats=repeats,
        grid_points=grid_points,
        max_failure_rate=max_failure_rate,
        space=space,
        sampler=build_sampler(data.get("sampler"), grid_points),
        pruner=pruner,
        evaluator=build_evaluator_settings(data.get("evaluator"), seed),
        cache_enabled=bool(raw_cache.get("enabled", True)),
        cache_root=str(raw_cache["shared_root"]) if raw_cache.get("shared_root") else None,
        fingerprint=config_fingerprint(data),
        text=text,
    )


def make_evaluator(settings: StudySettings, persist_dir: str | Path | None = None):
    ev = settings.evaluator
    if ev.kind == "analytic":
        return AnalyticEvaluator(settings.space, targets=ev.targets or None, epochs=ev.epochs)
    return MILEvaluator(
        settings.space,
        ev.gen,
        ev.effect,
        default_lr=ev.lr,
        default_epochs=ev.epochs,
        default_weight_decay=ev.weight_decay,
        default_hidden=ev.attention_hidden,
        task=ev.task,
        n_models=ev.n_models,
        persist_dir=persist_dir if ev.persist else None,
    )
