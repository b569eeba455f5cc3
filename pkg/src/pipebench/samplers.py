"""Configuration proposal strategies for optimization mode.

Two families: uniform random search, and a tree-structured Parzen estimator
that walks the condition forest, fits good/bad densities per active parameter,
and proposes the candidate with the best density ratio. Both are pure
functions of (space, history snapshot, seed stream), so the study engine can
call them under a mutex and replay them deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .space import (
    Configuration,
    ParamSpec,
    PipelineSpace,
    SpaceError,
    Value,
    is_active,
    sampling_order,
)


class SpaceMismatchError(SpaceError):
    """History entries belong to a different space than the one being sampled."""


@dataclass(frozen=True)
class HistoryEntry:
    config: Configuration
    value: float | None
    state: str  # "complete" | "pruned"


@dataclass(frozen=True)
class ObservationHistory:
    """Terminal trials observed so far, in trial-id order."""

    direction: str = "minimize"
    entries: tuple[HistoryEntry, ...] = ()

    def __post_init__(self) -> None:
        if self.direction not in ("minimize", "maximize"):
            raise ValueError(f"unknown direction {self.direction!r}")
        for e in self.entries:
            if e.state == "complete" and (e.value is None or not math.isfinite(e.value)):
                raise ValueError("complete entries require a finite objective value")

    def completed(self) -> list[tuple[int, HistoryEntry]]:
        return [(i, e) for i, e in enumerate(self.entries) if e.state == "complete"]


def _draw_value(param: ParamSpec, rng: np.random.Generator) -> Value:
    if param.kind == "categorical":
        choices = param.choices or ()
        return choices[int(rng.integers(len(choices)))]
    low, high = float(param.low), float(param.high)
    if param.kind == "integer":
        return int(rng.integers(int(param.low), int(param.high) + 1))
    if param.kind == "continuous-log":
        return float(math.exp(rng.uniform(math.log(low), math.log(high))))
    return float(rng.uniform(low, high))


def sample_random(space: PipelineSpace, rng: np.random.Generator) -> Configuration:
    """Independent uniform draw per active parameter, parents before children."""
    assignment: dict[str, Value] = {}
    for param in sampling_order(space):
        if is_active(param, assignment):
            assignment[param.name] = _draw_value(param, rng)
    return Configuration.from_dict(space.name, assignment)


@dataclass(frozen=True)
class TPEParams:
    n_startup: int = 10
    gamma_fraction: float = 0.25
    n_candidates: int = 24
    bandwidth_floor: float = 1e-3


class NumericDensity:
    """Adaptive truncated Gaussian kernel mixture over one parameter.

    This is the adaptive Parzen estimator of the original TPE algorithm.
    Values are taken in the model domain (log-transformed for log-scale
    parameters). A domain-wide prior kernel (centered on the domain midpoint,
    bandwidth equal to the domain width) is always mixed in with the same
    weight as each observation; it is the numeric counterpart of the
    categorical add-one smoothing. Each observation kernel's bandwidth is its
    larger neighbor spacing, clipped to [width / min(100, 1 + k), width]
    (k = number of kernels) and floored by ``bandwidth_floor``. Spacing-based
    bandwidths matter on both sides of the good/bad ratio: a cluster of bad
    observations tightens its own kernels, carving a well into the ratio so
    the sampler can leave an over-exploited region.
    """

    def __init__(self, values: Sequence[float], low: float, high: float, bandwidth_floor: float):
        self.low = float(low)
        self.high = float(high)
        width = self.high - self.low
        prior_center = 0.5 * (self.low + self.high)
        observed = np.sort(np.asarray(values, dtype=float))
        prior_pos = int(np.searchsorted(observed, prior_center))
        centers = np.insert(observed, prior_pos, prior_center)
        k = centers.size
        if k == 1:
            bandwidths = np.array([width])
        else:
            left = np.diff(centers, prepend=centers[0])
            right = np.diff(centers, append=centers[-1])
            bandwidths = np.maximum(left, right)
        min_bw = max(float(bandwidth_floor), width / min(100.0, 1.0 + k))
        bandwidths = np.clip(bandwidths, min_bw, width)
        bandwidths[prior_pos] = width
        self.centers = centers
        self.bandwidths = bandwidths
        a = (self.low - self.centers) / self.bandwidths
        b = (self.high - self.centers) / self.bandwidths
        self._cdf_low = ndtr(a)
        self._mass = ndtr(b) - self._cdf_low

    def pdf(self, x: float) -> float:
        z = (x - self.centers) / self.bandwidths
        kernels = np.exp(-0.5 * z * z) / (self.bandwidths * math.sqrt(2.0 * math.pi))
        return float(np.mean(kernels / self._mass))

    def sample(self, rng: np.random.Generator) -> float:
        j = int(rng.integers(self.centers.size))
        u = rng.random()
        target = self._cdf_low[j] + u * self._mass[j]
        x = self.centers[j] + self.bandwidths[j] * float(ndtri(target))
        return float(min(max(x, self.low), self.high))


class CategoricalDensity:
    """Add-one smoothed frequency over the declared choices."""

    def __init__(self, observed: Sequence[str], choices: Sequence[str]):
        counts = np.array([1.0 + sum(1 for v in observed if v == c) for c in choices])
        self.probs = counts / counts.sum()

    def pdf(self, index: int) -> float:
        return float(self.probs[index])

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(self.probs), p=self.probs))


def _split_good_bad(
    history: ObservationHistory, gamma_fraction: float
) -> tuple[list[Configuration], list[Configuration]]:
    completed = history.completed()
    sign = 1.0 if history.direction == "minimize" else -1.0
    ranked = sorted(completed, key=lambda pair: (sign * pair[1].value, pair[0]))
    n_good = max(1, math.ceil(gamma_fraction * len(ranked)))
    good = [e.config for _, e in ranked[:n_good]]
    bad = [e.config for _, e in ranked[n_good:]]
    return good, bad


def _model_domain(param: ParamSpec) -> tuple[float, float]:
    if param.kind == "continuous-log":
        return math.log(float(param.low)), math.log(float(param.high))
    return float(param.low), float(param.high)


def _to_model(param: ParamSpec, value: Value) -> float:
    if param.kind == "continuous-log":
        return math.log(float(value))
    return float(value)


def _from_model(param: ParamSpec, x: float) -> Value:
    if param.kind == "continuous-log":
        value = math.exp(x)
    else:
        value = x
    value = min(max(value, float(param.low)), float(param.high))
    if param.kind == "integer":
        return int(np.rint(value))
    return float(value)


def _propose_numeric(
    param: ParamSpec,
    good: list[float],
    bad: list[float],
    params: TPEParams,
    rng: np.random.Generator,
) -> Value:
    low, high = _model_domain(param)
    l_density = NumericDensity(good, low, high, params.bandwidth_floor)
    g_density = NumericDensity(bad, low, high, params.bandwidth_floor)
    best_value: Value | None = None
    best_score = -math.inf
    for _ in range(params.n_candidates):
        x = l_density.sample(rng)
        value = _from_model(param, x)
        x_eval = _to_model(param, value)
        score = math.log(max(l_density.pdf(x_eval), 1e-300)) - math.log(
            max(g_density.pdf(x_eval), 1e-300)
        )
        if score > best_score:
            best_score = score
            best_value = value
    assert best_value is not None
    return best_value


def _propose_categorical(
    param: ParamSpec,
    good: list[str],
    bad: list[str],
    params: TPEParams,
    rng: np.random.Generator,
) -> str:
    choices = list(param.choices or ())
    l_density = CategoricalDensity(good, choices)
    g_density = CategoricalDensity(bad, choices)
    best_index = -1
    best_score = -math.inf
    for _ in range(params.n_candidates):
        idx = l_density.sample(rng)
        score = math.log(l_density.pdf(idx)) - math.log(g_density.pdf(idx))
        if score > best_score:
            best_score = score
            best_index = idx
    return choices[best_index]


def sample_tpe(
    space: PipelineSpace,
    history: ObservationHistory,
    params: TPEParams,
    rng: np.random.Generator,
) -> Configuration:
    """Tree-structured Parzen estimator proposal.

    Falls back to :func:`sample_random` until ``n_startup`` trials have
    completed. Pruned trials never enter the densities; conditional
    parameters fit densities only over history entries where they were
    active.
    """
    for entry in history.entries:
        if entry.config.space_name != space.name:
            raise SpaceMismatchError(
                f"space mismatch: history has {entry.config.space_name!r}, sampling {space.name!r}"
            )
    if len(history.completed()) < params.n_startup:
        return sample_random(space, rng)

    good_configs, bad_configs = _split_good_bad(history, params.gamma_fraction)
    assignment: dict[str, Value] = {}
    for param in sampling_order(space):
        if not is_active(param, assignment):
            continue
        good = [c[param.name] for c in good_configs if param.name in c]
        bad = [c[param.name] for c in bad_configs if param.name in c]
        if param.kind == "categorical":
            value: Value = _propose_categorical(param, good, bad, params, rng)
        else:
            value = _propose_numeric(
                param,
                [_to_model(param, v) for v in good],
                [_to_model(param, v) for v in bad],
                params,
                rng,
            )
        assignment[param.name] = value
    return Configuration.from_dict(space.name, assignment)


class RandomSampler:
    """Uniform random search."""

    name = "random"

    def sample(
        self,
        space: PipelineSpace,
        history: ObservationHistory,
        rng: np.random.Generator,
        trial_id: int = 0,
    ) -> Configuration:
        return sample_random(space, rng)

    def describe(self) -> dict:
        return {"type": "random"}


class TPESampler:
    """Tree-structured Parzen estimator search."""

    name = "tpe"

    def __init__(self, params: TPEParams | None = None):
        self.params = params or TPEParams()

    def sample(
        self,
        space: PipelineSpace,
        history: ObservationHistory,
        rng: np.random.Generator,
        trial_id: int = 0,
    ) -> Configuration:
        return sample_tpe(space, history, self.params, rng)

    def describe(self) -> dict:
        p = self.params
        return {
            "type": "tpe",
            "n_startup": p.n_startup,
            "gamma_fraction": p.gamma_fraction,
            "n_candidates": p.n_candidates,
            "bandwidth_floor": p.bandwidth_floor,
        }


class GridSampler:
    """Deterministic sweep over the enumerated grid, one cell per trial id."""

    name = "grid"

    def __init__(self, numeric_grid_points: int = 3):
        self.numeric_grid_points = numeric_grid_points
        self._grid: list[Configuration] | None = None
        self._space_name: str | None = None

    def sample(
        self,
        space: PipelineSpace,
        history: ObservationHistory,
        rng: np.random.Generator,
        trial_id: int = 0,
    ) -> Configuration:
        from .space import enumerate_grid

        if self._grid is None or self._space_name != space.name:
            self._grid = enumerate_grid(space, self.numeric_grid_points)
            self._space_name = space.name
        return self._grid[trial_id % len(self._grid)]

    def describe(self) -> dict:
        return {"type": "grid", "numeric_grid_points": self.numeric_grid_points}
