"""Synthetic multiple-instance-learning evaluator.

Each trial trains a small bag classifier on synthetic instance bags whose
generative knobs are driven by the sampled pipeline configuration: tile size
sets the instances per bag, the normalization choice scales the noise floor,
the feature-extractor choice scales the planted signal amplitude, and the
aggregator selects mean, max, or gated attention pooling. Training is
full-batch gradient descent with hand-written gradients, so runs are
bit-reproducible from the trial seed and cheap enough to benchmark
exhaustively on a laptop.

The planted ordering (strong extractor, normalization "B", attention) is the
ground truth that optimizer and benchmark tests recover.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cache import ArtifactKey, NullCache, artifact_key
from .contract import CacheAccessor, EvaluationError, ReportFn
from .space import Configuration, PipelineSpace, config_digest

PREPROCESS_STAGES = ("tiling", "normalization")


@dataclass(frozen=True)
class Bag:
    """One labeled set of instances (rows of ``instances``)."""

    instances: np.ndarray  # (n, d)
    label: float
    bag_id: int

    def __post_init__(self) -> None:
        if self.instances.ndim != 2 or self.instances.shape[0] < 1:
            raise ValueError("instances must be a non-empty (n, d) matrix")
        if not np.all(np.isfinite(self.instances)):
            raise ValueError("instances must be finite")


@dataclass(frozen=True)
class SyntheticGenSpec:
    """Knobs of the synthetic bag generator that are not searched over."""

    d: int = 16
    d_sig: int = 4
    witness_rate: float = 0.1
    base_noise: float = 1.5
    n_train: int = 64
    n_val: int = 96
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.d_sig <= self.d:
            raise ValueError("requires 1 <= d_sig <= d")
        if not 0 < self.witness_rate <= 1:
            raise ValueError("requires 0 < witness_rate <= 1")
        if self.n_train < 2 or self.n_val < 2:
            raise ValueError("need at least 2 bags per split")

    def digest(self) -> str:
        import hashlib

        blob = json.dumps(
            [self.d, self.d_sig, self.witness_rate, self.base_noise,
             self.n_train, self.n_val, self.seed],
            separators=(",", ":"),
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class PipelineEffect:
    """Mapping from configuration stage values to generative knobs.

    All planted-optimum tests depend on this table:

    ==================  =========================================
    tile_size           instances per bag = round(4096 / tile_size)
    normalization       noise multiplier: none=1.0, A=0.8, B=0.7
    feature_extractor   signal amplitude: weak=0.5, medium=1.0, strong=2.0
    aggregator          mean | max | attention
    training            lr, epochs, weight_decay (by parameter name)
    ==================  =========================================
    """

    instance_budget: int = 4096
    noise_multipliers: Mapping[str, float] = field(
        default_factory=lambda: {"none": 1.0, "A": 0.8, "B": 0.7}
    )
    signal_amplitudes: Mapping[str, float] = field(
        default_factory=lambda: {"weak": 0.5, "medium": 1.0, "strong": 2.0}
    )

    def instances_per_bag(self, tile_size: int) -> int:
        n = int(round(self.instance_budget / tile_size))
        if n < 1:
            raise EvaluationError(f"tile_size {tile_size} leaves no instances per bag")
        return n

    def noise_multiplier(self, choice: str) -> float:
        try:
            return float(self.noise_multipliers[choice])
        except KeyError:
            raise EvaluationError(f"unmapped normalization choice {choice!r}") from None

    def signal_amplitude(self, choice: str) -> float:
        try:
            return float(self.signal_amplitudes[choice])
        except KeyError:
            raise EvaluationError(f"unmapped feature_extractor choice {choice!r}") from None


AGGREGATORS = ("mean", "max", "attention")


@dataclass
class MILModel:
    """Gated-attention bag classifier parameters.

    ``V`` (d, h) and ``w`` (h,) parameterize per-instance attention scores
    ``e_k = w . tanh(V^T h_k)``; the affine classifier ``c, b`` maps the
    pooled vector to a logit.
    """

    V: np.ndarray
    w: np.ndarray
    c: np.ndarray
    b: float

    @classmethod
    def initialize(cls, d: int, h: int, rng: np.random.Generator) -> "MILModel":
        if h < 1:
            raise ValueError("attention hidden dim must be >= 1")
        bound = 1.0 / math.sqrt(d)
        return cls(
            V=rng.uniform(-bound, bound, size=(d, h)),
            w=rng.uniform(-bound, bound, size=h),
            c=rng.uniform(-bound, bound, size=d),
            b=float(rng.uniform(-bound, bound)),
        )

    def copy(self) -> "MILModel":
        return MILModel(V=self.V.copy(), w=self.w.copy(), c=self.c.copy(), b=self.b)


@dataclass(frozen=True)
class RawBags:
    """Preprocessing artifact: noise tensors before the extractor is applied.

    Depends only on the generator spec and the tiling/normalization knobs,
    which is what makes it reusable across trials that share a preprocessing
    subconfiguration.
    """

    train_noise: np.ndarray  # (B, n, d)
    train_labels: np.ndarray  # (B,)
    val_noise: np.ndarray
    val_labels: np.ndarray
    n_witness: int
    d_sig: int


def generate_raw_bags(
    gen: SyntheticGenSpec, n_instances: int, noise_multiplier: float
) -> RawBags:
    """Deterministic noise tensors and balanced labels for both splits."""
    scale = gen.base_noise * noise_multiplier
    n_witness = math.ceil(gen.witness_rate * n_instances)

    def split(n_bags: int, stream: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng([gen.seed, stream])
        noise = rng.standard_normal((n_bags, n_instances, gen.d)) * scale
        labels = np.zeros(n_bags)
        labels[: n_bags // 2] = 1.0
        return noise, labels

    train_noise, train_labels = split(gen.n_train, 0)
    val_noise, val_labels = split(gen.n_val, 1)
    return RawBags(
        train_noise=train_noise,
        train_labels=train_labels,
        val_noise=val_noise,
        val_labels=val_labels,
        n_witness=n_witness,
        d_sig=gen.d_sig,
    )


def apply_feature_extractor(raw: RawBags, mu: float) -> tuple[list[Bag], list[Bag]]:
    """Add the planted signal (+mu on the informative dims of witness instances)."""

    def build(noise: np.ndarray, labels: np.ndarray) -> list[Bag]:
        bags = []
        for i in range(noise.shape[0]):
            instances = noise[i].copy()
            if labels[i] == 1.0:
                instances[: raw.n_witness, : raw.d_sig] += mu
            bags.append(Bag(instances=instances, label=float(labels[i]), bag_id=i))
        return bags

    return build(raw.train_noise, raw.train_labels), build(raw.val_noise, raw.val_labels)


@dataclass(frozen=True)
class TrainKnobs:
    """Everything the trainer needs, resolved from one configuration."""

    n_instances: int
    noise_multiplier: float
    mu: float
    aggregator: str
    lr: float
    epochs: int
    weight_decay: float
    hidden: int
    task: str = "classification"


def resolve_knobs(
    space: PipelineSpace,
    config: Configuration,
    effect: PipelineEffect,
    *,
    default_lr: float = 0.5,
    default_epochs: int = 27,
    default_weight_decay: float = 0.0,
    default_hidden: int = 8,
    task: str = "classification",
) -> TrainKnobs:
    def stage_value(stage: str, preferred: str) -> str:
        if preferred in config and space.stage_of(preferred) == stage:
            return str(config[preferred])
        present = [name for name in config if space.stage_of(name) == stage]
        if len(present) != 1:
            raise EvaluationError(
                f"cannot resolve {stage} knob: expected parameter {preferred!r} "
                f"or a single {stage}-stage parameter, found {present}"
            )
        return str(config[present[0]])

    tile = int(stage_value("tiling", "tile_size"))
    norm = stage_value("normalization", "normalization")
    extractor = stage_value("feature_extractor", "feature_extractor")
    aggregator = stage_value("aggregator", "aggregator")
    if aggregator not in AGGREGATORS:
        raise EvaluationError(f"unknown aggregator {aggregator!r}")

    lr = float(config.get("lr", default_lr))
    epochs = int(config.get("epochs", default_epochs))
    weight_decay = float(config.get("weight_decay", default_weight_decay))
    hidden = int(config.get("attention_hidden", default_hidden))
    return TrainKnobs(
        n_instances=effect.instances_per_bag(tile),
        noise_multiplier=effect.noise_multiplier(norm),
        mu=effect.signal_amplitude(extractor),
        aggregator=aggregator,
        lr=lr,
        epochs=epochs,
        weight_decay=weight_decay,
        hidden=hidden,
        task=task,
    )


def generate_bags(
    gen: SyntheticGenSpec,
    effect: PipelineEffect,
    space: PipelineSpace,
    config: Configuration,
) -> tuple[list[Bag], list[Bag]]:
    """Train/val bags for one configuration, bit-identical given the same seed."""
    knobs = resolve_knobs(space, config, effect)
    raw = generate_raw_bags(gen, knobs.n_instances, knobs.noise_multiplier)
    return apply_feature_extractor(raw, knobs.mu)


def attention_forward(H: np.ndarray, model: MILModel) -> tuple[np.ndarray, np.ndarray]:
    """Attention pooling: returns (pooled vector z, attention weights a).

    a = softmax_k(w . tanh(V^T h_k)); z = sum_k a_k h_k. The weights are
    strictly positive and sum to one, and the result is invariant to
    permuting the instances.
    """
    U = np.tanh(H @ model.V)  # (n, h)
    e = U @ model.w  # (n,)
    e = e - e.max()
    exp = np.exp(e)
    a = exp / exp.sum()
    z = a @ H
    return z, a


def aggregate(H: np.ndarray, model: MILModel, aggregator: str) -> np.ndarray:
    if aggregator == "mean":
        return H.mean(axis=0)
    if aggregator == "max":
        return H.max(axis=0)
    if aggregator == "attention":
        z, _ = attention_forward(H, model)
        return z
    raise EvaluationError(f"unknown aggregator {aggregator!r}")


def bag_scores(model: MILModel, bags: Sequence[Bag], aggregator: str) -> np.ndarray:
    scores = np.empty(len(bags))
    for i, bag in enumerate(bags):
        z = aggregate(bag.instances, model, aggregator)
        scores[i] = float(model.c @ z + model.b)
    return scores


def _bce_with_logits(s: float, y: float) -> tuple[float, float]:
    # log(1 + e^s) - s*y, computed stably; derivative sigmoid(s) - y.
    if math.isnan(s):
        return math.nan, math.nan
    loss = max(s, 0.0) - s * y + math.log1p(math.exp(-abs(s)))
    if s >= 0:
        sigma = 1.0 / (1.0 + math.exp(-s))
    else:
        e = math.exp(s)
        sigma = e / (1.0 + e)
    return loss, sigma - y


def loss_and_grads(
    model: MILModel,
    bags: Sequence[Bag],
    aggregator: str,
    weight_decay: float = 0.0,
    task: str = "classification",
) -> tuple[float, dict[str, np.ndarray | float]]:
    """Full-batch loss and analytic gradients for the active parameters.

    Mean and max pooling have no parameters upstream of the classifier, so
    only ``c`` and ``b`` receive gradients (and weight decay) there.
    """
    n_bags = len(bags)
    dV = np.zeros_like(model.V)
    dw = np.zeros_like(model.w)
    dc = np.zeros_like(model.c)
    db = 0.0
    total = 0.0
    for bag in bags:
        H = bag.instances
        if aggregator == "attention":
            U = np.tanh(H @ model.V)
            e = U @ model.w
            e = e - e.max()
            exp = np.exp(e)
            a = exp / exp.sum()
            z = a @ H
        else:
            z = aggregate(H, model, aggregator)
        s = float(model.c @ z + model.b)
        if task == "classification":
            loss, ds = _bce_with_logits(s, bag.label)
        else:
            loss = (s - bag.label) ** 2
            ds = 2.0 * (s - bag.label)
        total += loss
        ds /= n_bags
        dc += ds * z
        db += ds
        if aggregator == "attention":
            dz = ds * model.c
            da = H @ dz
            de = a * (da - float(a @ da))
            dw += U.T @ de
            dU = np.outer(de, model.w)
            dV += H.T @ (dU * (1.0 - U * U))
    total /= n_bags

    if aggregator == "attention":
        total += 0.5 * weight_decay * (
            float(np.sum(model.V**2)) + float(np.sum(model.w**2)) + float(np.sum(model.c**2))
        )
        dV += weight_decay * model.V
        dw += weight_decay * model.w
    else:
        total += 0.5 * weight_decay * float(np.sum(model.c**2))
    dc += weight_decay * model.c
    return total, {"V": dV, "w": dw, "c": dc, "b": db}


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Rank-based AUC with midrank tie handling.

    Equals (#concordant pairs + 0.5 * #tied pairs) / (#pos * #neg) exactly,
    which the test suite cross-checks against brute-force pair counting.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("undefined AUC: both classes must be present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class TrainResult:
    model: MILModel
    final_metric: float
    epochs_run: int
    pruned: bool


def validation_metric(
    model: MILModel, val_bags: Sequence[Bag], aggregator: str, task: str
) -> float:
    scores = bag_scores(model, val_bags, aggregator)
    if task == "classification":
        labels = [int(b.label) for b in val_bags]
        return 1.0 - auc(scores, labels)
    return float(np.mean((scores - np.array([b.label for b in val_bags])) ** 2))


def train_mil(
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    model: MILModel,
    knobs: TrainKnobs,
    report: ReportFn | None = None,
) -> TrainResult:
    """Full-batch gradient descent with per-epoch validation reporting.

    Reports ``(epoch, metric)`` after every epoch (1-based) where the metric
    is 1 - AUC for classification and MSE for regression; stops promptly when
    the report callback returns True.
    """
    attention = knobs.aggregator == "attention"
    metric = validation_metric(model, val_bags, knobs.aggregator, knobs.task)
    for epoch in range(1, knobs.epochs + 1):
        loss, grads = loss_and_grads(
            model, train_bags, knobs.aggregator, knobs.weight_decay, knobs.task
        )
        if not math.isfinite(loss):
            raise EvaluationError(
                f"non-finite training loss at epoch {epoch} (lr={knobs.lr})"
            )
        if attention:
            model.V -= knobs.lr * grads["V"]
            model.w -= knobs.lr * grads["w"]
        model.c -= knobs.lr * grads["c"]
        model.b -= knobs.lr * grads["b"]
        metric = validation_metric(model, val_bags, knobs.aggregator, knobs.task)
        if report is not None and report(epoch, metric):
            return TrainResult(model=model, final_metric=metric, epochs_run=epoch, pruned=True)
    return TrainResult(model=model, final_metric=metric, epochs_run=knobs.epochs, pruned=False)


class MILEvaluator:
    """Evaluation-contract implementation backed by the synthetic generator.

    Preprocessing artifacts (raw bags) are cached under the tiling and
    normalization stages; the extractor amplitude is applied on top, so the
    cache changes cost but never results. ``preprocess_invocations`` counts
    actual producer runs for cache-effect assertions.

    ``n_models`` > 1 trains that many differently-initialized models in
    lockstep and reports their mean validation metric per epoch, trading
    compute for a lower-variance estimate.
    """

    metric_name = "one_minus_auc"

    def __init__(
        self,
        space: PipelineSpace,
        gen: SyntheticGenSpec,
        effect: PipelineEffect | None = None,
        *,
        default_lr: float = 0.5,
        default_epochs: int = 27,
        default_weight_decay: float = 0.0,
        default_hidden: int = 8,
        task: str = "classification",
        n_models: int = 1,
        persist_dir: str | Path | None = None,
    ):
        if n_models < 1:
            raise ValueError("n_models must be >= 1")
        self.space = space
        self.gen = gen
        self.effect = effect or PipelineEffect()
        self.default_lr = default_lr
        self.default_epochs = default_epochs
        self.default_weight_decay = default_weight_decay
        self.default_hidden = default_hidden
        self.task = task
        self.n_models = n_models
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.preprocess_invocations = 0
        self._counter_lock = threading.Lock()
        self._gen_digest = gen.digest()

    def resolve(self, config: Configuration) -> TrainKnobs:
        return resolve_knobs(
            self.space,
            config,
            self.effect,
            default_lr=self.default_lr,
            default_epochs=self.default_epochs,
            default_weight_decay=self.default_weight_decay,
            default_hidden=self.default_hidden,
            task=self.task,
        )

    def preprocess_key(self, config: Configuration) -> ArtifactKey:
        return artifact_key(
            self.space, config, PREPROCESS_STAGES, label=f"bags-{self._gen_digest}"
        )

    def __call__(
        self,
        config: Configuration,
        seed: int,
        report: ReportFn,
        cache: CacheAccessor | None = None,
    ) -> float:
        cache = cache if cache is not None else NullCache()
        knobs = self.resolve(config)

        def producer() -> RawBags:
            with self._counter_lock:
                self.preprocess_invocations += 1
            return generate_raw_bags(self.gen, knobs.n_instances, knobs.noise_multiplier)

        raw, _ = cache.get_or_compute(self.preprocess_key(config), producer)
        train_bags, val_bags = apply_feature_extractor(raw, knobs.mu)
        if self.n_models == 1:
            model = MILModel.initialize(self.gen.d, knobs.hidden, np.random.default_rng(seed))
            result = train_mil(train_bags, val_bags, model, knobs, report)
        else:
            result = self._train_lockstep(train_bags, val_bags, knobs, seed, report)
        if self.persist_dir is not None:
            self._persist_summary(config, seed, knobs, result)
        return result.final_metric

    def _train_lockstep(
        self,
        train_bags: Sequence[Bag],
        val_bags: Sequence[Bag],
        knobs: TrainKnobs,
        seed: int,
        report: ReportFn,
    ) -> TrainResult:
        models = [
            MILModel.initialize(self.gen.d, knobs.hidden, np.random.default_rng([seed, j]))
            for j in range(self.n_models)
        ]
        attention = knobs.aggregator == "attention"
        metric = float(np.mean([
            validation_metric(m, val_bags, knobs.aggregator, knobs.task) for m in models
        ]))
        for epoch in range(1, knobs.epochs + 1):
            for model in models:
                loss, grads = loss_and_grads(
                    model, train_bags, knobs.aggregator, knobs.weight_decay, knobs.task
                )
                if not math.isfinite(loss):
                    raise EvaluationError(
                        f"non-finite training loss at epoch {epoch} (lr={knobs.lr})"
                    )
                if attention:
                    model.V -= knobs.lr * grads["V"]
                    model.w -= knobs.lr * grads["w"]
                model.c -= knobs.lr * grads["c"]
                model.b -= knobs.lr * grads["b"]
            metric = float(np.mean([
                validation_metric(m, val_bags, knobs.aggregator, knobs.task) for m in models
            ]))
            if report is not None and report(epoch, metric):
                return TrainResult(model=models[0], final_metric=metric, epochs_run=epoch, pruned=True)
        return TrainResult(
            model=models[0], final_metric=metric, epochs_run=knobs.epochs, pruned=False
        )

    def _persist_summary(
        self, config: Configuration, seed: int, knobs: TrainKnobs, result: TrainResult
    ) -> None:
        self.persist_dir.mkdir(parents=True, exist_ok=True)
        path = self.persist_dir / f"model-{config_digest(config)[:12]}-s{seed}.json"
        summary = {
            "config": config.entries,
            "seed": seed,
            "aggregator": knobs.aggregator,
            "epochs_run": result.epochs_run,
            "pruned": result.pruned,
            "final_metric": result.final_metric,
            "param_norms": {
                "V": float(np.linalg.norm(result.model.V)),
                "w": float(np.linalg.norm(result.model.w)),
                "c": float(np.linalg.norm(result.model.c)),
                "b": result.model.b,
            },
        }
        path.write_text(json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8")
