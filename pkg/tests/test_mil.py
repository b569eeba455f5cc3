"""Synthetic MIL evaluator: gradients, pooling, AUC, training contract."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pipebench.contract import EvaluationError
from pipebench.mil import (
    AGGREGATORS,
    Bag,
    MILModel,
    PipelineEffect,
    SyntheticGenSpec,
    TrainKnobs,
    apply_feature_extractor,
    attention_forward,
    auc,
    bag_scores,
    generate_raw_bags,
    loss_and_grads,
    resolve_knobs,
    train_mil,
    validation_metric,
)
from pipebench.space import Configuration, ParamSpec, PipelineSpace


def random_bags(rng, n_bags=6, n=5, d=7):
    bags = []
    for i in range(n_bags):
        bags.append(
            Bag(instances=rng.normal(size=(int(rng.integers(2, n + 1)), d)), label=float(i % 2), bag_id=i)
        )
    return bags


def loss_only(model, bags, aggregator, wd, task="classification"):
    return loss_and_grads(model, bags, aggregator, wd, task)[0]


def finite_difference_grads(model, bags, aggregator, wd, task="classification", step=1e-5):
    grads = {}
    for name in ("V", "w", "c"):
        arr = getattr(model, name)
        out = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            hi = loss_only(model, bags, aggregator, wd, task)
            arr[idx] = orig - step
            lo = loss_only(model, bags, aggregator, wd, task)
            arr[idx] = orig
            out[idx] = (hi - lo) / (2 * step)
        grads[name] = out
    b = model.b
    model.b = b + step
    hi = loss_only(model, bags, aggregator, wd, task)
    model.b = b - step
    lo = loss_only(model, bags, aggregator, wd, task)
    model.b = b
    grads["b"] = (hi - lo) / (2 * step)
    return grads


def relative_error(analytic, numeric):
    a = np.atleast_1d(np.asarray(analytic, dtype=float))
    f = np.atleast_1d(np.asarray(numeric, dtype=float))
    scale = max(np.abs(a).max(), np.abs(f).max(), 1e-8)
    return float(np.abs(a - f).max() / scale)


def auc_bruteforce(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestGradients:
    @pytest.mark.parametrize("aggregator", AGGREGATORS)
    @pytest.mark.parametrize("task", ["classification", "regression"])
    def test_analytic_matches_finite_differences(self, aggregator, task):
        rng = np.random.default_rng(0)
        for trial in range(5):
            bags = random_bags(np.random.default_rng(trial))
            model = MILModel.initialize(7, 4, rng)
            wd = 0.01 if trial % 2 else 0.0
            _, analytic = loss_and_grads(model, bags, aggregator, wd, task)
            numeric = finite_difference_grads(model, bags, aggregator, wd, task)
            params = ("V", "w", "c", "b") if aggregator == "attention" else ("c", "b")
            for name in params:
                assert relative_error(analytic[name], numeric[name]) < 1e-4, (
                    f"{aggregator}/{task}/{name}"
                )


class TestAttentionForward:
    def test_single_instance(self):
        rng = np.random.default_rng(1)
        model = MILModel.initialize(3, 2, rng)
        H = rng.normal(size=(1, 3))
        z, a = attention_forward(H, model)
        assert a == pytest.approx([1.0])
        assert z == pytest.approx(H[0])

    def test_identical_instances_uniform(self):
        rng = np.random.default_rng(2)
        model = MILModel.initialize(3, 2, rng)
        H = np.tile(rng.normal(size=(1, 3)), (5, 1))
        _, a = attention_forward(H, model)
        assert a == pytest.approx([0.2] * 5)

    def test_hand_computed_two_by_three(self):
        # Independent arithmetic oracle with pinned H, V, w.
        H = np.array([[1.0, 0.0, -1.0], [0.5, 2.0, 0.0]])
        V = np.array([[0.3, -0.2], [0.1, 0.4], [-0.5, 0.2]])
        w = np.array([1.0, -1.0])
        model = MILModel(V=V, w=w, c=np.zeros(3), b=0.0)
        e = []
        for k in range(2):
            u = [math.tanh(sum(H[k][i] * V[i][j] for i in range(3))) for j in range(2)]
            e.append(u[0] * w[0] + u[1] * w[1])
        m = max(e)
        weights = [math.exp(v - m) for v in e]
        total = sum(weights)
        a_expected = [wgt / total for wgt in weights]
        z_expected = [
            a_expected[0] * H[0][i] + a_expected[1] * H[1][i] for i in range(3)
        ]
        z, a = attention_forward(H, model)
        assert a == pytest.approx(a_expected, rel=1e-12)
        assert z == pytest.approx(z_expected, rel=1e-12)

    def test_weights_normalize(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            model = MILModel.initialize(6, 4, rng)
            H = rng.normal(size=(int(rng.integers(1, 9)), 6))
            _, a = attention_forward(H, model)
            assert abs(a.sum() - 1.0) < 1e-9
            assert np.all(a > 0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        model = MILModel.initialize(6, 4, rng)
        H = rng.normal(size=(8, 6))
        perm = rng.permutation(8)
        z1, _ = attention_forward(H, model)
        z2, _ = attention_forward(H[perm], model)
        assert np.abs(z1 - z2).max() < 1e-12
        bag1 = [Bag(instances=H, label=1.0, bag_id=0)]
        bag2 = [Bag(instances=H[perm], label=1.0, bag_id=0)]
        for agg in AGGREGATORS:
            l1 = loss_only(model, bag1, agg, 0.0)
            l2 = loss_only(model, bag2, agg, 0.0)
            assert abs(l1 - l2) < 1e-12
            s1 = bag_scores(model, bag1, agg)[0]
            s2 = bag_scores(model, bag2, agg)[0]
            assert abs(s1 - s2) < 1e-12


class TestAUC:
    def test_perfect_ranking(self):
        assert auc([0.9, 0.1], [1, 0]) == 1.0

    def test_full_tie(self):
        assert auc([0.5, 0.5], [1, 0]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="undefined AUC"):
            auc([0.1, 0.2], [1, 1])

    def test_matches_bruteforce_with_ties(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 50))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.normal(size=n), 1)  # coarse grid injects ties
            assert auc(scores, labels) == auc_bruteforce(scores.tolist(), labels.tolist())


class TestGeneration:
    def test_deterministic_given_seed(self):
        gen = SyntheticGenSpec(seed=11)
        a = generate_raw_bags(gen, 8, 0.7)
        b = generate_raw_bags(gen, 8, 0.7)
        assert np.array_equal(a.train_noise, b.train_noise)
        assert np.array_equal(a.val_labels, b.val_labels)

    def test_tile_size_maps_to_instances(self):
        effect = PipelineEffect()
        assert effect.instances_per_bag(512) == 8
        assert effect.instances_per_bag(256) == 16
        assert effect.instances_per_bag(1024) == 4

    def test_labels_balanced_and_witnesses_planted(self):
        gen = SyntheticGenSpec(seed=3, witness_rate=0.25)
        raw = generate_raw_bags(gen, 8, 1.0)
        assert raw.train_labels.sum() == gen.n_train // 2
        assert raw.n_witness == 2
        train, _ = apply_feature_extractor(raw, 5.0)
        for bag, noise in zip(train, raw.train_noise):
            delta = bag.instances - noise
            if bag.label == 1.0:
                assert np.all(delta[:2, :4] == 5.0)
                assert np.all(delta[2:, :] == 0.0)
                assert np.all(delta[:, 4:] == 0.0)
            else:
                assert np.all(delta == 0.0)

    def test_degenerate_separable_case(self):
        # witness_rate=1 with huge signal and tiny noise: a bag-mean score on
        # the informative dims separates perfectly.
        gen = SyntheticGenSpec(seed=5, witness_rate=1.0, base_noise=0.1)
        raw = generate_raw_bags(gen, 8, 1.0)
        train, val = apply_feature_extractor(raw, 3.0)
        scores = [bag.instances[:, : gen.d_sig].mean() for bag in val]
        labels = [int(bag.label) for bag in val]
        assert auc(scores, labels) == 1.0


def planted_mil_space():
    return PipelineSpace(
        name="planted",
        params=(
            ParamSpec(name="tile_size", stage="tiling", kind="categorical", choices=("256", "512", "1024")),
            ParamSpec(name="normalization", stage="normalization", kind="categorical", choices=("none", "A", "B")),
            ParamSpec(name="feature_extractor", stage="feature_extractor", kind="categorical", choices=("weak", "medium", "strong")),
            ParamSpec(name="aggregator", stage="aggregator", kind="categorical", choices=("mean", "max", "attention")),
            ParamSpec(name="lr", stage="training", kind="continuous-log", low=0.05, high=1.0),
        ),
    )


def planted_config(**overrides):
    entries = {
        "tile_size": "256",
        "normalization": "B",
        "feature_extractor": "strong",
        "aggregator": "attention",
        "lr": 0.5,
    }
    entries.update(overrides)
    return Configuration.from_dict("planted", entries)


class TestResolveKnobs:
    def test_full_mapping(self):
        knobs = resolve_knobs(planted_mil_space(), planted_config(), PipelineEffect())
        assert knobs.n_instances == 16
        assert knobs.noise_multiplier == 0.7
        assert knobs.mu == 2.0
        assert knobs.aggregator == "attention"
        assert knobs.lr == 0.5

    def test_unmapped_choice_fails(self):
        effect = PipelineEffect(noise_multipliers={"none": 1.0})
        with pytest.raises(EvaluationError, match="unmapped normalization"):
            resolve_knobs(planted_mil_space(), planted_config(), effect)

    def test_every_inspace_value_maps(self):
        space = planted_mil_space()
        effect = PipelineEffect()
        for norm in space.param("normalization").choices:
            for ext in space.param("feature_extractor").choices:
                for tile in space.param("tile_size").choices:
                    knobs = resolve_knobs(
                        space, planted_config(normalization=norm, feature_extractor=ext, tile_size=tile), effect
                    )
                    assert knobs.n_instances >= 1


class TestTrainMIL:
    def make_data(self, seed=0, n=8):
        gen = SyntheticGenSpec(seed=seed)
        raw = generate_raw_bags(gen, n, 0.7)
        return gen, apply_feature_extractor(raw, 2.0)

    def knobs(self, **overrides):
        base = dict(
            n_instances=8, noise_multiplier=0.7, mu=2.0, aggregator="attention",
            lr=0.5, epochs=10, weight_decay=0.0, hidden=8,
        )
        base.update(overrides)
        return TrainKnobs(**base)

    def test_zero_lr_freezes_parameters(self):
        gen, (train, val) = self.make_data()
        model = MILModel.initialize(gen.d, 8, np.random.default_rng(0))
        before = model.copy()
        reports = []
        result = train_mil(train, val, model, self.knobs(lr=0.0), report=lambda s, v: reports.append(v) or False)
        assert np.array_equal(result.model.V, before.V)
        assert np.array_equal(result.model.c, before.c)
        assert result.model.b == before.b
        assert len(set(reports)) == 1

    def test_separable_spec_reaches_high_auc(self):
        gen = SyntheticGenSpec(seed=1, witness_rate=1.0, base_noise=0.1)
        raw = generate_raw_bags(gen, 8, 1.0)
        train, val = apply_feature_extractor(raw, 3.0)
        model = MILModel.initialize(gen.d, 8, np.random.default_rng(2))
        result = train_mil(train, val, model, self.knobs(epochs=30, lr=0.5))
        assert 1.0 - result.final_metric >= 0.95

    def test_prune_signal_stops_promptly(self):
        gen, (train, val) = self.make_data()
        model = MILModel.initialize(gen.d, 8, np.random.default_rng(3))
        calls = []

        def report(step, value):
            calls.append(step)
            return step == 2

        result = train_mil(train, val, model, self.knobs(epochs=30), report=report)
        assert calls == [1, 2]
        assert result.pruned and result.epochs_run == 2

    def test_nonfinite_loss_reports_lr(self):
        # lr*wd >> 1 makes the decay term oscillate with geometric growth,
        # the classic divergence; the diagnostic must record the lr.
        gen, (train, val) = self.make_data()
        model = MILModel.initialize(gen.d, 8, np.random.default_rng(4))
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(EvaluationError, match="lr=1e\\+30"):
                train_mil(train, val, model, self.knobs(lr=1e30, weight_decay=1.0, epochs=50))

    def test_monotone_signal(self):
        # Mean val AUC across 10 seeds never decreases as the planted
        # amplitude grows, everything else fixed.
        gen = SyntheticGenSpec(seed=9)
        raw = generate_raw_bags(gen, 8, 1.0)
        means = []
        for mu in (0.5, 1.0, 2.0):
            train, val = apply_feature_extractor(raw, mu)
            aucs = []
            for seed in range(10):
                model = MILModel.initialize(gen.d, 8, np.random.default_rng(seed))
                result = train_mil(train, val, model, self.knobs(mu=mu, epochs=15))
                aucs.append(1.0 - result.final_metric)
            means.append(np.mean(aucs))
        assert means[0] <= means[1] <= means[2]

    def test_regression_task(self):
        rng = np.random.default_rng(5)
        bags = [Bag(instances=rng.normal(size=(4, 6)), label=float(rng.normal()), bag_id=i) for i in range(10)]
        model = MILModel.initialize(6, 3, rng)
        knobs = self.knobs(aggregator="mean")
        before = validation_metric(model, bags, "mean", "regression")
        result = train_mil(bags, bags, model, TrainKnobs(
            n_instances=4, noise_multiplier=1.0, mu=1.0, aggregator="mean",
            lr=0.1, epochs=40, weight_decay=0.0, hidden=3, task="regression",
        ))
        assert result.final_metric < before
