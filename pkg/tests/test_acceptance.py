"""Acceptance suite: one test per exit criterion, at its stated tolerance.

Each test prints a single ``[ACCEPTANCE] <name>: PASS/FAIL`` line (visible
with ``pytest -s`` or in captured output). All runs are fully seeded; the
statistical criteria are deterministic given this environment.
"""

from __future__ import annotations

import math
import statistics
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from pipebench.cache import ArtifactCache, NullCache
from pipebench.engine import (
    estimate_speedup,
    load_state,
    resume,
    run_benchmark,
    run_optimize,
)
from pipebench.journal import StudyJournal
from pipebench.mil import MILModel, auc, loss_and_grads
from pipebench.pruners import (
    HyperbandPruner,
    IntermediateCurve,
    NoPruner,
    median_should_prune,
    sha_should_prune,
)
from pipebench.samplers import RandomSampler, TPESampler
from pipebench.space import ParamSpec, PipelineSpace, enumerate_grid
from pipebench.testing import AnalyticEvaluator, random_space

from conftest import KillingEvaluator, SimulatedKill, make_mil_evaluator, planted_space
from test_mil import auc_bruteforce, finite_difference_grads, random_bags, relative_error


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def study_journal(tmp_path: Path, name: str) -> StudyJournal:
    d = tmp_path / name
    d.mkdir(parents=True, exist_ok=True)
    return StudyJournal(d / "journal.ndjson", fsync=False)


def optimize_best(space, evaluator, sampler, pruner, tmp_path, name, *, seed, budget=50):
    journal = study_journal(tmp_path, name)
    result = run_optimize(
        space, evaluator, sampler, pruner, budget, "minimize", journal,
        seed=seed, cache=ArtifactCache(tmp_path / name / "cache"), write_results=False,
    )
    journal.close()
    return result


def test_speedup_formula_reproduction():
    with criterion("speedup formula reproduction"):
        assert estimate_speedup(1000, 100, 0.1) == 100.0
        hi = estimate_speedup(1000, 100, 0.05)
        lo = estimate_speedup(1000, 100, 0.3)
        assert hi == 200.0
        assert lo == (1000 / 100) / 0.3
        assert 33.3 <= lo <= hi == 200.0  # one to two orders of magnitude


def test_optimizer_beats_random(tmp_path):
    # 20 paired seeds, T=50, on the planted space; the pair shares its data
    # seed and its per-trial seed streams, so the first n_startup trials are
    # identical and the comparison isolates guided sampling.
    with criterion("optimizer beats random"):
        space = planted_space(tiles=("256",), lr_low=0.05, lr_high=2.0)
        tpe_best, random_best = [], []
        for seed in range(20):
            for label, sampler, out in (
                ("tpe", TPESampler(), tpe_best),
                ("random", RandomSampler(), random_best),
            ):
                evaluator = make_mil_evaluator(space, data_seed=1000 + seed)
                result = optimize_best(
                    space, evaluator, sampler, NoPruner(), tmp_path,
                    f"{label}-{seed}", seed=seed,
                )
                out.append(result.value)
        wins = sum(1 for t, r in zip(tpe_best, random_best) if t < r)
        assert statistics.median(tpe_best) <= statistics.median(random_best)
        assert wins >= 12, f"TPE won only {wins}/20"


def test_pruning_economy(tmp_path):
    # Hyperband(r_min=1, R=27, eta=3) vs no pruner at T=30 over 10 seeds:
    # at least half the reported epochs saved, best AUC within 0.03 (median).
    with criterion("pruning economy"):
        space = planted_space(tiles=("256",), lr_low=0.05, lr_high=2.0)
        saved, degradations = [], []
        for seed in range(10):
            epochs = {}
            best_auc = {}
            for label, pruner in (
                ("hyperband", HyperbandPruner(r_min=1, R=27, eta=3)),
                ("full", NoPruner()),
            ):
                evaluator = make_mil_evaluator(space, data_seed=2000 + seed)
                result = optimize_best(
                    space, evaluator, RandomSampler(), pruner, tmp_path,
                    f"econ-{label}-{seed}", seed=seed, budget=30,
                )
                state = load_state(tmp_path / f"econ-{label}-{seed}")
                epochs[label] = sum(t.steps for t in state.trials.values())
                best_auc[label] = 1.0 - result.value
            saved.append(epochs["hyperband"] / epochs["full"])
            degradations.append(best_auc["full"] - best_auc["hyperband"])
        assert statistics.median(saved) <= 0.5, f"epochs ratio {saved}"
        assert statistics.median(degradations) <= 0.03, f"degradations {degradations}"


def test_cache_correctness_and_effect(tmp_path):
    # 12 configurations sharing 4 preprocessing subconfigurations: the raw-bag
    # producer runs exactly 4 times, and results match a cold-cache run.
    with criterion("cache correctness and effect"):
        space = PipelineSpace(
            name="cache-study",
            params=(
                ParamSpec(name="tile_size", stage="tiling", kind="categorical",
                          choices=("256", "512")),
                ParamSpec(name="normalization", stage="normalization", kind="categorical",
                          choices=("none", "B")),
                ParamSpec(name="feature_extractor", stage="feature_extractor",
                          kind="categorical", choices=("strong",)),
                ParamSpec(name="aggregator", stage="aggregator", kind="categorical",
                          choices=("mean", "max", "attention")),
                ParamSpec(name="lr", stage="training", kind="continuous-log",
                          low=0.4, high=1.0),
            ),
        )
        grid = enumerate_grid(space, 1)
        assert len(grid) == 12  # 2 tiles x 2 norms x 3 aggregators

        warm = make_mil_evaluator(space, data_seed=7)
        journal = study_journal(tmp_path, "warm")
        warm_summary = run_benchmark(
            space, warm, 1, 1, journal, seed=5,
            cache=ArtifactCache(tmp_path / "warm" / "cache"), write_results=False,
        )
        journal.close()
        assert warm.preprocess_invocations == 4

        cold = make_mil_evaluator(space, data_seed=7)
        journal = study_journal(tmp_path, "cold")
        cold_summary = run_benchmark(
            space, cold, 1, 1, journal, seed=5, cache=NullCache(), write_results=False,
        )
        journal.close()
        assert cold.preprocess_invocations == 12
        for a, b in zip(warm_summary.stats, cold_summary.stats):
            assert a.config == b.config
            assert a.mean == b.mean


@pytest.mark.parametrize("kill_after", [1, 5, 9])
def test_resume_fidelity(tmp_path, kill_after):
    # Kill mid-trial k+1 of 10, resume with concurrency=1 and the
    # deterministic evaluator: results.csv must be byte-identical.
    with criterion(f"resume fidelity (kill after trial {kill_after})"):
        space = planted_space(tiles=("512",), lr_low=0.2, lr_high=1.0)

        def evaluator():
            return make_mil_evaluator(space, data_seed=3, epochs=8)

        golden_journal = study_journal(tmp_path, f"golden-{kill_after}")
        run_optimize(
            space, evaluator(), RandomSampler(), NoPruner(), 10, "minimize",
            golden_journal, seed=11, study_id="study",
            cache=ArtifactCache(tmp_path / f"golden-{kill_after}" / "cache"),
        )
        golden_journal.close()
        golden = (tmp_path / f"golden-{kill_after}" / "results.csv").read_bytes()

        name = f"killed-{kill_after}"
        journal = study_journal(tmp_path, name)
        killer = KillingEvaluator(evaluator(), kill_on_call=kill_after + 1)
        with pytest.raises(SimulatedKill):
            run_optimize(
                space, killer, RandomSampler(), NoPruner(), 10, "minimize",
                journal, seed=11, study_id="study",
                cache=ArtifactCache(tmp_path / name / "cache"),
            )
        journal.close()

        resume(
            tmp_path / name, space, evaluator(),
            sampler=RandomSampler(), pruner=NoPruner(),
            cache=ArtifactCache(tmp_path / name / "cache"), fsync=False,
        )
        assert (tmp_path / name / "results.csv").read_bytes() == golden


def test_gradient_check():
    # Analytic vs central finite differences (step 1e-5) over 50 random
    # instances; norm-wise relative error below 1e-4 for every parameter.
    with criterion("gradient check"):
        worst = 0.0
        for instance in range(50):
            rng = np.random.default_rng(instance)
            bags = random_bags(rng, n_bags=4, n=6, d=5)
            model = MILModel.initialize(5, 3, rng)
            wd = 0.02 if instance % 2 else 0.0
            _, analytic = loss_and_grads(model, bags, "attention", wd)
            numeric = finite_difference_grads(model, bags, "attention", wd)
            for name in ("V", "w", "c", "b"):
                worst = max(worst, relative_error(analytic[name], numeric[name]))
        assert worst < 1e-4, f"max relative error {worst}"


def test_auc_oracle_equivalence():
    # 1000 random instances (n <= 50, ties injected): exact equality with
    # O(n^2) pair counting.
    with criterion("auc oracle equivalence"):
        rng = np.random.default_rng(12345)
        for _ in range(1000):
            n = int(rng.integers(2, 51))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.normal(size=n) * 2, 1)
            assert auc(scores, labels) == auc_bruteforce(scores.tolist(), labels.tolist())


def independent_grid_count(space, k):
    """Brute-force condition-tree enumeration with its own grid arithmetic."""

    def values(p):
        if p.kind == "categorical":
            return list(p.choices)
        if k == 1:
            raw = [float(p.low)]
        elif p.kind == "continuous-log":
            raw = np.geomspace(p.low, p.high, k).tolist()
        else:
            raw = np.linspace(p.low, p.high, k).tolist()
        if p.kind == "integer":
            out = []
            for v in raw:
                i = min(max(int(round(v)), int(p.low)), int(p.high))
                if i not in out:
                    out.append(i)
            return out
        return [float(v) for v in raw]

    by_name = {p.name: p for p in space.params}
    assignments = [{}]
    remaining = list(space.params)
    while remaining:
        param = next(
            q for q in remaining
            if q.condition is None or by_name[q.condition.parent] not in remaining
        )
        remaining.remove(param)
        expanded = []
        for partial in assignments:
            cond = param.condition
            active = cond is None or (
                cond.parent in partial and str(partial[cond.parent]) in cond.values
            )
            if active:
                expanded.extend({**partial, param.name: v} for v in values(param))
            else:
                expanded.append(partial)
        assignments = expanded
    return len({tuple(sorted(a.items())) for a in assignments})


def test_grid_law(tmp_path):
    # Benchmark-mode trial count equals the independent enumeration count on
    # 20 fuzzed conditional spaces.
    with criterion("grid law"):
        checked = 0
        seed = 0
        while checked < 20:
            space = random_space(np.random.default_rng(seed), name=f"fuzz{seed}")
            seed += 1
            expected = independent_grid_count(space, 2)
            if expected > 300:
                continue
            journal = study_journal(tmp_path, f"grid-{seed}")
            run_benchmark(
                space, AnalyticEvaluator(space, epochs=1), 2, 1, journal,
                write_results=False,
            )
            journal.close()
            state = load_state(tmp_path / f"grid-{seed}")
            assert len(state.trials) == expected, f"space seed {seed - 1}"
            assert state.counts()["complete"] == expected
            checked += 1


def test_planted_optimum_recovery(tmp_path):
    # Exhaustive benchmark with 5 repeats ranks (strong extractor,
    # normalization B, attention) first by mean AUC.
    with criterion("planted optimum recovery"):
        space = planted_space(tiles=("256",), lr_low=0.4, lr_high=1.0)
        evaluator = make_mil_evaluator(space, data_seed=0)
        journal = study_journal(tmp_path, "planted")
        summary = run_benchmark(
            space, evaluator, 2, 5, journal, seed=100,
            cache=ArtifactCache(tmp_path / "planted" / "cache"), write_results=False,
        )
        journal.close()
        best = summary.best("minimize")
        assert best.config["feature_extractor"] == "strong"
        assert best.config["normalization"] == "B"
        assert best.config["aggregator"] == "attention"


def test_pruner_oracles():
    # median_should_prune and sha_should_prune against independent
    # sort/median references on 1000 fuzzed peer sets each.
    with criterion("pruner oracles"):
        rng = np.random.default_rng(777)
        for _ in range(1000):
            n_peers = int(rng.integers(1, 16))
            peer_values = np.round(rng.normal(size=n_peers), 2).tolist()
            own = round(float(rng.normal()), 2)
            direction = "minimize" if rng.random() < 0.5 else "maximize"
            got = median_should_prune(
                IntermediateCurve(0, ((1, own),)),
                [IntermediateCurve(i + 1, ((1, v),)) for i, v in enumerate(peer_values)],
                1,
                direction,
                warmup_trials=1,
                warmup_steps=0,
            )
            med = statistics.median(peer_values)
            expected = own > med if direction == "minimize" else own < med
            assert got == expected

        rng = np.random.default_rng(778)
        for _ in range(1000):
            m = int(rng.integers(1, 16))
            eta = int(rng.integers(2, 5))
            values = [(tid, round(float(rng.normal()), 1)) for tid in range(m)]
            direction = "minimize" if rng.random() < 0.5 else "maximize"
            sign = 1 if direction == "minimize" else -1
            keep = math.ceil(m / eta)
            kept = {t for t, _ in sorted(values, key=lambda p: (sign * p[1], p[0]))[:keep]}
            for tid, value in values:
                got = sha_should_prune(
                    IntermediateCurve(tid, ((1, value),)), values, 1, eta, direction
                )
                assert got == (tid not in kept)
