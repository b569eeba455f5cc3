"""Regenerate the recorded API fixtures under tests/fixtures.

Runs a small deterministic study (random sampler + Hyperband over the
planted space, seed 3) and records the explorer endpoints' responses. The UI
contract tests assert that every number the views display equals a value in
these responses, so regenerate them only when the API contract changes.

Usage: python scripts/make_fixtures.py   (from the frontend/ directory)
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from pipebench.cache import ArtifactCache
from pipebench.engine import load_state, run_optimize
from pipebench.journal import StudyJournal
from pipebench.mil import MILEvaluator, PipelineEffect, SyntheticGenSpec
from pipebench.pruners import HyperbandPruner
from pipebench.samplers import RandomSampler
from pipebench.server import create_app
from pipebench.space import Condition, ParamSpec, PipelineSpace

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def build_study(root: Path) -> Path:
    space = PipelineSpace(
        name="planted",
        params=(
            ParamSpec(name="tile_size", stage="tiling", kind="categorical",
                      choices=("256", "512")),
            ParamSpec(name="normalization", stage="normalization", kind="categorical",
                      choices=("none", "A", "B")),
            ParamSpec(name="feature_extractor", stage="feature_extractor",
                      kind="categorical", choices=("weak", "medium", "strong")),
            ParamSpec(name="aggregator", stage="aggregator", kind="categorical",
                      choices=("mean", "max", "attention")),
            ParamSpec(name="attention_hidden", stage="aggregator", kind="integer",
                      low=4, high=16,
                      condition=Condition(parent="aggregator", values=("attention",))),
            ParamSpec(name="lr", stage="training", kind="continuous-log",
                      low=0.05, high=2.0),
        ),
    )
    study_dir = root / "demo"
    study_dir.mkdir()
    evaluator = MILEvaluator(
        space,
        SyntheticGenSpec(seed=5, n_train=32, n_val=48),
        PipelineEffect(),
        default_epochs=27,
    )
    journal = StudyJournal(study_dir / "journal.ndjson", fsync=False)
    run_optimize(
        space, evaluator, RandomSampler(),
        HyperbandPruner(r_min=1, R=27, eta=3, warmup_trials=3),
        24, "minimize", journal, seed=3,
        cache=ArtifactCache(study_dir / "cache"), study_id="demo",
    )
    journal.close()
    return study_dir


def main() -> None:
    root = Path(tempfile.mkdtemp())
    study_dir = build_study(root)
    client = TestClient(create_app(root))
    OUT.mkdir(parents=True, exist_ok=True)

    def record(name: str, path: str, params: dict | None = None) -> None:
        response = client.get(path, params=params or {})
        response.raise_for_status()
        (OUT / name).write_text(json.dumps(response.json(), indent=1))
        print(f"{name}: {len(response.content)} bytes")

    record("studies.json", "/api/studies")
    record("study.json", "/api/studies/demo")
    record("trials.json", "/api/studies/demo/trials")
    record("trials_filtered.json", "/api/studies/demo/trials",
           {"filter": "aggregator=attention,state=complete"})
    record("grouped.json", "/api/studies/demo/trials",
           {"filter": "state=complete", "group_by": "aggregator", "agg": "mean"})
    record("leaderboard.json", "/api/studies/demo/leaderboard", {"k": 10})
    record("plot_scatter.json", "/api/studies/demo/plot",
           {"x": "lr", "y": "final_value", "group_by": "aggregator"})
    record("plot_best.json", "/api/studies/demo/plot",
           {"x": "trial_id", "y": "last_value", "transform": "best_so_far"})
    state = load_state(study_dir)
    pruned = next(t.id for t in state.trials.values() if t.state == "pruned")
    complete = next(
        t.id for t in state.trials.values() if t.state == "complete" and t.bracket == 3
    )
    record("trial_pruned.json", f"/api/studies/demo/trials/{pruned}")
    record("trial_complete.json", f"/api/studies/demo/trials/{complete}")
    record("events.json", "/api/studies/demo/events", {"since": 0})
    record("events_tail.json", "/api/studies/demo/events", {"since": 700})


if __name__ == "__main__":
    main()
