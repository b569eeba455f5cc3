"""Command-line entry point.

Subcommands: ``benchmark`` and ``optimize`` run a study from a YAML
configuration, ``resume`` continues an interrupted study from its journal
(rebuilding components from the configuration stored there), ``export``
flattens a study to CSV, ``serve`` starts the explorer service, and
``speedup`` evaluates the expected gain of guided search over exhaustive
evaluation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import results as results_mod
from .cache import ArtifactCache, NullCache
from .config import ConfigError, StudySettings, load_config, make_evaluator
from .contract import EvaluationError
from .engine import (
    JOURNAL_NAME,
    RESULTS_NAME,
    JournalMismatchError,
    StudyError,
    StudyJournal,
    StudyLock,
    StudyLockedError,
    estimate_speedup,
    load_state,
    locate_journal,
    resume as engine_resume,
    run_benchmark,
    run_optimize,
)
from .journal import JournalCorruptError
from .space import GridTooLargeError, SpaceError

_KNOWN_ERRORS = (
    ConfigError,
    SpaceError,
    GridTooLargeError,
    StudyError,
    StudyLockedError,
    JournalMismatchError,
    JournalCorruptError,
    EvaluationError,
    results_mod.ResultError,
    FileNotFoundError,
    ValueError,
)


def _fail(message: str) -> int:
    flat = " ".join(str(message).split())
    print(f"error: {flat}", file=sys.stderr)
    return 1


def _make_cache(settings: StudySettings, study_dir: Path):
    if not settings.cache_enabled:
        return NullCache()
    root = Path(settings.cache_root) if settings.cache_root else study_dir / "cache"
    return ArtifactCache(root)


def _prepare_run(settings: StudySettings) -> tuple[Path, StudyLock, StudyJournal]:
    study_dir = Path(settings.output_dir)
    study_dir.mkdir(parents=True, exist_ok=True)
    journal_path = study_dir / JOURNAL_NAME
    if journal_path.exists():
        raise StudyError(
            f"{journal_path} already exists; use 'pipebench resume {study_dir}' to continue"
        )
    lock = StudyLock(study_dir).acquire()
    journal = StudyJournal(journal_path, on_append=lock.heartbeat)
    return study_dir, lock, journal


def _cmd_run(args: argparse.Namespace, mode: str) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    settings = load_config(text)
    if settings.mode != mode:
        raise ConfigError(f"config declares mode {settings.mode!r}, but '{mode}' was requested")
    if args.validate_only:
        print(f"ok: configuration valid ({len(settings.space.params)} parameters)")
        return 0
    study_dir, lock, journal = _prepare_run(settings)
    evaluator = make_evaluator(settings, persist_dir=study_dir / "models")
    cache = _make_cache(settings, study_dir)
    try:
        if mode == "benchmark":
            summary = run_benchmark(
                settings.space,
                evaluator,
                settings.grid_points,
                settings.repeats,
                journal,
                direction=settings.direction,
                seed=settings.seed,
                cache=cache,
                concurrency=settings.concurrency,
                max_failure_rate=settings.max_failure_rate,
                study_id=settings.study,
                config_fingerprint=settings.fingerprint,
                config_text=settings.text,
            )
            n_complete = sum(s.n_complete for s in summary.stats)
            n_failed = sum(s.n_failed for s in summary.stats)
            if summary.aborted:
                journal.close()
                return _fail(
                    f"benchmark aborted: failure rate exceeded "
                    f"({n_failed} failed, {n_complete} complete); partial results in {study_dir / RESULTS_NAME}"
                )
            best = summary.best(settings.direction)
            print(
                f"benchmark complete: {len(summary.stats)} configurations, "
                f"{n_complete} trials complete, {n_failed} failed"
            )
            print(f"best mean value: {best.mean:g} at {best.config.entries}")
        else:
            result = run_optimize(
                settings.space,
                evaluator,
                settings.sampler,
                settings.pruner,
                settings.budget,
                settings.direction,
                journal,
                seed=settings.seed,
                cache=cache,
                concurrency=settings.concurrency,
                study_id=settings.study,
                config_fingerprint=settings.fingerprint,
                config_text=settings.text,
            )
            flag = " (degraded: no trial completed)" if result.degraded else ""
            print(
                f"best value: {result.value:g} at trial {result.trial_id}{flag}"
            )
            print(f"best config: {result.config.entries}")
        print(f"results: {study_dir / RESULTS_NAME}")
        return 0
    finally:
        journal.close()
        lock.release()


def _cmd_resume(args: argparse.Namespace) -> int:
    study_dir = Path(args.study_dir)
    journal_path = locate_journal(study_dir)
    state = load_state(study_dir)
    meta = state.meta
    if meta is None or not meta.config_text:
        raise StudyError(f"{journal_path}: journal does not embed its configuration")
    settings = load_config(meta.config_text)
    if meta.config_fingerprint and settings.fingerprint != meta.config_fingerprint:
        raise JournalMismatchError("stored configuration no longer matches its fingerprint")
    lock = StudyLock(study_dir).acquire()
    evaluator = make_evaluator(settings, persist_dir=study_dir / "models")
    cache = _make_cache(settings, study_dir)
    try:
        outcome = engine_resume(
            study_dir,
            settings.space,
            evaluator,
            sampler=settings.sampler,
            pruner=settings.pruner,
            cache=cache,
            concurrency=settings.concurrency,
            max_failure_rate=settings.max_failure_rate,
        )
        if meta.mode == "benchmark":
            n_complete = sum(s.n_complete for s in outcome.stats)
            if outcome.aborted:
                return _fail(f"benchmark aborted on resume; partial results in {study_dir}")
            print(f"resume complete: {n_complete} trials complete")
        else:
            print(f"best value: {outcome.value:g} at trial {outcome.trial_id}")
            print(f"best config: {outcome.config.entries}")
        print(f"results: {study_dir / RESULTS_NAME}")
        return 0
    finally:
        lock.release()


def _cmd_export(args: argparse.Namespace) -> int:
    state = load_state(args.study_dir)
    columns, rows = results_mod.flatten_study(state)
    path = results_mod.export_csv(rows, args.out, columns=columns)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .server import serve

    serve(args.root, bind=args.bind, ui_dir=args.ui)
    return 0


def _cmd_speedup(args: argparse.Namespace) -> int:
    value = estimate_speedup(args.n, args.t, args.f)
    print(f"{value:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipebench",
        description="Benchmark and optimize conditional pipeline configuration spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for mode in ("benchmark", "optimize"):
        p = sub.add_parser(mode, help=f"run a {mode} study from a config file")
        p.add_argument("config", help="path to the YAML configuration")
        p.add_argument(
            "--validate-only",
            action="store_true",
            help="check the configuration and space, then exit",
        )
        p.set_defaults(func=lambda a, m=mode: _cmd_run(a, m))

    p = sub.add_parser("resume", help="continue an interrupted study")
    p.add_argument("study_dir", help="study directory containing journal.ndjson")
    p.set_defaults(func=_cmd_resume)

    p = sub.add_parser("export", help="flatten a study to CSV")
    p.add_argument("study_dir")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("serve", help="serve studies over HTTP for the explorer UI")
    p.add_argument("root", help="directory containing study directories")
    p.add_argument("--bind", default="127.0.0.1:8080", help="host:port to bind")
    p.add_argument("--ui", default=None, help="directory of built UI assets to serve at /")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("speedup", help="expected speedup of guided search vs exhaustive")
    p.add_argument("--n", type=int, required=True, help="number of grid configurations")
    p.add_argument("--t", type=int, required=True, help="number of optimization trials")
    p.add_argument("--f", type=float, required=True, help="mean cost fraction per trial")
    p.set_defaults(func=_cmd_speedup)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _KNOWN_ERRORS as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
