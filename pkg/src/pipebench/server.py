"""Read-only HTTP service over study directories.

Serves study listings, flattened trial rows (with the filter/group/aggregate
mini-grammar), leaderboards, plot series, per-trial detail, and an
incremental event cursor for live polling. Every request replays the journal
fresh, which gives readers a prefix-consistent snapshot while a study is
still appending.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query

from . import results
from .engine import StudyState, build_state
from .journal import replay_journal
from .pruners import HyperbandSchedule
from .results import FilterError, ResultError, UnknownColumnError

JOURNAL_NAME = "journal.ndjson"


def _bad_request(reason: str, token: str | None = None) -> HTTPException:
    detail: dict = {"error": reason}
    if token is not None:
        detail["token"] = token
    return HTTPException(status_code=400, detail=detail)


def _not_found(reason: str, **fields: str) -> HTTPException:
    return HTTPException(status_code=404, detail={"error": reason, **fields})


def create_app(root: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    root = Path(root)
    app = FastAPI(title="pipebench explorer", docs_url=None, redoc_url=None)

    def study_ids() -> list[str]:
        if not root.is_dir():
            return []
        return sorted(p.parent.name for p in root.glob(f"*/{JOURNAL_NAME}"))

    def load(study_id: str) -> StudyState:
        path = root / study_id / JOURNAL_NAME
        if "/" in study_id or not path.exists():
            raise _not_found("unknown study", study=study_id)
        state = build_state(replay_journal(path))
        if state.meta is None:
            raise _not_found("study has no header yet", study=study_id)
        return state

    @app.get("/api/studies")
    def studies() -> dict:
        out = []
        for sid in study_ids():
            try:
                state = load(sid)
            except HTTPException:
                continue
            meta = state.meta
            out.append(
                {
                    "id": sid,
                    "mode": meta.mode,
                    "direction": meta.direction,
                    "metric": meta.metric,
                    "status": state.status,
                    "budget": meta.budget,
                    "counts": state.counts(),
                    "last_seq": state.last_seq,
                }
            )
        return {"studies": out}

    @app.get("/api/studies/{study_id}")
    def study_detail(study_id: str) -> dict:
        state = load(study_id)
        meta = state.meta
        return {
            "id": study_id,
            "mode": meta.mode,
            "direction": meta.direction,
            "metric": meta.metric,
            "seed": meta.seed,
            "status": state.status,
            "budget": meta.budget,
            "repeats": meta.repeats,
            "grid_points": meta.grid_points,
            "sampler": meta.sampler,
            "pruner": meta.pruner,
            "param_names": sorted(meta.param_names),
            "counts": state.counts(),
            "last_seq": state.last_seq,
        }

    @app.get("/api/studies/{study_id}/trials")
    def trials(
        study_id: str,
        filter: str | None = Query(default=None),
        group_by: str | None = Query(default=None),
        agg: str = Query(default="mean"),
        metric: str = Query(default="final_value"),
    ) -> dict:
        state = load(study_id)
        columns, rows = results.flatten_study(state)
        try:
            predicates = results.parse_filters(filter)
            kept = results.filter_rows(rows, predicates)
            if group_by:
                table = results.query(
                    kept,
                    group_by=[c.strip() for c in group_by.split(",") if c.strip()],
                    aggregate=agg,
                    metric=metric,
                    direction=state.meta.direction,
                )
                return {
                    "group_by": list(table.group_by),
                    "agg": table.aggregate,
                    "metric": table.metric,
                    "groups": [
                        {
                            "key": dict(zip(table.group_by, g.key)),
                            "count": g.count,
                            "value": g.value,
                        }
                        for g in table.groups
                    ],
                }
        except FilterError as exc:
            raise _bad_request("malformed filter", token=exc.token) from exc
        except UnknownColumnError as exc:
            raise _bad_request("unknown column", token=exc.column) from exc
        except ResultError as exc:
            raise _bad_request(str(exc)) from exc
        return {"columns": columns, "rows": kept}

    @app.get("/api/studies/{study_id}/leaderboard")
    def leaderboard(study_id: str, k: int = Query(default=10, ge=1)) -> dict:
        state = load(study_id)
        columns, rows = results.flatten_study(state)
        complete = [r for r in rows if r["state"] == "complete"]
        sign = 1.0 if state.meta.direction == "minimize" else -1.0
        complete.sort(key=lambda r: (sign * r["final_value"], r["trial_id"]))
        return {
            "direction": state.meta.direction,
            "metric": state.meta.metric,
            "columns": columns,
            "rows": complete[:k],
        }

    @app.get("/api/studies/{study_id}/plot")
    def plot(
        study_id: str,
        x: str,
        y: str,
        group_by: str | None = Query(default=None),
        transform: str | None = Query(default=None),
    ) -> dict:
        state = load(study_id)
        _, rows = results.flatten_study(state)
        try:
            series = results.plot_series(
                rows,
                x,
                y,
                group_by=group_by,
                transform=transform,
                direction=state.meta.direction,
            )
        except UnknownColumnError as exc:
            raise _bad_request("unknown column", token=exc.column) from exc
        except ResultError as exc:
            raise _bad_request(str(exc)) from exc
        return {
            "x": x,
            "y": y,
            "series": [
                {"label": s.label, "points": [[px, py] for px, py in s.points]}
                for s in series
            ],
        }

    @app.get("/api/studies/{study_id}/trials/{trial_id}")
    def trial_detail(study_id: str, trial_id: int) -> dict:
        state = load(study_id)
        trial = state.trials.get(trial_id)
        if trial is None:
            raise _not_found("unknown trial", study=study_id, trial=str(trial_id))
        rungs: list[int] = []
        pruner = state.meta.pruner or {}
        if pruner.get("type") == "hyperband" and trial.bracket is not None:
            schedule = HyperbandSchedule(
                r_min=pruner["r_min"], R=pruner["R"], eta=pruner["eta"]
            )
            rungs = list(schedule.bracket_rungs(trial.bracket))
        return {
            "trial_id": trial.id,
            "state": trial.state,
            "seed": trial.seed,
            "bracket": trial.bracket,
            "config": trial.config.entries,
            "final_value": trial.final_value,
            "error": trial.error,
            "curve": [[step, value] for step, value in trial.points],
            "cache_hits": trial.cache_hits,
            "rungs": rungs,
        }

    @app.get("/api/studies/{study_id}/events")
    def events(study_id: str, since: int = Query(default=0, ge=0)) -> dict:
        path = root / study_id / JOURNAL_NAME
        if "/" in study_id or not path.exists():
            raise _not_found("unknown study", study=study_id)
        all_events = replay_journal(path)
        newer = [e for e in all_events if e["seq"] > since]
        last_seq = all_events[-1]["seq"] if all_events else 0
        return {"events": newer, "last_seq": last_seq}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    root: str | Path, bind: str = "127.0.0.1:8080", ui_dir: str | Path | None = None
) -> None:
    """Run the explorer service until interrupted."""
    import uvicorn

    host, _, port = bind.partition(":")
    uvicorn.run(create_app(root, ui_dir=ui_dir), host=host or "127.0.0.1", port=int(port or 8080))
