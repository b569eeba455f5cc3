"""Result flattening, query grammar, plot series, CSV round-trips."""

from __future__ import annotations

import pytest

from pipebench.engine import load_state, run_benchmark, run_optimize
from pipebench.pruners import MedianPruner
from pipebench.results import (
    INACTIVE,
    FilterError,
    ResultError,
    UnknownColumnError,
    best_so_far,
    export_csv,
    filter_rows,
    flatten_study,
    load_csv,
    parse_filters,
    plot_series,
    query,
)
from pipebench.samplers import RandomSampler
from pipebench.testing import AnalyticEvaluator

from conftest import analytic_space, fresh_journal


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("results")
    space = analytic_space()
    journal = fresh_journal(tmp, "study")
    run_optimize(
        space, AnalyticEvaluator(space), RandomSampler(),
        MedianPruner(warmup_trials=3), 12, "minimize", journal, seed=2, study_id="study",
    )
    journal.close()
    return load_state(tmp / "study")


@pytest.fixture(scope="module")
def rows(study):
    return flatten_study(study)[1]


class TestFlatten:
    def test_one_row_per_trial(self, study, rows):
        assert len(rows) == len(study.trials)
        assert [r["trial_id"] for r in rows] == sorted(study.trials)

    def test_inactive_conditionals_marked(self, rows):
        for row in rows:
            if row["agg"] == "A":
                assert row["heads"] == INACTIVE
            else:
                assert isinstance(row["heads"], int)

    def test_columns_consistent(self, study, rows):
        columns = flatten_study(study)[0]
        for row in rows:
            assert list(row.keys()) == columns


class TestQuery:
    def test_partition_law(self, rows):
        table = query(rows, group_by=["agg"], aggregate="count")
        assert sum(g.count for g in table.groups) == len(rows)
        assert len(table.groups) == len({r["agg"] for r in rows})

    def test_filter_state_complete_matches_journal(self, study, rows):
        kept = filter_rows(rows, parse_filters("state=complete"))
        assert len(kept) == study.counts()["complete"]

    def test_numeric_range_filters(self, rows):
        kept = filter_rows(rows, parse_filters("x>=0.5"))
        assert all(r["x"] >= 0.5 for r in kept)
        kept = filter_rows(rows, parse_filters("x>=0.2,x<=0.4"))
        assert all(0.2 <= r["x"] <= 0.4 for r in kept)

    def test_group_mean_matches_manual(self, rows):
        table = query(rows, "state=complete", group_by=["agg"], aggregate="mean")
        for group in table.groups:
            manual = [
                r["final_value"] for r in rows
                if r["state"] == "complete" and (r["agg"],) == group.key
            ]
            assert group.value == pytest.approx(sum(manual) / len(manual))
            assert group.count == len(manual)

    def test_aggregate_consistency_invariant(self, rows):
        filtered = filter_rows(rows, parse_filters("state=complete"))
        table = query(rows, "state=complete", group_by=["agg"], aggregate="mean")
        grand = sum(g.value * g.count for g in table.groups)
        assert grand == pytest.approx(sum(r["final_value"] for r in filtered), abs=1e-9)

    def test_best_is_direction_aware(self, rows):
        lo = query(rows, "state=complete", aggregate="best", direction="minimize")
        hi = query(rows, "state=complete", aggregate="best", direction="maximize")
        values = [r["final_value"] for r in rows if r["state"] == "complete"]
        assert lo.groups[0].value == min(values)
        assert hi.groups[0].value == max(values)

    def test_unknown_column_named(self, rows):
        with pytest.raises(UnknownColumnError, match="nonsense"):
            query(rows, group_by=["nonsense"])
        with pytest.raises(UnknownColumnError, match="ghost"):
            filter_rows(rows, parse_filters("ghost=1"))

    def test_malformed_filter_names_token(self):
        with pytest.raises(FilterError) as exc:
            parse_filters("state=complete,???")
        assert exc.value.token == "???"


class TestPlotSeries:
    def test_monotone_x_single_series(self, rows):
        series = plot_series(rows, "trial_id", "last_value")
        assert len(series) == 1
        xs = [p[0] for p in series[0].points]
        assert xs == sorted(xs)

    def test_grouping_labels(self, rows):
        series = plot_series(rows, "trial_id", "last_value", group_by="agg")
        labels = {s.label for s in series}
        assert labels == {f"agg={v}" for v in {r['agg'] for r in rows}}

    def test_best_so_far_transform(self):
        assert best_so_far([0.4, 0.5, 0.3]) == [0.4, 0.4, 0.3]
        assert best_so_far([0.4, 0.5, 0.3], "maximize") == [0.4, 0.5, 0.5]
        rows = [
            {"trial_id": i, "v": v} for i, v in enumerate([0.4, 0.5, 0.3])
        ]
        series = plot_series(rows, "trial_id", "v", transform="best_so_far")
        assert [p[1] for p in series[0].points] == [0.4, 0.4, 0.3]

    def test_non_numeric_y_rejected(self, rows):
        with pytest.raises(ResultError, match="not numeric"):
            plot_series(rows, "trial_id", "state")


class TestCSV:
    def test_header_arithmetic(self, rows, tmp_path):
        path = export_csv(rows, tmp_path / "out.csv")
        lines = path.read_text().strip().splitlines()
        assert len(lines) == len(rows) + 1

    def test_comma_value_quoted(self, tmp_path):
        rows = [{"a": "x,y", "b": 1}]
        path = export_csv(rows, tmp_path / "q.csv")
        assert '"x,y"' in path.read_text()

    def test_round_trip_idempotent(self, rows, tmp_path):
        first = export_csv(rows, tmp_path / "a.csv")
        header, loaded = load_csv(first)
        second = export_csv(loaded, tmp_path / "b.csv", columns=header)
        assert first.read_bytes() == second.read_bytes()

    def test_types_survive_round_trip(self, rows, tmp_path):
        path = export_csv(rows, tmp_path / "t.csv")
        _, loaded = load_csv(path)
        for original, parsed in zip(rows, loaded):
            assert parsed["trial_id"] == original["trial_id"]
            assert parsed["state"] == original["state"]
            if original["final_value"] is not None:
                assert parsed["final_value"] == original["final_value"]
            for key, value in original.items():
                if isinstance(value, str):
                    assert parsed[key] == value

    def test_empty_export_rejected(self, tmp_path):
        with pytest.raises(ResultError):
            export_csv([], tmp_path / "none.csv")


class TestJournalFidelity:
    def test_rows_derivable_from_replay_alone(self, tmp_path):
        space = analytic_space()
        journal = fresh_journal(tmp_path, "fid")
        run_benchmark(space, AnalyticEvaluator(space), 2, 2, journal, study_id="fid")
        journal.close()
        state = load_state(tmp_path / "fid")
        columns, rows = flatten_study(state)
        csv_path = tmp_path / "fid" / "results.csv"
        assert csv_path.exists()
        regenerated = export_csv(rows, tmp_path / "regen.csv", columns=columns)
        assert regenerated.read_bytes() == csv_path.read_bytes()
