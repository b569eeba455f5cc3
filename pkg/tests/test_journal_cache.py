"""Journal durability/replay and artifact-cache semantics."""

from __future__ import annotations

import threading
import time

import pytest

from pipebench.cache import ArtifactCache, ArtifactKey, NullCache, artifact_key
from pipebench.journal import (
    EV_STATE_CHANGED,
    EV_STUDY_STARTED,
    EV_TRIAL_CREATED,
    EV_VALUE_REPORTED,
    JournalCorruptError,
    StudyJournal,
    replay_journal,
)
from pipebench.space import Configuration
from pipebench.testing import minimal_space


def make_journal(tmp_path, name="journal.ndjson", **kwargs):
    return StudyJournal(tmp_path / name, **kwargs)


def started_payload():
    return {
        "study_id": "s",
        "mode": "optimize",
        "direction": "minimize",
        "seed": 0,
        "space": {"name": "m", "params": []},
        "space_fingerprint": "f" * 64,
    }


class TestJournal:
    def test_append_and_replay(self, tmp_path):
        journal = make_journal(tmp_path)
        journal.append(EV_STUDY_STARTED, started_payload())
        journal.append(EV_TRIAL_CREATED, {"id": 0, "seed": 1, "config": {"x": 0.5}})
        journal.append(EV_VALUE_REPORTED, {"id": 0, "step": 1, "value": 0.25})
        journal.close()
        events = replay_journal(journal.path)
        assert [e["seq"] for e in events] == [1, 2, 3]
        assert events[2]["value"] == 0.25

    def test_torn_tail_dropped(self, tmp_path):
        journal = make_journal(tmp_path)
        journal.append(EV_STUDY_STARTED, started_payload())
        journal.append(EV_VALUE_REPORTED, {"id": 0, "step": 1, "value": 0.5})
        journal.close()
        raw = journal.path.read_text()
        lines = raw.splitlines()
        torn = lines[0] + "\n" + lines[1][: len(lines[1]) // 2]
        journal.path.write_text(torn)
        events = replay_journal(journal.path)
        assert len(events) == 1 and events[0]["event"] == EV_STUDY_STARTED

    def test_interior_corruption_refused(self, tmp_path):
        journal = make_journal(tmp_path)
        for i in range(3):
            journal.append(EV_VALUE_REPORTED, {"id": 0, "step": i + 1, "value": 0.1})
        journal.close()
        lines = journal.path.read_text().splitlines()
        lines[1] = lines[1][:10] + "garbage" + lines[1][10:]
        journal.path.write_text("\n".join(lines) + "\n")
        with pytest.raises(JournalCorruptError):
            replay_journal(journal.path)

    def test_checksum_detects_bit_flip(self, tmp_path):
        journal = make_journal(tmp_path)
        journal.append(EV_VALUE_REPORTED, {"id": 0, "step": 1, "value": 0.5})
        journal.append(EV_VALUE_REPORTED, {"id": 0, "step": 2, "value": 0.5})
        journal.close()
        lines = journal.path.read_text().splitlines()
        # Flip a digit inside a valid-JSON line: still parses, crc must catch it.
        flipped = lines[0].replace('"value":0.5', '"value":0.6')
        assert flipped != lines[0]
        journal.path.write_text(flipped + "\n" + lines[1] + "\n")
        with pytest.raises(JournalCorruptError):
            replay_journal(journal.path)

    def test_sequence_continues_after_reopen(self, tmp_path):
        journal = make_journal(tmp_path)
        journal.append(EV_STUDY_STARTED, started_payload())
        journal.close()
        journal2 = make_journal(tmp_path)
        seq = journal2.append(EV_TRIAL_CREATED, {"id": 0, "seed": 0, "config": {}})
        journal2.close()
        assert seq == 2
        events = replay_journal(journal2.path)
        assert [e["seq"] for e in events] == [1, 2]

    def test_reopen_compacts_torn_tail(self, tmp_path):
        journal = make_journal(tmp_path)
        journal.append(EV_STUDY_STARTED, started_payload())
        journal.append(EV_VALUE_REPORTED, {"id": 0, "step": 1, "value": 0.5})
        journal.close()
        raw = journal.path.read_text().splitlines()
        journal.path.write_text(raw[0] + "\n" + raw[1][:20])
        journal2 = make_journal(tmp_path)
        seq = journal2.append(EV_STATE_CHANGED, {"id": 0, "state": "running"})
        journal2.close()
        assert seq == 2
        events = replay_journal(journal2.path)
        assert [e["event"] for e in events] == [EV_STUDY_STARTED, EV_STATE_CHANGED]

    def test_unknown_event_type_rejected(self, tmp_path):
        journal = make_journal(tmp_path)
        with pytest.raises(Exception, match="unknown event"):
            journal.append("nonsense", {})
        journal.close()

    def test_float_values_round_trip_exactly(self, tmp_path):
        journal = make_journal(tmp_path)
        value = 0.1 + 0.2  # 0.30000000000000004
        journal.append(EV_VALUE_REPORTED, {"id": 0, "step": 1, "value": value})
        journal.close()
        events = replay_journal(journal.path)
        assert events[0]["value"] == value

    def test_on_append_hook_fires(self, tmp_path):
        calls = []
        journal = make_journal(tmp_path, on_append=lambda: calls.append(1))
        journal.append(EV_STUDY_STARTED, started_payload())
        journal.append(EV_TRIAL_CREATED, {"id": 0, "seed": 0, "config": {}})
        journal.close()
        assert len(calls) == 2


class TestArtifactKey:
    def test_equal_subconfigs_equal_keys(self):
        space = minimal_space()
        a = Configuration.from_dict("minimal", {
            "tiling_choice": "only", "normalization_choice": "only",
            "feature_extractor_choice": "only", "aggregator_choice": "only",
            "training_choice": "only",
        })
        k1 = artifact_key(space, a, ("tiling", "normalization"), label="bags")
        k2 = artifact_key(space, a, ("normalization", "tiling"), label="bags")
        assert k1 == k2
        assert k1.stage_set == ("tiling", "normalization")

    def test_distinct_subconfigs_distinct_keys(self):
        space = minimal_space()
        base = {
            "tiling_choice": "only", "normalization_choice": "only",
            "feature_extractor_choice": "only", "aggregator_choice": "only",
            "training_choice": "only",
        }
        a = Configuration.from_dict("minimal", base)
        k1 = artifact_key(space, a, ("tiling",))
        k2 = artifact_key(space, a, ("tiling", "normalization"))
        assert k1 != k2


class TestArtifactCache:
    def key(self, digest="d" * 64):
        return ArtifactKey(stage_set=("tiling", "normalization"), digest=digest, label="bags")

    def test_miss_then_hit(self, tmp_path):
        cache = ArtifactCache(tmp_path)
        calls = []

        def producer():
            calls.append(1)
            return {"data": [1, 2, 3]}

        value, hit = cache.get_or_compute(self.key(), producer)
        assert not hit and value == {"data": [1, 2, 3]}
        value2, hit2 = cache.get_or_compute(self.key(), producer)
        assert hit2 and value2 == value
        assert len(calls) == 1

    def test_distinct_keys_both_miss(self, tmp_path):
        cache = ArtifactCache(tmp_path)
        _, hit_a = cache.get_or_compute(self.key("a" * 64), lambda: 1)
        _, hit_b = cache.get_or_compute(self.key("b" * 64), lambda: 2)
        assert not hit_a and not hit_b

    def test_corrupted_artifact_recomputed(self, tmp_path):
        cache = ArtifactCache(tmp_path)
        key = self.key()
        cache.get_or_compute(key, lambda: "original")
        path = cache.path_for(key)
        blob = bytearray(path.read_bytes())
        blob[-1] ^= 0xFF
        path.write_bytes(bytes(blob))
        calls = []

        def producer():
            calls.append(1)
            return "recomputed"

        value, hit = cache.get_or_compute(key, producer)
        assert not hit and value == "recomputed" and calls == [1]
        value2, hit2 = cache.get_or_compute(key, lambda: "never")
        assert hit2 and value2 == "recomputed"

    def test_concurrent_misses_single_producer(self, tmp_path):
        cache = ArtifactCache(tmp_path)
        key = self.key()
        calls = []
        lock = threading.Lock()
        results = []

        def producer():
            with lock:
                calls.append(1)
            time.sleep(0.05)
            return "artifact"

        def worker():
            value, _ = cache.get_or_compute(key, producer)
            results.append(value)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(calls) == 1
        assert results == ["artifact"] * 8

    def test_null_cache_always_computes(self):
        cache = NullCache()
        calls = []
        for _ in range(3):
            value, hit = cache.get_or_compute(self.key(), lambda: calls.append(1) or "v")
            assert not hit
        assert len(calls) == 3
