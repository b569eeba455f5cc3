"""Content-addressed artifact cache for preprocessing subconfigurations.

Artifacts are keyed by the digest of the canonical serialization of the
stage-restricted subconfiguration, stored with an integrity header, and
written atomically (temp file + rename). A per-key file lock gives the
single-producer guarantee under concurrent misses.
"""

from __future__ import annotations

import hashlib
import os
import pickle
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from filelock import FileLock

from .space import STAGES, Configuration, PipelineSpace, canonical_serialize, subconfig

_HEADER_LEN = 32  # sha256 digest bytes prepended to the pickled payload


class CacheError(RuntimeError):
    pass


def ordered_stage_set(stages: Iterable[str]) -> tuple[str, ...]:
    """Stage names in fixed pipeline order, the canonical key prefix."""
    wanted = set(stages)
    unknown = wanted - set(STAGES)
    if unknown:
        raise CacheError(f"unknown stages: {sorted(unknown)}")
    return tuple(s for s in STAGES if s in wanted)


@dataclass(frozen=True)
class ArtifactKey:
    """Identity of one cached artifact.

    Equal subconfigurations yield equal digests; a 256-bit digest collision
    is treated as equality (accepted risk).
    """

    stage_set: tuple[str, ...]
    digest: str
    label: str = "artifact"

    @property
    def relpath(self) -> Path:
        return Path("+".join(self.stage_set)) / f"{self.label}-{self.digest}.pkl"

    def __str__(self) -> str:
        return f"{'+'.join(self.stage_set)}/{self.label}-{self.digest[:12]}"


def artifact_key(
    space: PipelineSpace,
    config: Configuration,
    stages: Iterable[str],
    label: str = "artifact",
) -> ArtifactKey:
    stage_set = ordered_stage_set(stages)
    sub = subconfig(space, config, stage_set)
    digest = hashlib.sha256(canonical_serialize(sub)).hexdigest()
    return ArtifactKey(stage_set=stage_set, digest=digest, label=label)


def _dump(path: Path, value: Any) -> None:
    payload = pickle.dumps(value, protocol=4)
    digest = hashlib.sha256(payload).digest()
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(digest)
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _load(path: Path) -> Any:
    blob = path.read_bytes()
    if len(blob) <= _HEADER_LEN:
        raise CacheError(f"{path}: truncated artifact")
    digest, payload = blob[:_HEADER_LEN], blob[_HEADER_LEN:]
    if hashlib.sha256(payload).digest() != digest:
        raise CacheError(f"{path}: integrity check failed")
    return pickle.loads(payload)


class ArtifactCache:
    """Filesystem-backed cache rooted at one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, key: ArtifactKey) -> Path:
        return self.root / key.relpath

    def get_or_compute(self, key: ArtifactKey, producer: Callable[[], Any]) -> tuple[Any, bool]:
        """Return (artifact, hit). Exactly one concurrent caller produces.

        A stored artifact that fails its integrity check is treated as a
        miss and recomputed in place.
        """
        path = self.path_for(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(path) + ".lock")
        with lock:
            if path.exists():
                try:
                    return _load(path), True
                except (CacheError, pickle.UnpicklingError, EOFError):
                    path.unlink()
            value = producer()
            _dump(path, value)
            return value, False


class NullCache:
    """Cache stand-in that always recomputes; used when caching is disabled."""

    def __init__(self) -> None:
        self._lock = threading.Lock()

    def get_or_compute(self, key: ArtifactKey, producer: Callable[[], Any]) -> tuple[Any, bool]:
        return producer(), False
