"""pipebench: benchmarking and budgeted search over conditional pipeline spaces."""

from .cache import ArtifactCache, ArtifactKey, NullCache, artifact_key
from .contract import EvaluationError
from .engine import (
    BenchmarkSummary,
    StudyResult,
    estimate_speedup,
    load_state,
    resume,
    run_benchmark,
    run_optimize,
)
from .journal import StudyJournal, replay_journal
from .mil import MILEvaluator, PipelineEffect, SyntheticGenSpec, auc
from .pruners import (
    HyperbandPruner,
    HyperbandSchedule,
    IntermediateCurve,
    MedianPruner,
    NoPruner,
    hyperband_assign_bracket,
    median_should_prune,
    sha_should_prune,
)
from .samplers import (
    GridSampler,
    ObservationHistory,
    RandomSampler,
    TPEParams,
    TPESampler,
    sample_random,
    sample_tpe,
)
from .space import (
    Condition,
    Configuration,
    ParamSpec,
    PipelineSpace,
    canonical_serialize,
    enumerate_grid,
    subconfig,
    validate_space,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactCache",
    "ArtifactKey",
    "BenchmarkSummary",
    "Condition",
    "Configuration",
    "EvaluationError",
    "GridSampler",
    "HyperbandPruner",
    "HyperbandSchedule",
    "IntermediateCurve",
    "MILEvaluator",
    "MedianPruner",
    "NoPruner",
    "NullCache",
    "ObservationHistory",
    "ParamSpec",
    "PipelineEffect",
    "PipelineSpace",
    "RandomSampler",
    "StudyJournal",
    "StudyResult",
    "SyntheticGenSpec",
    "TPEParams",
    "TPESampler",
    "artifact_key",
    "auc",
    "canonical_serialize",
    "enumerate_grid",
    "estimate_speedup",
    "hyperband_assign_bracket",
    "load_state",
    "median_should_prune",
    "replay_journal",
    "resume",
    "run_benchmark",
    "run_optimize",
    "sample_random",
    "sample_tpe",
    "sha_should_prune",
    "subconfig",
    "validate_space",
]
