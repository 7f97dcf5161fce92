from .bench import BenchReport, bench_memory
from .config import ExperimentConfig, parse_config, parse_config_text, write_resolved
from .experiment import RunArtifact, SweepResult, TargetComparison, compare_targets, run_experiment, sweep, write_scores
from .metrics import aggregate_scores, summarize

__all__ = [
    "BenchReport",
    "ExperimentConfig",
    "RunArtifact",
    "SweepResult",
    "TargetComparison",
    "aggregate_scores",
    "bench_memory",
    "compare_targets",
    "parse_config",
    "parse_config_text",
    "run_experiment",
    "summarize",
    "sweep",
    "write_resolved",
    "write_scores",
]
