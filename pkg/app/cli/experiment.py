"""Run orchestration: seed replicas, per-seed metrics, summary, plots, sweeps and target comparisons."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from app.core.models import MetricsRecord
from app.trainer import TrainerConfig, train

from .config import ExperimentConfig, write_resolved
from .metrics import (
    SCORE_COLUMNS,
    SUMMARY_COLUMNS,
    TARGET_COLUMNS,
    aggregate_scores,
    read_csv,
    seed_curve,
    summarize,
    target_rows,
    write_csv,
    write_metrics,
)
from .plots import Series, write_svg

logger = logging.getLogger(__name__)

PARTIAL_MARKER = "PARTIAL"
SWEEP_PARAMS = {
    "lambda": "algo.lambda",
    "table_capacity": "memory.table_capacity",
    "m_size": "memory.mset_capacity",
    "projection_dim": "memory.projection_dim",
}


@dataclass
class RunArtifact:
    out_dir: Path
    config_path: Path
    metrics_paths: Dict[int, Path] = field(default_factory=dict)
    summary_path: Optional[Path] = None
    plot_path: Optional[Path] = None
    failed_seeds: List[int] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.failed_seeds)

    def files(self) -> List[str]:
        paths = [self.config_path, *self.metrics_paths.values(), self.summary_path, self.plot_path]
        return [p.name for p in paths if p is not None and p.exists()]


def run_replica(config: TrainerConfig) -> List[MetricsRecord]:
    return list(train(config))


def _run_all(config: ExperimentConfig, workers: int) -> List[Tuple[int, Optional[List[MetricsRecord]], Optional[str]]]:
    configs = [config.trainer_config(seed) for seed in config.seeds]
    results: List[Tuple[int, Optional[List[MetricsRecord]], Optional[str]]] = []
    if workers <= 1 or len(configs) == 1:
        for trainer_config in configs:
            try:
                results.append((trainer_config.seed, run_replica(trainer_config), None))
            except Exception as exc:
                logger.exception("[experiment] seed=%s failed", trainer_config.seed)
                results.append((trainer_config.seed, None, str(exc)))
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [(c.seed, pool.submit(run_replica, c)) for c in configs]
        for seed, future in futures:
            try:
                results.append((seed, future.result(), None))
            except Exception as exc:
                logger.exception("[experiment] seed=%s failed", seed)
                results.append((seed, None, str(exc)))
    return results


def run_experiment(
    config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None, workers: Optional[int] = None
) -> RunArtifact:
    out = config.output_dir(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / PARTIAL_MARKER
    if marker.exists():
        marker.unlink()
    artifact = RunArtifact(out_dir=out, config_path=write_resolved(config, out))
    logger.info("[experiment] name=%s seeds=%s out=%s", config.name, config.seeds, out)

    curves = []
    t = config.training
    for seed, records, error in _run_all(config, workers or config.output.workers):
        if records is None:
            artifact.failed_seeds.append(seed)
            continue
        path = write_metrics(out / f"metrics_seed{seed}.csv", records)
        artifact.metrics_paths[seed] = path
        curves.append(seed_curve(read_csv(path), t.eval_interval, t.total_steps))

    if artifact.partial:
        marker.write_text(
            "".join(f"seed {s} failed\n" for s in artifact.failed_seeds), encoding="utf-8", newline="\n"
        )
        logger.error("[experiment] partial run, failed seeds=%s", artifact.failed_seeds)
        return artifact

    rows = summarize(curves)
    artifact.summary_path = write_csv(out / "summary.csv", SUMMARY_COLUMNS, rows)
    artifact.plot_path = write_svg(
        out / "curve.svg",
        [_summary_series(config.name, rows)],
        title=f"{config.env.name}: {config.algo.mixer.value}/{config.algo.memory.value}",
        y_label="evaluation return",
    )
    return artifact


def _summary_series(label: str, rows: Sequence[Dict[str, Any]]) -> Series:
    return Series(
        label=label,
        xs=[r["step"] for r in rows],
        ys=[r["return_median"] for r in rows],
        lower=[r["return_p25"] for r in rows],
        upper=[r["return_p75"] for r in rows],
    )


@dataclass
class SweepResult:
    parameter: str
    cells: List[Tuple[Any, RunArtifact]]
    plot_path: Optional[Path] = None

    @property
    def partial(self) -> bool:
        return any(artifact.partial for _, artifact in self.cells)


def sweep(
    config: ExperimentConfig,
    parameter: str,
    values: Sequence[Any],
    out_dir: Optional[Union[str, Path]] = None,
    workers: Optional[int] = None,
) -> SweepResult:
    if parameter not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {sorted(SWEEP_PARAMS)}")
    root = config.output_dir(out_dir)
    result = SweepResult(parameter, [])
    series = []
    for value in values:
        cell = config.with_value(SWEEP_PARAMS[parameter], value)
        artifact = run_experiment(cell, root / f"{parameter}={value}", workers)
        result.cells.append((value, artifact))
        if artifact.summary_path is not None:
            series.append(_summary_series(f"{parameter}={value}", read_csv_rows(artifact.summary_path)))
    result.plot_path = write_svg(
        root / "sweep.svg", series, title=f"{config.env.name}: sweep over {parameter}", y_label="evaluation return"
    )
    logger.info("[sweep] parameter=%s cells=%s", parameter, len(result.cells))
    return result


def read_csv_rows(path: Path) -> List[Dict[str, Any]]:
    return [{k: (float(v) if k != "step" else int(v)) for k, v in row.items()} for row in read_csv(path)]


@dataclass
class TargetComparison:
    artifact: RunArtifact
    rows: List[Dict[str, object]]
    csv_path: Optional[Path] = None
    plot_path: Optional[Path] = None


def compare_targets(config: ExperimentConfig, out_dir: Optional[Union[str, Path]] = None) -> TargetComparison:
    """Train, then report mean y, E_s and E_s^u per evaluation point on one chart."""
    artifact = run_experiment(config, out_dir)
    t = config.training
    per_seed = [read_csv(path) for path in artifact.metrics_paths.values()]
    rows = target_rows(per_seed, t.eval_interval, t.total_steps)
    comparison = TargetComparison(artifact, rows)
    comparison.csv_path = write_csv(artifact.out_dir / "targets.csv", TARGET_COLUMNS, rows)
    series = []
    for column, label in (("mean_y", "y"), ("mean_E_s", "E_s"), ("mean_E_su", "E_s^u")):
        points = [(r["step"], r[column]) for r in rows if r[column] is not None]
        if points:
            series.append(Series(label, [p[0] for p in points], [p[1] for p in points]))
    comparison.plot_path = write_svg(
        artifact.out_dir / "targets.svg", series, title=f"{config.env.name}: targets", y_label="mean target"
    )
    return comparison


def write_scores(run_dirs: Sequence[Union[str, Path]], out_path: Union[str, Path]) -> Path:
    return write_csv(out_path, SCORE_COLUMNS, aggregate_scores(run_dirs))
