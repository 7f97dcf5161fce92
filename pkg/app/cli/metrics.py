"""Metrics CSV files, the across-seed summary and the across-environment scores.

CSV files are UTF-8 with LF line endings and a header row. Floats are
written with ``repr`` so a rerun reproduces every byte.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from app.core.models import METRICS_COLUMNS, MetricsRecord

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "step",
    "seeds",
    "return_median",
    "return_p25",
    "return_p75",
    "success_mean",
    "success_median",
    "success_p25",
    "success_p75",
)
TARGET_COLUMNS = ("step", "mean_y", "mean_E_s", "mean_E_su")
SCORE_COLUMNS = ("step", "mean_score", "median_score")


def format_value(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Iterable[Mapping[str, object]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_metrics(path: Union[str, Path], records: Sequence[MetricsRecord]) -> Path:
    return write_csv(path, METRICS_COLUMNS, (r.as_row() for r in records))


def _float(text: str) -> Optional[float]:
    return float(text) if text != "" else None


def eval_point(step: int, eval_interval: int, total_steps: int) -> int:
    """Nominal evaluation point of a record: the boundary it was emitted for."""
    if step >= total_steps:
        return total_steps
    return (step // eval_interval) * eval_interval


@dataclass
class SeedCurve:
    points: List[int]
    returns: List[float]
    successes: List[float]


def seed_curve(rows: Sequence[Mapping[str, str]], eval_interval: int, total_steps: int) -> SeedCurve:
    curve = SeedCurve([], [], [])
    for row in rows:
        ret = _float(row["eval_return_mean"])
        if ret is None:
            continue
        curve.points.append(eval_point(int(row["step"]), eval_interval, total_steps))
        curve.returns.append(ret)
        curve.successes.append(_float(row["eval_success_rate"]) or 0.0)
    return curve


def summarize(curves: Sequence[SeedCurve]) -> List[Dict[str, object]]:
    """Median and 25/75 percentiles across seeds at every evaluation point all seeds reached."""
    if not curves:
        return []
    by_seed = [dict(zip(c.points, zip(c.returns, c.successes))) for c in curves]
    common = sorted(set.intersection(*(set(d) for d in by_seed)))
    rows = []
    for point in common:
        returns = np.array([d[point][0] for d in by_seed])
        successes = np.array([d[point][1] for d in by_seed])
        r25, r50, r75 = np.percentile(returns, [25, 50, 75])
        s25, s50, s75 = np.percentile(successes, [25, 50, 75])
        rows.append(
            {
                "step": point,
                "seeds": len(curves),
                "return_median": float(r50),
                "return_p25": float(r25),
                "return_p75": float(r75),
                "success_mean": float(np.mean(successes)),
                "success_median": float(s50),
                "success_p25": float(s25),
                "success_p75": float(s75),
            }
        )
    return rows


def target_rows(per_seed: Sequence[Sequence[Mapping[str, str]]], eval_interval: int, total_steps: int) -> List[Dict[str, object]]:
    """Per evaluation point: mean of y, E_s and E_s^u across seeds (blank where never logged)."""
    collected: Dict[int, Dict[str, List[float]]] = {}
    for rows in per_seed:
        for row in rows:
            point = eval_point(int(row["step"]), eval_interval, total_steps)
            bucket = collected.setdefault(point, {c: [] for c in TARGET_COLUMNS[1:]})
            for column in TARGET_COLUMNS[1:]:
                value = _float(row[column])
                if value is not None:
                    bucket[column].append(value)
    out = []
    for point in sorted(collected):
        bucket = collected[point]
        if not bucket["mean_y"]:
            continue
        out.append({"step": point, **{c: (float(np.mean(v)) if v else None) for c, v in bucket.items()}})
    return out


def aggregate_scores(run_dirs: Sequence[Union[str, Path]]) -> List[Dict[str, object]]:
    """Mean and median across runs of the per-run mean success rate, at points every run evaluated."""
    tables = []
    for run_dir in run_dirs:
        rows = read_csv(Path(run_dir) / "summary.csv")
        tables.append({int(r["step"]): float(r["success_mean"]) for r in rows})
    if not tables:
        return []
    common = sorted(set.intersection(*(set(t) for t in tables)))
    out = []
    for step in common:
        scores = np.array([t[step] for t in tables])
        out.append({"step": step, "mean_score": float(np.mean(scores)), "median_score": float(np.median(scores))})
    logger.info("[scores] runs=%s points=%s", len(tables), len(out))
    return out
