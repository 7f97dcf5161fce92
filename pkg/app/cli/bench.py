"""SEM vs SAEM space/time benchmark on a synthetic flush workload.

Counts come from the tables' own counters; byte figures describe the
snapshot record layout, not any other implementation.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np

from app.envs.base import joint_actions
from app.memory import MemoryKey, ReturnSet, SaemTable, SemTable, saem_merge, sem_merge
from app.memory.snapshot import record_dtype

logger = logging.getLogger(__name__)


@dataclass
class BenchReport:
    n_agents: int
    n_actions: int
    mset: int
    flushes: int
    key_dim: int
    sem_tables: int
    saem_tables: int
    saem_table_bound: int
    sem_flush_touches: List[int] = field(default_factory=list)
    saem_flush_touches: List[int] = field(default_factory=list)
    distinct_joint_actions: List[int] = field(default_factory=list)
    sem_bytes_per_entry: int = 0
    saem_bytes_per_entry: int = 0
    capacity: int = 0
    sem_projected_bytes: int = 0
    saem_projected_bytes: int = 0
    sem_flush_ms: float = 0.0
    saem_flush_ms: float = 0.0

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


def bench_memory(
    n_agents: int = 2,
    n_actions: int = 5,
    flushes: int = 10,
    mset: int = 500,
    key_count: int = 1000,
    key_dim: int = 4,
    capacity: int = 1_000_000,
    adversarial: bool = True,
    seed: int = 0,
) -> BenchReport:
    """Fill M ``flushes`` times and flush the same items into a SEM table and a SAEM family.

    ``adversarial`` walks the joint actions in order so each M holds
    min(|M|, |U|^n) distinct ones; otherwise joint actions are drawn uniformly.
    """
    if min(n_agents, n_actions, flushes, mset, key_count, key_dim, capacity) <= 0:
        raise ValueError("benchmark parameters must be positive")
    rng = np.random.default_rng(seed)
    all_joint = joint_actions(n_agents, n_actions)
    n_joint = len(all_joint)
    pool = [MemoryKey(tuple(int(c) for c in row), 1e6) for row in rng.integers(-10**6, 10**6, size=(key_count, key_dim))]

    sem, saem = SemTable(capacity), SaemTable(capacity)
    report = BenchReport(
        n_agents=n_agents,
        n_actions=n_actions,
        mset=mset,
        flushes=flushes,
        key_dim=key_dim,
        sem_tables=0,
        saem_tables=0,
        saem_table_bound=n_joint,
        capacity=capacity,
    )
    sem_seconds = saem_seconds = 0.0
    cursor = 0
    for _ in range(flushes):
        m = ReturnSet(mset)
        while not m.full:
            if adversarial:
                joint = all_joint[cursor % n_joint]
                cursor += 1
            else:
                joint = all_joint[int(rng.integers(n_joint))]
            m.push(pool[int(rng.integers(key_count))], float(rng.normal()), tuple(int(a) for a in joint))
        items = m.drain()
        report.distinct_joint_actions.append(len({item.joint_action for item in items}))

        started = time.perf_counter()
        sem_stats = sem_merge(sem, items)
        sem_seconds += time.perf_counter() - started
        started = time.perf_counter()
        saem_stats = saem_merge(saem, items)
        saem_seconds += time.perf_counter() - started

        report.sem_flush_touches.append(sem_stats.tables_touched)
        report.saem_flush_touches.append(saem_stats.tables_touched)

    report.sem_tables = sem.member_count
    report.saem_tables = saem.member_count
    report.sem_bytes_per_entry = record_dtype(key_dim, 0).itemsize
    report.saem_bytes_per_entry = record_dtype(key_dim, n_agents).itemsize
    report.sem_projected_bytes = capacity * report.sem_bytes_per_entry
    report.saem_projected_bytes = capacity * report.saem_bytes_per_entry * n_joint
    report.sem_flush_ms = 1000.0 * sem_seconds / flushes
    report.saem_flush_ms = 1000.0 * saem_seconds / flushes
    logger.info(
        "[bench] n=%s U=%s sem_tables=%s saem_tables=%s sem_ms=%.3f saem_ms=%.3f",
        n_agents,
        n_actions,
        report.sem_tables,
        report.saem_tables,
        report.sem_flush_ms,
        report.saem_flush_ms,
    )
    return report
