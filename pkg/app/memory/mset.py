"""The staging set M and its flush into the SEM table or the SAEM family."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Tuple

from app.memory.tables import EpisodicTable, JointAction, SaemTable

logger = logging.getLogger(__name__)

DEFAULT_CAPACITY = 5000


@dataclass(frozen=True)
class ReturnItem:
    key: Hashable
    joint_action: Optional[JointAction]
    value: float


@dataclass
class FlushStats:
    items: int = 0
    tables_touched: int = 0
    inserted: int = 0
    merged: int = 0
    evicted: int = 0

    def add(self, other: "FlushStats") -> None:
        self.items += other.items
        self.tables_touched += other.tables_touched
        self.inserted += other.inserted
        self.merged += other.merged
        self.evicted += other.evicted


class ReturnSet:
    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        if capacity <= 0:
            raise ValueError("return set capacity must be positive")
        self.capacity = capacity
        self.items: List[ReturnItem] = []

    def __len__(self) -> int:
        return len(self.items)

    @property
    def full(self) -> bool:
        return len(self.items) >= self.capacity

    def push(self, key: Hashable, value: float, joint_action: Optional[JointAction] = None) -> bool:
        if joint_action is not None:
            joint_action = tuple(int(a) for a in joint_action)
        self.items.append(ReturnItem(key, joint_action, float(value)))
        return self.full

    def drain(self) -> List[ReturnItem]:
        items, self.items = self.items, []
        return items


def mset_push(m: ReturnSet, key: Hashable, value: float, joint_action: Optional[JointAction] = None) -> bool:
    return m.push(key, value, joint_action)


def _merge_maxima(table: EpisodicTable, maxima: Dict[Hashable, float], stats: FlushStats) -> None:
    for key, candidate in maxima.items():
        outcome = table.merge(key, candidate)
        if outcome == "merged":
            stats.merged += 1
        else:
            stats.inserted += 1
            if outcome.endswith("evicted"):
                stats.evicted += 1


def sem_merge(table: EpisodicTable, items: List[ReturnItem]) -> FlushStats:
    """Max-merge items into a single table without touching any staging set."""
    stats = FlushStats(items=len(items), tables_touched=1 if items else 0)
    maxima: Dict[Hashable, float] = {}
    for item in items:
        if item.key not in maxima or item.value > maxima[item.key]:
            maxima[item.key] = item.value
    _merge_maxima(table, maxima, stats)
    return stats


def saem_merge(tables: SaemTable, items: List[ReturnItem]) -> FlushStats:
    stats = FlushStats(items=len(items))
    grouped: Dict[JointAction, Dict[Hashable, float]] = {}
    for item in items:
        if item.joint_action is None:
            raise ValueError("SAEM items need a joint action")
        maxima = grouped.setdefault(item.joint_action, {})
        if item.key not in maxima or item.value > maxima[item.key]:
            maxima[item.key] = item.value
    for joint_action, maxima in grouped.items():
        member = tables.member(joint_action, create=True)
        stats.tables_touched += 1
        _merge_maxima(member, maxima, stats)
    return stats


def sem_flush(table: EpisodicTable, m: ReturnSet) -> FlushStats:
    stats = sem_merge(table, m.drain())
    logger.debug("[memory] sem flush items=%s inserted=%s evicted=%s", stats.items, stats.inserted, stats.evicted)
    return stats


def saem_flush(tables: SaemTable, m: ReturnSet) -> FlushStats:
    stats = saem_merge(tables, m.drain())
    logger.debug("[memory] saem flush items=%s touched=%s", stats.items, stats.tables_touched)
    return stats


def flush_all(m: ReturnSet, sem: Optional[EpisodicTable], saem: Optional[SaemTable]) -> Tuple[FlushStats, FlushStats]:
    """Empty one set into every table maintained by the run."""
    items = m.drain()
    sem_stats = sem_merge(sem, items) if sem is not None else FlushStats()
    saem_stats = saem_merge(saem, items) if saem is not None else FlushStats()
    return sem_stats, saem_stats
