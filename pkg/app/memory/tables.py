"""Capacity-bounded episodic tables with max-merge updates and LFU eviction.

Eviction removes the entry with the fewest successful lookups; ties go to
the oldest insertion. The candidate order lives in a lazy min-heap of
(access_count, insertion_index, key): stale heap rows are skipped on pop.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, Iterator, List, Optional, Tuple

logger = logging.getLogger(__name__)

JointAction = Tuple[int, ...]


@dataclass
class TableEntry:
    value: float
    access_count: int
    insertion_index: int


class EpisodicTable:
    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ValueError("table capacity must be positive")
        self.capacity = capacity
        self.entries: Dict[Hashable, TableEntry] = {}
        self._heap: List[Tuple[int, int, Hashable]] = []
        self._next_insertion = 0
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: object) -> bool:
        return key in self.entries

    def items(self) -> Iterator[Tuple[Hashable, TableEntry]]:
        return iter(self.entries.items())

    def peek(self, key: Hashable) -> Optional[float]:
        """Read without counting an access."""
        entry = self.entries.get(key)
        return None if entry is None else entry.value

    def lookup(self, key: Hashable) -> Optional[float]:
        entry = self.entries.get(key)
        if entry is None:
            self.misses += 1
            return None
        self.hits += 1
        entry.access_count += 1
        heapq.heappush(self._heap, (entry.access_count, entry.insertion_index, key))
        self._compact()
        return entry.value

    def merge(self, key: Hashable, candidate: float) -> str:
        """Max-merge one return; returns "merged", "inserted" or "inserted+evicted"."""
        entry = self.entries.get(key)
        if entry is not None:
            if candidate > entry.value:
                entry.value = candidate
            return "merged"
        outcome = "inserted"
        if len(self.entries) >= self.capacity:
            self.evict_lfu()
            outcome = "inserted+evicted"
        entry = TableEntry(float(candidate), 0, self._next_insertion)
        self._next_insertion += 1
        self.entries[key] = entry
        heapq.heappush(self._heap, (0, entry.insertion_index, key))
        return outcome

    def restore_entry(self, key: Hashable, entry: TableEntry) -> None:
        """Reinsert a dumped entry as is; the insertion counter continues after it."""
        if key not in self.entries and len(self.entries) >= self.capacity:
            raise ValueError("restoring past table capacity")
        self.entries[key] = entry
        self._next_insertion = max(self._next_insertion, entry.insertion_index + 1)
        heapq.heappush(self._heap, (entry.access_count, entry.insertion_index, key))
        self._compact()

    def evict_lfu(self) -> Hashable:
        while self._heap:
            count, insertion, key = heapq.heappop(self._heap)
            entry = self.entries.get(key)
            if entry is None or entry.access_count != count or entry.insertion_index != insertion:
                continue
            del self.entries[key]
            self.evictions += 1
            self._compact()
            return key
        raise KeyError("evict_lfu on an empty table")

    def _compact(self) -> None:
        # stale rows stay bounded by a constant factor of the live entries
        if len(self._heap) > 4 * len(self.entries) + 64:
            self._heap = [(e.access_count, e.insertion_index, k) for k, e in self.entries.items()]
            heapq.heapify(self._heap)


class SemTable(EpisodicTable):
    """Single table keyed by projected global state."""

    @property
    def member_count(self) -> int:
        return 1


class SaemTable:
    """One member table per joint action, each keyed by projected global state."""

    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ValueError("table capacity must be positive")
        self.capacity = capacity
        self.members: Dict[JointAction, EpisodicTable] = {}
        self._orphan_misses = 0

    @property
    def member_count(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return sum(len(member) for member in self.members.values())

    @property
    def hits(self) -> int:
        return sum(member.hits for member in self.members.values())

    @property
    def misses(self) -> int:
        return sum(member.misses for member in self.members.values()) + self._orphan_misses

    @property
    def evictions(self) -> int:
        return sum(member.evictions for member in self.members.values())

    def member(self, joint_action: Iterable[int], create: bool = False) -> Optional[EpisodicTable]:
        joint_action = tuple(int(a) for a in joint_action)
        table = self.members.get(joint_action)
        if table is None and create:
            table = EpisodicTable(self.capacity)
            self.members[joint_action] = table
        return table

    def lookup(self, key: Hashable, joint_action: Iterable[int]) -> Optional[float]:
        table = self.member(joint_action)
        if table is None:
            self._orphan_misses += 1
            return None
        return table.lookup(key)

    def peek(self, key: Hashable, joint_action: Iterable[int]) -> Optional[float]:
        table = self.member(joint_action)
        return None if table is None else table.peek(key)


def lookup(table: EpisodicTable | SaemTable, key: Hashable, joint_action: Optional[Iterable[int]] = None) -> Optional[float]:
    """Stored value on a hit (counting one access), ``None`` on a miss."""
    if isinstance(table, SaemTable):
        if joint_action is None:
            raise ValueError("SAEM lookups need a joint action")
        return table.lookup(key, joint_action)
    return table.lookup(key)


def evict_lfu(table: EpisodicTable) -> Hashable:
    return table.evict_lfu()
