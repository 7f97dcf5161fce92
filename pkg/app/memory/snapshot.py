"""Flat binary dump of a table, for the benchmark and debugging tools.

Layout (little-endian):
  header  struct '<8sIIIdQ': magic b"SEMTBL01", version, key_dim, action_dim,
          quantization scale, record count
  records numpy structured array, one row per entry, ordered by member then
          insertion index: actions '<i4' x action_dim (absent for SEM),
          codes '<i8' x key_dim, value '<f8', access_count '<u8',
          insertion_index '<u8'
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from app.memory.projection import MemoryKey
from app.memory.tables import EpisodicTable, SaemTable, SemTable, TableEntry

logger = logging.getLogger(__name__)

MAGIC = b"SEMTBL01"
VERSION = 1
HEADER = struct.Struct("<8sIIIdQ")


def record_dtype(key_dim: int, action_dim: int) -> np.dtype:
    fields: List[Tuple] = []
    if action_dim:
        fields.append(("actions", "<i4", (action_dim,)))
    fields += [
        ("codes", "<i8", (key_dim,)),
        ("value", "<f8"),
        ("access_count", "<u8"),
        ("insertion_index", "<u8"),
    ]
    return np.dtype(fields)


def _rows(table: EpisodicTable) -> List[Tuple[MemoryKey, TableEntry]]:
    rows = list(table.items())
    for key, _ in rows:
        if not isinstance(key, MemoryKey):
            raise TypeError("only tables keyed by MemoryKey can be exported")
    return sorted(rows, key=lambda row: row[1].insertion_index)


def export_snapshot(table: EpisodicTable | SaemTable, path: str | Path) -> int:
    """Write the table; returns the number of records."""
    if isinstance(table, SaemTable):
        members = [(ja, _rows(member)) for ja, member in table.members.items()]
    else:
        members = [((), _rows(table))]
    first = next((rows[0][0] for _, rows in members if rows), None)
    key_dim = len(first.codes) if first is not None else 0
    scale = first.scale if first is not None else 0.0
    action_dim = len(next(iter(table.members))) if isinstance(table, SaemTable) and table.members else 0

    records = np.zeros(sum(len(rows) for _, rows in members), dtype=record_dtype(key_dim, action_dim))
    i = 0
    for joint_action, rows in members:
        for key, entry in rows:
            if action_dim:
                records["actions"][i] = joint_action
            records["codes"][i] = key.codes
            records["value"][i] = entry.value
            records["access_count"][i] = entry.access_count
            records["insertion_index"][i] = entry.insertion_index
            i += 1

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, key_dim, action_dim, scale, len(records)))
        fh.write(records.tobytes())
    logger.info("[memory] snapshot path=%s records=%s", path, len(records))
    return len(records)


@dataclass
class TableSnapshot:
    key_dim: int
    action_dim: int
    scale: float
    records: np.ndarray

    def __len__(self) -> int:
        return len(self.records)

    def key(self, i: int) -> MemoryKey:
        return MemoryKey(tuple(int(c) for c in self.records["codes"][i]), self.scale)

    def restore(self, capacity: int) -> EpisodicTable | SaemTable:
        """Rebuild a table with the dumped values, counts and insertion order."""
        table: EpisodicTable | SaemTable = SaemTable(capacity) if self.action_dim else SemTable(capacity)
        for i in range(len(self.records)):
            row = self.records[i]
            target = table
            if self.action_dim:
                target = table.member(tuple(int(a) for a in row["actions"]), create=True)
            target.restore_entry(
                self.key(i),
                TableEntry(float(row["value"]), int(row["access_count"]), int(row["insertion_index"])),
            )
        return table


def load_snapshot(path: str | Path) -> TableSnapshot:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, key_dim, action_dim, scale, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a table snapshot (magic {magic!r})")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    dtype = record_dtype(key_dim, action_dim)
    if len(data) != HEADER.size + count * dtype.itemsize:
        raise ValueError(f"{path}: expected {count} records")
    records = np.frombuffer(data, dtype=dtype, count=count, offset=HEADER.size).copy()
    return TableSnapshot(key_dim, action_dim, scale, records)
