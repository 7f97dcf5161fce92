from app.memory.mset import (
    FlushStats,
    ReturnItem,
    ReturnSet,
    flush_all,
    mset_push,
    saem_flush,
    saem_merge,
    sem_flush,
    sem_merge,
)
from app.memory.projection import MemoryKey, ProjectionMatrix, StateKeyer, project, quantize
from app.memory.snapshot import TableSnapshot, export_snapshot, load_snapshot
from app.memory.tables import EpisodicTable, SaemTable, SemTable, TableEntry, evict_lfu, lookup
from app.memory.targets import TargetBatch, saem_target, saem_targets, sem_target, sem_targets

__all__ = [
    "EpisodicTable",
    "FlushStats",
    "MemoryKey",
    "ProjectionMatrix",
    "ReturnItem",
    "ReturnSet",
    "SaemTable",
    "SemTable",
    "StateKeyer",
    "TableEntry",
    "TableSnapshot",
    "TargetBatch",
    "evict_lfu",
    "export_snapshot",
    "flush_all",
    "load_snapshot",
    "lookup",
    "mset_push",
    "project",
    "quantize",
    "saem_flush",
    "saem_merge",
    "saem_target",
    "saem_targets",
    "sem_flush",
    "sem_merge",
    "sem_target",
    "sem_targets",
]
