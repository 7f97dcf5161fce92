from __future__ import annotations

import threading
import time
from typing import Dict, List, Optional

from .models import Run, RunStatus


class RunStore:
    """In-memory registry of submitted runs; safe to update from worker threads."""

    def __init__(self) -> None:
        self._runs: Dict[str, Run] = {}
        self._lock = threading.Lock()

    def put(self, run: Run) -> None:
        with self._lock:
            self._runs[run.run_id] = run

    def get(self, run_id: str) -> Optional[Run]:
        with self._lock:
            return self._runs.get(run_id)

    def all(self) -> List[Run]:
        with self._lock:
            return sorted(self._runs.values(), key=lambda r: r.created_at)

    def by_status(self, status: RunStatus) -> List[Run]:
        return [run for run in self.all() if run.status is status]

    def mark(self, run_id: str, status: RunStatus, error: Optional[str] = None) -> Run:
        with self._lock:
            run = self._runs[run_id]
            run.status = status
            run.timings[status.value] = time.time() - run.created_at
            if error is not None:
                run.error = error
            return run
