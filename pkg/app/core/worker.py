from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .models import Run, RunStatus
from .store import RunStore

logger = logging.getLogger(__name__)

# (config_path, out_dir) -> artifact file names; raises on failure
RunExecutor = Callable[[str, str], list]


@dataclass
class Job:
    run_id: str


class WorkerPool:
    """Queue of submitted runs; each blocking experiment runs in a thread."""

    def __init__(self, store: RunStore, executor: RunExecutor, concurrency: int = 1) -> None:
        self.store = store
        self.executor = executor
        self.concurrency = concurrency
        self.queue: asyncio.Queue[Job] = asyncio.Queue()
        self._tasks: list[asyncio.Task] = []

    async def start(self) -> None:
        for _ in range(self.concurrency):
            self._tasks.append(asyncio.create_task(self._worker_loop()))

    async def stop(self) -> None:
        for t in self._tasks:
            t.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)
        self._tasks.clear()

    async def enqueue(self, run_id: str) -> None:
        await self.queue.put(Job(run_id=run_id))

    async def _worker_loop(self) -> None:
        while True:
            job = await self.queue.get()
            run = self.store.get(job.run_id)
            if not run:
                self.queue.task_done()
                continue
            try:
                await self.execute(run)
            finally:
                self.queue.task_done()

    async def execute(self, run: Run) -> None:
        self.store.mark(run.run_id, RunStatus.running)
        logger.info("[worker] run=%s start", run.run_id)
        try:
            artifacts = await asyncio.to_thread(self.executor, run.config_path, run.out_dir)
        except Exception as e:
            logger.exception("[worker] run=%s failed", run.run_id)
            self.store.mark(run.run_id, RunStatus.error, error=str(e))
            return
        run.artifacts = sorted(artifacts)
        if Path(run.out_dir, "PARTIAL").exists():
            self.store.mark(run.run_id, RunStatus.error, error="one or more seed replicas failed")
        else:
            self.store.mark(run.run_id, RunStatus.done)
        logger.info("[worker] run=%s status=%s", run.run_id, run.status.value)
