from __future__ import annotations

from dataclasses import dataclass
import logging
import os
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI

from app.core.store import RunStore
from app.core.worker import RunExecutor, WorkerPool

logger = logging.getLogger(__name__)

DEFAULT_RUNS_DIR = "runs/api"


@dataclass
class Deps:
    store: RunStore
    worker: WorkerPool
    runs_dir: Path


deps: Deps  # rempli par create_app


def execute_config(config_path: str, out_dir: str) -> List[str]:
    """Default executor: the same path as ``train --config ... --out ...``."""
    from app.cli.config import parse_config
    from app.cli.experiment import run_experiment

    artifact = run_experiment(parse_config(config_path), out_dir)
    return artifact.files()


def create_app(
    runs_dir: Optional[str] = None,
    concurrency: int = 1,
    executor: Optional[RunExecutor] = None,
) -> FastAPI:
    logging.basicConfig(level=logging.INFO)
    app = FastAPI(title="sem_marl")

    store = RunStore()
    worker = WorkerPool(store=store, executor=executor or execute_config, concurrency=concurrency)
    root = Path(runs_dir or os.getenv("SEM_API_RUNS_DIR", DEFAULT_RUNS_DIR))

    global deps
    deps = Deps(store=store, worker=worker, runs_dir=root)
    logger.info("[api] runs_dir=%s concurrency=%s", root, concurrency)

    @app.on_event("startup")
    async def _startup():
        await worker.start()

    @app.on_event("shutdown")
    async def _shutdown():
        await worker.stop()

    from app.api.routes_runs import router as runs_router
    app.include_router(runs_router)

    return app
