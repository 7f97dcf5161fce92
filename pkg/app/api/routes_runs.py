from __future__ import annotations

import os
from fastapi import APIRouter, File, HTTPException, UploadFile
from fastapi.responses import FileResponse

from app.api import server
from app.cli.config import parse_config_text
from app.core.errors import ConfigError
from app.core.models import Run

router = APIRouter()


@router.post("/v1/runs")
async def create_run(config: UploadFile = File(...)):
    text = (await config.read()).decode("utf-8", errors="replace")
    try:
        parse_config_text(text, source=config.filename or "upload")
    except ConfigError as exc:
        raise HTTPException(
            status_code=400,
            detail={"error": exc.message, "field": exc.field, "line": exc.line},
        )

    deps = server.deps
    run = Run.new()
    out_dir = deps.runs_dir / run.run_id
    os.makedirs(out_dir, exist_ok=True)
    config_path = out_dir / "config.submitted.yaml"
    config_path.write_text(text, encoding="utf-8")

    run.config_path = str(config_path)
    run.out_dir = str(out_dir)
    deps.store.put(run)

    await deps.worker.enqueue(run.run_id)

    return {"run_id": run.run_id, "status": run.status}


@router.get("/v1/runs")
def list_runs():
    return [{"run_id": r.run_id, "status": r.status} for r in server.deps.store.all()]


@router.get("/v1/runs/{run_id}")
def get_run(run_id: str):
    run = server.deps.store.get(run_id)
    if not run:
        raise HTTPException(status_code=404, detail="run not found")

    return {
        "run_id": run.run_id,
        "status": run.status,
        "error": run.error,
        "artifacts": run.artifacts,
        "timings": run.timings,
    }


def _artifact(run_id: str, name: str) -> str:
    run = server.deps.store.get(run_id)
    if not run or not run.out_dir:
        raise HTTPException(status_code=404, detail="run not found")
    path = os.path.join(run.out_dir, name)
    if not os.path.exists(path):
        raise HTTPException(status_code=404, detail=f"{name} not available")
    return path


@router.get("/v1/runs/{run_id}/summary")
def get_run_summary(run_id: str):
    path = _artifact(run_id, "summary.csv")
    return FileResponse(path, media_type="text/csv", filename=f"{run_id}_summary.csv")


@router.get("/v1/runs/{run_id}/plot")
def get_run_plot(run_id: str):
    path = _artifact(run_id, "curve.svg")
    return FileResponse(path, media_type="image/svg+xml", filename=f"{run_id}_curve.svg")
