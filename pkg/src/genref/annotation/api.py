"""Versioned HTTP API over the annotation project, plus static images.

All endpoints live under /api/v1/. Validator-facing payloads are built
from ``AnnotationTask.blind_view`` and never contain the annotator's
selection. State errors map to 409, unknown ids to 404, bad input
to 400.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse
from pydantic import BaseModel, Field

from .service import AnnotationProject, WrongStateError

__all__ = ["create_app"]


class CreateTasksRequest(BaseModel):
    image_ids: list[int]


class SubmitAnnotationRequest(BaseModel):
    task_id: int
    annotator_id: str
    selection: list[int] = Field(default_factory=list)
    expression: str


class SubmitValidationRequest(BaseModel):
    task_id: int
    validator_id: str
    selection: list[int] = Field(default_factory=list)


class RejectRequest(BaseModel):
    task_id: int
    validator_id: str
    reason: str


class ExportRequest(BaseModel):
    out_dir: str | None = None


def create_app(project: AnnotationProject, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="genref annotation service", version="1")
    api = "/api/v1"
    # sync endpoints run on a thread pool; one lock serializes project
    # mutations (and keeps reads snapshot-consistent)
    lock = threading.Lock()

    def _wrap(fn, *args):
        try:
            with lock:
                return fn(*args)
        except WrongStateError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc.args[0]))
        except LookupError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post(f"{api}/create-tasks")
    def create_tasks(req: CreateTasksRequest):
        tasks = _wrap(project.create_tasks, req.image_ids)
        return {"tasks": [t.annotator_view() for t in tasks]}

    @app.get(f"{api}/annotation-task")
    def get_annotation_task(annotator_id: str):
        task = _wrap(project.next_annotation, annotator_id)
        if task is None:
            return {"task": None}
        return {"task": task.annotator_view()}

    @app.post(f"{api}/submit-annotation")
    def submit_annotation(req: SubmitAnnotationRequest):
        state = _wrap(
            project.submit_annotation, req.task_id, req.annotator_id,
            req.selection, req.expression,
        )
        return {"task_id": req.task_id, "state": state.value}

    @app.get(f"{api}/suggest-no-target")
    def suggest_no_target(task_id: int, k: int = 5):
        suggestions = _wrap(project.suggest_no_target, task_id, k)
        return {
            "suggestions": [
                {"expression": s.expression, "source_image_id": s.source_image_id}
                for s in suggestions
            ]
        }

    @app.get(f"{api}/next-validation")
    def next_validation(validator_id: str):
        task = _wrap(project.next_validation, validator_id)
        if task is None:
            return {"task": None}
        return {"task": task.blind_view()}

    @app.post(f"{api}/submit-validation")
    def submit_validation(req: SubmitValidationRequest):
        state = _wrap(
            project.submit_validation, req.task_id, req.validator_id, req.selection
        )
        return {"task_id": req.task_id, "state": state.value}

    @app.post(f"{api}/reject")
    def reject(req: RejectRequest):
        state = _wrap(project.reject, req.task_id, req.validator_id, req.reason)
        return {"task_id": req.task_id, "state": state.value}

    @app.post(f"{api}/export")
    def export(req: ExportRequest):
        out = Path(req.out_dir) if req.out_dir else project.root / "export"
        path = _wrap(project.export_dataset, out)
        return {"export_dir": str(path)}

    @app.get(f"{api}/tasks")
    def list_tasks():
        return {
            "tasks": [
                {"task_id": t.task_id, "image_id": t.image_id, "state": t.state.value}
                for t in sorted(project.tasks.values(), key=lambda t: t.task_id)
            ]
        }

    @app.get("/images/{image_id}.png")
    def image(image_id: int):
        path = project.root / "images" / f"{image_id}.png"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no image {image_id}")
        return FileResponse(path, media_type="image/png")

    ui_path = Path(ui_dir) if ui_dir else None

    @app.get("/", response_class=HTMLResponse)
    def index():
        if ui_path and (ui_path / "index.html").exists():
            return (ui_path / "index.html").read_text()
        return "<html><body><h1>genref annotation service</h1><p>API at /api/v1/ (no UI bundle installed).</p></body></html>"

    if ui_path:
        @app.get("/ui/{file_path:path}")
        def ui_file(file_path: str):
            target = (ui_path / file_path).resolve()
            if not str(target).startswith(str(ui_path.resolve())) or not target.is_file():
                raise HTTPException(status_code=404, detail="not found")
            media = "text/javascript" if target.suffix == ".js" else None
            return FileResponse(target, media_type=media)

    return app
