"""REST front-end: tuning requests become queued background tasks.

Each task lives in one JSON file under the state directory, so finished
results survive a restart. Tasks found in the ``running`` state at startup
were cut off by the previous process and are marked failed; queued tasks are
queued again in submission order.
"""
from __future__ import annotations

import json
import logging
import os
import secrets
import threading
import time
from collections import deque
from contextlib import asynccontextmanager
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Literal

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import ConfigError, FormatError, SegtuneError
from .objective import ObjectiveConfig
from .paramspace import ParameterSpace, load_space
from .runner import Sample, TuningOutcome, WorkflowSpec, load_samples, run_tuning, workflow_from_dict

log = logging.getLogger(__name__)

STATUSES = ("queued", "running", "done", "failed")


# -- request schema --------------------------------------------------------------

class InputModel(BaseModel):
    image: str
    truth: str


class WorkflowModel(BaseModel):
    kind: Literal["synthetic", "external-command"] = "synthetic"
    command: str | None = None
    timeout: float = Field(600.0, gt=0)


class ObjectiveModel(BaseModel):
    weights: tuple[float | str, float | str] = (1.0, 0.0)
    time_cap: float | None = Field(None, gt=0)
    quality_metric: str = "object-dice"


class TuneRequest(BaseModel):
    space: dict[str, Any] | str
    workflow: WorkflowModel = WorkflowModel()
    inputs: list[InputModel] = Field(min_length=1)
    objective: ObjectiveModel = ObjectiveModel()
    algorithm: Literal["nm", "pro", "ga", "boa", "random"] = "ga"
    budget: int = Field(100, ge=1)
    seed: int = 0
    workers: int | None = Field(None, ge=1)
    target: float | None = None
    default_point: dict[str, Any] | None = None


def _weight(x: float | str) -> Fraction | float:
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"cannot parse weight {x!r}") from None
    return x


@dataclass
class Job:
    """A request resolved into runnable objects."""

    space: ParameterSpace
    workflow: WorkflowSpec
    samples: list[Sample]
    objective: ObjectiveConfig
    request: TuneRequest


def resolve(req: TuneRequest, load_inputs: bool = True) -> Job:
    """Build the runtime objects. ``ConfigError`` for bad settings, ``OSError``/``FormatError`` for inputs."""
    space = load_space(req.space)
    workflow = workflow_from_dict(req.workflow.model_dump())
    workflow.validate(space)
    objective = ObjectiveConfig(tuple(_weight(w) for w in req.objective.weights),
                                req.objective.time_cap, req.objective.quality_metric)
    if req.default_point is not None:
        space.point_from_mapping(req.default_point)
    samples = load_samples([i.image for i in req.inputs], [i.truth for i in req.inputs]) if load_inputs else []
    return Job(space, workflow, samples, objective, req)


# -- task store ----------------------------------------------------------------

class TaskManager:
    """FIFO queue of tuning tasks with at most ``max_running`` executing at once.

    One lock guards the queue and every task record. Each record is written
    to ``<state_dir>/<id>.json`` on every change.
    """

    def __init__(self, state_dir: str | Path, max_running: int = 1, workers: int = 1,
                 retention: int | None = 1000) -> None:
        if max_running < 1 or workers < 1:
            raise ConfigError("max_running and workers must be >= 1")
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.max_running = max_running
        self.workers = workers
        self.retention = retention
        self._lock = threading.Lock()
        self._wake = threading.Condition(self._lock)
        self._tasks: dict[str, dict[str, Any]] = {}
        self._names: dict[str, list[str]] = {}
        self._queue: deque[str] = deque()
        self._threads: list[threading.Thread] = []
        self._stopping = False
        self._recover()

    # persistence
    def _path(self, task_id: str) -> Path:
        return self.state_dir / f"{task_id}.json"

    def _save(self, task: dict[str, Any]) -> None:
        path = self._path(task["id"])
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(task, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)

    def _recover(self) -> None:
        loaded = []
        for path in self.state_dir.glob("*.json"):
            try:
                task = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, ValueError):
                log.warning("skipping unreadable task file %s", path)
                continue
            loaded.append(task)
        for task in sorted(loaded, key=lambda t: (t.get("submitted", 0.0), t["id"])):
            if task["status"] == "running":
                task.update(status="failed", error="interrupted by service restart", finished=time.time())
                self._save(task)
            elif task["status"] == "queued":
                self._queue.append(task["id"])
            self._tasks[task["id"]] = task

    # lifecycle
    def start(self) -> None:
        with self._lock:
            if self._threads:
                return
            self._stopping = False
            for i in range(self.max_running):
                t = threading.Thread(target=self._worker, name=f"segtune-task-{i}", daemon=True)
                t.start()
                self._threads.append(t)

    def stop(self, timeout: float = 1.0) -> None:
        with self._wake:
            self._stopping = True
            self._wake.notify_all()
        for t in self._threads:
            t.join(timeout)
        self._threads = []

    def submit(self, req: TuneRequest) -> str:
        task_id = secrets.token_hex(16)
        task = {"id": task_id, "request": req.model_dump(mode="json"), "status": "queued",
                "progress": {"executed": 0, "budget": req.budget}, "submitted": time.time(),
                "started": None, "finished": None, "best_so_far": None, "error": None, "result": None}
        with self._wake:
            self._tasks[task_id] = task
            self._save(task)
            self._queue.append(task_id)
            self._wake.notify()
        return task_id

    def get(self, task_id: str) -> dict[str, Any] | None:
        with self._lock:
            task = self._tasks.get(task_id)
            return json.loads(json.dumps(task)) if task is not None else None

    def summary(self, task_id: str) -> dict[str, Any] | None:
        task = self.get(task_id)
        if task is None:
            return None
        return {k: task[k] for k in ("id", "status", "progress", "best_so_far", "submitted",
                                     "started", "finished", "error")}

    def list_ids(self) -> list[str]:
        with self._lock:
            return list(self._tasks)

    def delete(self, task_id: str) -> bool:
        """Remove a queued or finished task. Raises ``ConfigError`` for a running one."""
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                return False
            if task["status"] == "running":
                raise ConfigError("task is running")
            if task_id in self._queue:
                self._queue.remove(task_id)
            del self._tasks[task_id]
            self._path(task_id).unlink(missing_ok=True)
            return True

    def counts(self) -> dict[str, int]:
        with self._lock:
            out = {s: 0 for s in STATUSES}
            for t in self._tasks.values():
                out[t["status"]] += 1
            return out

    # execution
    def _worker(self) -> None:
        while True:
            with self._wake:
                while not self._queue and not self._stopping:
                    self._wake.wait()
                if self._stopping:
                    return
                task_id = self._queue.popleft()
                task = self._tasks[task_id]
                task.update(status="running", started=time.time())
                self._save(task)
                request = task["request"]
            self._run(task_id, request)

    def _progress(self, task_id: str, executed: int, budget: int, best) -> None:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                return
            task["progress"] = {"executed": max(executed, task["progress"]["executed"]), "budget": budget}
            task["best_so_far"] = best.to_dict(self._names.get(task_id))
            self._save(task)

    def _run(self, task_id: str, request: dict[str, Any]) -> None:
        try:
            job = resolve(TuneRequest.model_validate(request))
            with self._lock:
                self._names[task_id] = job.space.names
            req = job.request
            default = job.space.point_from_mapping(req.default_point) if req.default_point else None
            outcome = run_tuning(job.space, job.workflow, job.samples, job.objective, req.algorithm,
                                 req.budget, req.seed, req.workers or self.workers, target=req.target,
                                 default_point=default,
                                 on_progress=lambda n, b, best: self._progress(task_id, n, b, best))
        except (SegtuneError, OSError, ValueError) as exc:
            self._finish(task_id, error=f"{type(exc).__name__}: {exc}")
        except Exception as exc:  # keep the worker alive whatever the workflow does
            log.exception("task %s crashed", task_id)
            self._finish(task_id, error=f"{type(exc).__name__}: {exc}")
        else:
            self._finish(task_id, outcome=outcome)

    def _finish(self, task_id: str, outcome: TuningOutcome | None = None, error: str | None = None) -> None:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                return
            self._names.pop(task_id, None)
            task["finished"] = time.time()
            if outcome is not None:
                task["result"] = outcome.to_dict()
                task["best_so_far"] = task["result"]["best"]
                task["progress"] = {"executed": outcome.executed, "budget": outcome.budget}
                task["status"] = "done"
            else:
                task["status"] = "failed"
                task["error"] = error
            self._save(task)
            self._enforce_retention()

    def _enforce_retention(self) -> None:
        if self.retention is None:
            return
        finished = sorted((t for t in self._tasks.values() if t["status"] in ("done", "failed")),
                          key=lambda t: t["finished"])
        for task in finished[:max(0, len(finished) - self.retention)]:
            del self._tasks[task["id"]]
            self._path(task["id"]).unlink(missing_ok=True)


# -- HTTP ------------------------------------------------------------------------

@dataclass
class ServiceConfig:
    state_dir: str | Path = "segtune-state"
    max_running: int = 1
    workers: int = 1
    list_tasks: bool = False
    retention: int | None = 1000


def _field_errors(exc: RequestValidationError) -> list[dict[str, Any]]:
    return [{"field": ".".join(str(p) for p in e["loc"] if p != "body"), "message": e["msg"]}
            for e in exc.errors()]


def create_app(config: ServiceConfig | None = None, manager: TaskManager | None = None) -> FastAPI:
    config = config or ServiceConfig()
    manager = manager or TaskManager(config.state_dir, config.max_running, config.workers, config.retention)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        manager.start()
        yield
        manager.stop()

    app = FastAPI(title="segtune", lifespan=lifespan)
    app.state.manager = manager

    @app.exception_handler(RequestValidationError)
    async def _invalid(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": _field_errors(exc)})

    @app.post("/tasks", status_code=202)
    def submit(req: TuneRequest) -> dict[str, Any]:
        try:
            resolve(req)
        except (FormatError, OSError) as exc:
            raise HTTPException(422, detail=f"unreadable input: {exc}") from None
        except (SegtuneError, ValueError) as exc:
            raise HTTPException(400, detail=str(exc)) from None
        task_id = manager.submit(req)
        return {"id": task_id, "status": "queued"}

    @app.get("/tasks")
    def list_tasks() -> dict[str, Any]:
        if not config.list_tasks:
            raise HTTPException(404, detail="not found")
        return {"tasks": manager.list_ids()}

    @app.get("/tasks/{task_id}")
    def status(task_id: str) -> dict[str, Any]:
        summary = manager.summary(task_id)
        if summary is None:
            raise HTTPException(404, detail="unknown task")
        return summary

    @app.get("/tasks/{task_id}/result")
    def result(task_id: str) -> dict[str, Any]:
        task = manager.get(task_id)
        if task is None:
            raise HTTPException(404, detail="unknown task")
        if task["status"] != "done":
            raise HTTPException(409, detail=f"task is {task['status']}")
        return task["result"]

    @app.delete("/tasks/{task_id}")
    def delete(task_id: str) -> dict[str, Any]:
        try:
            removed = manager.delete(task_id)
        except ConfigError:
            raise HTTPException(409, detail="task is running") from None
        if not removed:
            raise HTTPException(404, detail="unknown task")
        return {"id": task_id, "deleted": True}

    @app.get("/healthz")
    def healthz() -> dict[str, Any]:
        return {"status": "ok", "tasks": manager.counts()}

    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
