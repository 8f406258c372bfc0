"""HTTP facade for interactive completion.

POST /api/complete enqueues a projection job against the loaded bundle;
workers run in a thread pool while handlers only touch the in-memory job
store (so status reads never wait on a running projection). Progress
streams out as server-sent events, one per `preview_every` iterations.
"""

from __future__ import annotations

import base64
import io
import json
import threading
import time
import uuid
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse
from PIL import Image

from .models import ModelBundle, load_bundle
from .pngio import u8_to_unit, unit_to_u8
from .projection import ProjectionConfig, complete, composite, corrupted_joint
from .sketch import SKETCH_TO_IMAGE, DIRECTIONS, luminance

MAX_FINISHED_JOBS = 64


@dataclass
class CompletionJob:
    id: str
    state: str = "queued"               # queued -> running -> done | failed
    direction: str = SKETCH_TO_IMAGE
    iterations: int = 500
    progress: int = 0
    events: list[dict] = field(default_factory=list)
    result: np.ndarray | None = None
    error: str | None = None
    warning: str | None = None
    created: float = field(default_factory=time.time)

    def status_json(self) -> dict:
        latest = self.events[-1] if self.events else None
        out = {
            "id": self.id,
            "state": self.state,
            "direction": self.direction,
            "iterations": self.iterations,
            "progress": self.progress,
            "latest": {k: latest[k] for k in ("iter", "contextual", "perceptual")}
            if latest else None,
        }
        if self.warning:
            out["warning"] = self.warning
        if self.error:
            out["error"] = self.error
        return out


class JobStore:
    """Thread-safe registry with LRU eviction of finished jobs."""

    def __init__(self, keep: int = MAX_FINISHED_JOBS):
        self._jobs: OrderedDict[str, CompletionJob] = OrderedDict()
        self._keep = keep
        self.lock = threading.Lock()
        self.changed = threading.Condition(self.lock)

    def add(self, job: CompletionJob) -> None:
        with self.lock:
            self._jobs[job.id] = job
            finished = [k for k, j in self._jobs.items() if j.state in ("done", "failed")]
            while len(finished) > self._keep:
                self._jobs.pop(finished.pop(0), None)

    def get(self, job_id: str) -> CompletionJob | None:
        with self.lock:
            return self._jobs.get(job_id)

    def notify(self) -> None:
        with self.changed:
            self.changed.notify_all()


def _decode_png(b64_payload: str) -> np.ndarray:
    raw = base64.b64decode(b64_payload, validate=True)
    with Image.open(io.BytesIO(raw)) as img:
        img.load()
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _encode_png(pixels: np.ndarray) -> bytes:
    arr = unit_to_u8(pixels)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    img = Image.fromarray(arr, mode="RGB" if arr.ndim == 3 else "L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def create_app(bundle_path=None, bundle: ModelBundle | None = None, workers: int = 2,
               preview_every: int = 25, ui_dir=None) -> FastAPI:
    app = FastAPI(title="sketchgan completion service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    if bundle is None and bundle_path is not None:
        bundle = load_bundle(bundle_path)
    store = JobStore()
    pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="projection")
    app.state.bundle = bundle
    app.state.jobs = store
    app.state.preview_every = preview_every

    def run_job(job: CompletionJob, context: np.ndarray, config: ProjectionConfig):
        with store.lock:
            job.state = "running"
        k = preview_every
        size = bundle.descriptor.image_size
        y, mask = corrupted_joint(context, config.direction, size)

        def on_progress(iteration, contextual, perceptual, render, _z):
            emit = iteration > 0 and (iteration % k == 0 or iteration == config.iterations)
            if not emit:
                with store.lock:
                    job.progress = iteration
                return
            frame = composite(y, mask, render)
            event = {"iter": iteration, "contextual": contextual,
                     "perceptual": perceptual,
                     "preview": base64.b64encode(_encode_png(frame)).decode("ascii")}
            with store.changed:
                job.progress = iteration
                job.events.append(event)
                store.changed.notify_all()

        try:
            output, _trace = complete(context, bundle, config, progress=on_progress)
            with store.changed:
                job.result = output
                job.progress = config.iterations
                job.state = "done"
                store.changed.notify_all()
        except Exception as exc:
            with store.changed:
                job.error = str(exc)
                job.state = "failed"
                store.changed.notify_all()

    @app.get("/api/meta")
    def meta():
        if bundle is None:
            return JSONResponse({"error": "no bundle loaded"}, status_code=503)
        d = bundle.descriptor
        return {
            "image_size": d.image_size,
            "joint_size": [d.image_size, 2 * d.image_size],
            "latent_dim": d.latent_dim,
            "style": bundle.style,
            "directions": list(DIRECTIONS),
            "default_iterations": 500,
            "preview_every": preview_every,
        }

    @app.post("/api/complete", status_code=202)
    def submit(payload: dict | None = None):
        if bundle is None:
            return JSONResponse({"error": "no bundle loaded"}, status_code=503)
        sketch_b64 = (payload or {}).get("sketch")
        if not sketch_b64:
            return JSONResponse({"error": "missing 'sketch' (base64 PNG)"}, status_code=400)
        try:
            rgb = _decode_png(sketch_b64)
        except Exception as exc:
            return JSONResponse({"error": f"undecodable PNG payload: {exc}"}, status_code=400)

        direction = payload.get("direction", SKETCH_TO_IMAGE)
        if direction not in DIRECTIONS:
            return JSONResponse({"error": f"direction must be one of {DIRECTIONS}"},
                                status_code=400)
        try:
            iterations = int(payload.get("iterations", 500))
            config = ProjectionConfig(
                lam=float(payload.get("lambda", 0.01)),
                iterations=iterations,
                seed=int(payload.get("seed", 0)),
                init_candidates=int(payload.get("init_candidates", 10)),
                direction=direction,
            )
        except (TypeError, ValueError) as exc:
            return JSONResponse({"error": f"bad parameters: {exc}"}, status_code=400)

        size = bundle.descriptor.image_size
        job = CompletionJob(id=uuid.uuid4().hex, direction=direction,
                            iterations=iterations)
        if rgb.shape[:2] != (size, size):
            job.warning = f"input resized from {rgb.shape[1]}x{rgb.shape[0]} to {size}x{size}"
            rgb = np.asarray(Image.fromarray(rgb).resize((size, size), Image.BILINEAR))
        unit = u8_to_unit(rgb)
        if direction == SKETCH_TO_IMAGE:
            context = (2.0 * luminance(unit) - 1.0)[..., None].astype(np.float32)
        else:
            context = unit
        store.add(job)
        pool.submit(run_job, job, context, config)
        return {"id": job.id}

    @app.get("/api/jobs/{job_id}")
    def status(job_id: str):
        job = store.get(job_id)
        if job is None:
            return JSONResponse({"error": "unknown job"}, status_code=404)
        with store.lock:
            return job.status_json()

    @app.get("/api/jobs/{job_id}/events")
    def events(job_id: str):
        job = store.get(job_id)
        if job is None:
            return JSONResponse({"error": "unknown job"}, status_code=404)

        def stream():
            cursor = 0
            while True:
                with store.changed:
                    while cursor >= len(job.events) and job.state not in ("done", "failed"):
                        store.changed.wait(timeout=1.0)
                    pending = job.events[cursor:]
                    cursor += len(pending)
                    terminal = job.state in ("done", "failed") and cursor >= len(job.events)
                    state = job.state
                    error = job.error
                for event in pending:
                    yield f"data: {json.dumps(event)}\n\n"
                if terminal:
                    payload = {"state": state}
                    if error:
                        payload["error"] = error
                    yield f"event: end\ndata: {json.dumps(payload)}\n\n"
                    return

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/jobs/{job_id}/result")
    def result(job_id: str):
        job = store.get(job_id)
        if job is None:
            return JSONResponse({"error": "unknown job"}, status_code=404)
        with store.lock:
            if job.state != "done":
                return JSONResponse(
                    {"error": f"job is {job.state}, result only exists when done"},
                    status_code=409)
            png = _encode_png(job.result)
        return Response(content=png, media_type="image/png")

    @app.get("/api/jobs/{job_id}/preview")
    def preview(job_id: str):
        """Composite preview at the latest completed iteration (best effort)."""
        job = store.get(job_id)
        if job is None:
            return JSONResponse({"error": "unknown job"}, status_code=404)
        with store.lock:
            if job.result is None:
                return JSONResponse({"error": "no preview yet"}, status_code=409)
            png = _encode_png(job.result)
        return Response(content=png, media_type="image/png")

    if ui_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
