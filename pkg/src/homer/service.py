"""Embedded HTTP service backing the annotation UI.

Plain stdlib HTTP: JSON in/out, PNG for image bodies. One propagation job runs
at a time; further jobs queue FIFO. Segmentation previews share the oracle
lock, so they are served immediately when idle and queue behind a running job.
"""

from __future__ import annotations

import io
import json
import logging
import queue
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image

from . import pipeline
from .errors import HomerError, OracleFailure, PipelineAbort, PromptConflict, ValidationError
from .mask import load_mask_png, mask_to_rle
from .oracles import OracleSet
from .pipeline import PipelineConfig, ViewSet, config_from_json
from .prompts import PromptSet

log = logging.getLogger(__name__)


@dataclass
class Job:
    id: str
    state: str = "queued"  # queued -> running -> done | failed
    progress: dict = field(default_factory=lambda: {"stage": "queued", "views_done": 0, "views_total": 0})
    result_path: str | None = None
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "progress": self.progress,
            "result_path": self.result_path,
            "error": self.error,
        }


class Service:
    def __init__(self, vs: ViewSet, oracles: OracleSet, cfg: PipelineConfig, out_root, ui_dir=None):
        self.vs = vs
        self.oracles = oracles
        self.cfg = cfg
        self.out_root = Path(out_root)
        self.out_root.mkdir(parents=True, exist_ok=True)
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.jobs: dict[str, Job] = {}
        self.latest_done: Job | None = None
        self.oracle_lock = threading.Lock()
        self.state_lock = threading.Lock()
        self._queue: queue.Queue = queue.Queue()
        self._worker = threading.Thread(target=self._work, daemon=True)
        self._worker.start()

    # -- job worker --

    def _work(self):
        while True:
            job_id, prompts, cfg = self._queue.get()
            job = self.jobs[job_id]
            with self.state_lock:
                job.state = "running"
                job.progress = {"stage": "starting", "views_done": 0, "views_total": self.vs.n_views}

            def progress(stage, done, total):
                with self.state_lock:
                    job.progress = {"stage": stage, "views_done": done, "views_total": total}

            out_dir = self.out_root / f"job_{job_id}"
            try:
                with self.oracle_lock:
                    pipeline.run(self.vs, prompts, self.oracles, cfg, out_dir, progress_cb=progress)
                with self.state_lock:
                    job.state = "done"
                    job.result_path = str(out_dir)
                    self.latest_done = job
            except Exception as exc:  # job failures are reported, not fatal
                log.exception("job %s failed", job_id)
                with self.state_lock:
                    job.state = "failed"
                    job.error = f"{type(exc).__name__}: {exc}"

    def submit(self, prompts: PromptSet, cfg: PipelineConfig) -> Job:
        job = Job(id=uuid.uuid4().hex[:12])
        with self.state_lock:
            self.jobs[job.id] = job
        self._queue.put((job.id, prompts, cfg))
        return job

    def segment_preview(self, view_index: int, prompts: PromptSet) -> list:
        image = self.vs.load(view_index)
        masks = []
        with self.oracle_lock:
            for object_id in prompts.object_ids:
                fg = prompts.foreground_for(object_id)
                m = self.oracles.segmenter.segment(image, fg, list(prompts.background))
                masks.append({"object_id": object_id, "rle": mask_to_rle(np.asarray(m, bool))})
        return masks

    def latest_result_dir(self) -> Path | None:
        with self.state_lock:
            if self.latest_done is None or self.latest_done.result_path is None:
                return None
            return Path(self.latest_done.result_path)


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


def _png_bytes(path: Path) -> bytes:
    return Path(path).read_bytes()


class Handler(BaseHTTPRequestHandler):
    service: Service = None  # set by make_server

    # -- plumbing --

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    def _send_json(self, obj, status=200):
        body = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_png(self, data: bytes):
        self.send_response(200)
        self.send_header("Content-Type", "image/png")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _send_error_json(self, exc: _ApiError):
        self._send_json({"error": {"code": exc.code, "message": str(exc)}}, exc.status)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        try:
            return json.loads(raw.decode())
        except ValueError as exc:
            raise _ApiError(400, "bad_request", f"body is not JSON: {exc}")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    # -- routing --

    def do_GET(self):
        try:
            self._route_get()
        except _ApiError as exc:
            self._send_error_json(exc)
        except Exception as exc:
            log.exception("GET %s", self.path)
            self._send_error_json(_ApiError(500, "server_error", str(exc)))

    def do_POST(self):
        try:
            self._route_post()
        except _ApiError as exc:
            self._send_error_json(exc)
        except (ValidationError, PromptConflict) as exc:
            self._send_error_json(_ApiError(422, "validation", str(exc)))
        except (OracleFailure, PipelineAbort) as exc:
            self._send_error_json(_ApiError(502, "oracle_failure", str(exc)))
        except Exception as exc:
            log.exception("POST %s", self.path)
            self._send_error_json(_ApiError(500, "server_error", str(exc)))

    def _route_get(self):
        svc = self.service
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if parts[:1] == ["api"]:
            if parts == ["api", "views"]:
                w, h = svc.vs.size
                return self._send_json(
                    [{"index": j, "width": w, "height": h} for j in range(svc.vs.n_views)]
                )
            if len(parts) == 4 and parts[1] == "views" and parts[3] == "image":
                j = self._view_index(parts[2])
                buf = io.BytesIO()
                Image.fromarray(svc.vs.load(j), mode="RGB").save(buf, format="PNG")
                return self._send_png(buf.getvalue())
            if len(parts) == 3 and parts[1] == "jobs":
                with svc.state_lock:
                    job = svc.jobs.get(parts[2])
                if job is None:
                    raise _ApiError(404, "not_found", f"no job {parts[2]}")
                return self._send_json(job.to_json())
            if len(parts) == 4 and parts[1] == "results":
                j = self._view_index(parts[2])
                run_dir = svc.latest_result_dir()
                if run_dir is None:
                    raise _ApiError(404, "not_found", "no completed propagation yet")
                report = json.loads((run_dir / "report.json").read_text())
                view = report["views"][j]
                if parts[3] == "image":
                    return self._send_png(_png_bytes(run_dir / view["image_path"]))
                if parts[3] == "masks":
                    out = []
                    for k, rel in sorted(view["mask_paths"].items(), key=lambda kv: int(kv[0])):
                        m = load_mask_png(run_dir / rel)
                        out.append({"object_id": int(k), "rle": mask_to_rle(m)})
                    return self._send_json(out)
            if len(parts) == 3 and parts[1] == "results" and parts[2] == "report":
                run_dir = svc.latest_result_dir()
                if run_dir is None:
                    raise _ApiError(404, "not_found", "no completed propagation yet")
                return self._send_json(json.loads((run_dir / "report.json").read_text()))
            raise _ApiError(404, "not_found", f"unknown endpoint {self.path}")
        return self._serve_static(parts)

    def _route_post(self):
        svc = self.service
        parts = [p for p in self.path.split("?")[0].split("/") if p]
        if len(parts) == 4 and parts[:2] == ["api", "views"] and parts[3] == "segment":
            j = self._view_index(parts[2])
            body = self._read_json()
            prompts = PromptSet.from_json({**body, "view_index": j})
            prompts.validate(svc.vs.size)
            return self._send_json({"masks": svc.segment_preview(j, prompts)})
        if parts == ["api", "propagate"]:
            body = self._read_json()
            if "prompts" not in body:
                raise _ApiError(400, "bad_request", "missing 'prompts'")
            prompts = PromptSet.from_json(body["prompts"])
            prompts.validate(svc.vs.size)
            cfg = svc.cfg
            if body.get("config"):
                cfg = config_from_json(body["config"])
            job = svc.submit(prompts, cfg)
            return self._send_json({"job_id": job.id}, status=202)
        raise _ApiError(404, "not_found", f"unknown endpoint {self.path}")

    def _view_index(self, raw: str) -> int:
        try:
            j = int(raw)
        except ValueError:
            raise _ApiError(400, "bad_request", f"bad view index {raw!r}")
        if not (0 <= j < self.service.vs.n_views):
            raise _ApiError(404, "not_found", f"view {j} out of range")
        return j

    # -- static UI --

    _MIME = {
        ".html": "text/html",
        ".js": "text/javascript",
        ".css": "text/css",
        ".svg": "image/svg+xml",
        ".png": "image/png",
        ".map": "application/json",
    }

    def _serve_static(self, parts):
        svc = self.service
        if svc.ui_dir is None:
            raise _ApiError(404, "not_found", "no UI bundled; use the /api endpoints")
        rel = "/".join(parts) or "index.html"
        target = (svc.ui_dir / rel).resolve()
        if not str(target).startswith(str(svc.ui_dir.resolve())) or not target.is_file():
            target = svc.ui_dir / "index.html"
            if not target.is_file():
                raise _ApiError(404, "not_found", f"no static file {rel}")
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", self._MIME.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def make_server(service: Service, port: int, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    handler = type("BoundHandler", (Handler,), {"service": service})
    try:
        return ThreadingHTTPServer((host, port), handler)
    except OSError as exc:
        raise HomerError(f"cannot bind {host}:{port}: {exc}") from exc


def serve(vs: ViewSet, oracles: OracleSet, cfg: PipelineConfig, out_root, port: int, ui_dir=None, host: str = "127.0.0.1"):
    """Blocking server entry point."""
    service = Service(vs, oracles, cfg, out_root, ui_dir=ui_dir)
    server = make_server(service, port, host)
    log.info("serving %d views on http://%s:%d/", vs.n_views, host, server.server_address[1])
    try:
        server.serve_forever()
    finally:
        server.server_close()
