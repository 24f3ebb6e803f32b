"""HTTP JSON API over the editing pipeline.

Endpoints:
  POST /api/jobs           multipart image (+ optional labels PNG) + spec JSON -> Job
  GET  /api/jobs/{id}      poll job state
  GET  /api/jobs           list jobs, oldest first
  POST /api/preview-mask   synchronous mask preview (bypasses the queue)
  GET  /api/images/{id}    content-addressed image bytes
  GET  /api/health

Error bodies are always {"code", "message"} with an optional "field".
"""
from __future__ import annotations

import base64
import json
from contextlib import asynccontextmanager

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field, ValidationError

from ..errors import (
    BackendError,
    ContractViolation,
    DictiError,
    NoSubjectError,
)
from ..image_io import decode_label_map, decode_rgb, encode_png, mask_to_bytes
from ..maskgen import MaskGenConfig, head_mask, inpainting_mask, mask_area
from ..parsers import create_parser
from ..synthesis import (
    DEFAULT_GUIDANCE,
    DEFAULT_STEPS,
    DEFAULT_VARIATIONS,
    create_backend,
)
from .config import ServiceConfig
from .jobs import JobManager
from .ledger import JobLedger
from .store import ImageStore


class MaskParams(BaseModel):
    d: int = Field(default=70, ge=0)
    e: int = Field(default=10, ge=0)
    f: int = Field(default=5, ge=0)


class JobSpecModel(BaseModel):
    prompt: str = Field(min_length=1)
    mask: MaskParams = MaskParams()
    seed: int = Field(default=0, ge=0)
    steps: int = Field(default=DEFAULT_STEPS, gt=0)
    guidance_scale: float = Field(default=DEFAULT_GUIDANCE, gt=0)
    variations: int = Field(default=DEFAULT_VARIATIONS, ge=1)


def _error(status: int, code: str, message: str, field: str | None = None) -> JSONResponse:
    body = {"code": code, "message": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(status_code=status, content=body)


def create_app(config: ServiceConfig) -> FastAPI:
    store = ImageStore(config.data_dir / "images")
    ledger = JobLedger(config.data_dir / "jobs.ledger")
    backend = create_backend(config.backend, config.backend_config)
    parser = create_parser(config.parser)
    manager = JobManager(store, ledger, backend, parser, queue_depth=config.queue_depth)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        manager.recover()
        manager.start()
        yield
        manager.stop()

    app = FastAPI(title="dicti service", lifespan=lifespan)
    app.state.manager = manager

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(part) for part in first.get("loc", []) if part != "body") or None
        return _error(400, "validation_error", first.get("msg", "invalid request"), field)

    @app.exception_handler(DictiError)
    async def _on_dicti_error(request: Request, exc: DictiError):
        if isinstance(exc, NoSubjectError):
            return _error(422, "no_subject", str(exc))
        if isinstance(exc, BackendError):
            return _error(502, "backend_error", str(exc))
        if isinstance(exc, ContractViolation):
            return _error(400, "contract_violation", str(exc))
        return _error(400, "error", str(exc))

    @app.get("/api/health")
    def health():
        return {"status": "ok", "backend": backend.name, "parser": parser.name}

    @app.post("/api/jobs", status_code=201)
    async def submit_job(
        image: UploadFile = File(...),
        spec: str = Form(...),
        labels: UploadFile | None = File(default=None),
    ):
        try:
            spec_model = JobSpecModel.model_validate(json.loads(spec))
        except json.JSONDecodeError as exc:
            return _error(400, "validation_error", f"spec is not valid JSON: {exc}", "spec")
        except ValidationError as exc:
            first = exc.errors()[0]
            field = ".".join(str(p) for p in first["loc"])
            return _error(400, "validation_error", first["msg"], field)
        image_bytes = await image.read()
        decode_rgb(image_bytes)  # reject undecodable uploads before persisting
        labels_id = None
        if labels is not None:
            labels_bytes = await labels.read()
            decode_label_map(labels_bytes)
            labels_id = store.put(labels_bytes)
        image_id = store.put(image_bytes)
        return manager.submit(spec_model.model_dump(), image_id, labels_id)

    @app.get("/api/jobs")
    def list_jobs():
        return manager.list()

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            return manager.get(job_id)
        except KeyError:
            return _error(404, "not_found", f"unknown job {job_id!r}")

    @app.post("/api/preview-mask")
    async def preview_mask(
        image: UploadFile = File(...),
        d: int = Form(default=70, ge=0),
        e: int = Form(default=10, ge=0),
        f: int = Form(default=5, ge=0),
        labels: UploadFile | None = File(default=None),
    ):
        rgb = decode_rgb(await image.read())
        if labels is not None:
            label_map = decode_label_map(await labels.read())
            if label_map.shape != rgb.shape[:2]:
                return _error(400, "contract_violation", "labels and image dimensions differ", "labels")
        else:
            label_map = parser.labels_for(rgb)
        cfg = MaskGenConfig(d=d, e=e, f=f)
        m_i = inpainting_mask(label_map, cfg)
        m_h = head_mask(label_map, cfg)
        if not m_i.any() and not m_h.any():
            raise NoSubjectError("no person detected in the uploaded image")
        return {
            "inpainting_mask_png": base64.b64encode(encode_png(mask_to_bytes(m_i))).decode(),
            "head_mask_png": base64.b64encode(encode_png(mask_to_bytes(m_h))).decode(),
            "stats": {
                "width": int(rgb.shape[1]),
                "height": int(rgb.shape[0]),
                "inpainting_area_px": mask_area(m_i),
                "head_area_px": mask_area(m_h),
            },
        }

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        try:
            data, media_type = store.get(image_id)
        except KeyError:
            return _error(404, "not_found", f"unknown image {image_id!r}")
        return Response(content=data, media_type=media_type)

    return app
