"""Job lifecycle: FIFO queue, single worker, durable ledger.

Jobs move queued -> running -> done | failed, never backward. Every
transition is appended to the ledger, so a restarted service recovers all
terminal jobs as-is and re-queues jobs that were interrupted mid-run.
A finished job is never executed again.
"""
from __future__ import annotations

import queue
import threading
import uuid
from datetime import datetime, timezone

from ..errors import DictiError
from ..image_io import decode_label_map, decode_rgb, encode_png
from ..maskgen import MaskGenConfig
from ..pipeline import edit_image
from ..parsers import LabelMapProvider
from ..synthesis import InpaintingBackend
from .ledger import JobLedger
from .store import ImageStore


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class JobManager:
    """Owns the job table, the queue, and the single synthesis worker."""

    def __init__(
        self,
        store: ImageStore,
        ledger: JobLedger,
        backend: InpaintingBackend,
        parser: LabelMapProvider,
        queue_depth: int = 64,
    ):
        self.store = store
        self.ledger = ledger
        self.backend = backend
        self.parser = parser
        self._jobs: dict[str, dict] = {}
        self._queue: queue.Queue = queue.Queue(maxsize=queue_depth)
        self._lock = threading.Lock()
        self._worker: threading.Thread | None = None
        self._stopping = threading.Event()

    # -- lifecycle ---------------------------------------------------------

    def recover(self) -> None:
        """Reload the ledger; re-queue jobs that were interrupted mid-run."""
        jobs = self.ledger.load()
        with self._lock:
            self._jobs = jobs
        for job_id in sorted(jobs, key=lambda j: jobs[j]["created_at"]):
            job = jobs[job_id]
            if job["status"] == "running":
                self._transition(job_id, "queued")
                self._queue.put(job_id)
            elif job["status"] == "queued":
                self._queue.put(job_id)
        self.ledger.maybe_compact(self._jobs)

    def start(self) -> None:
        if self._worker is not None:
            return
        self._stopping.clear()
        self._worker = threading.Thread(target=self._work_loop, name="dicti-worker", daemon=True)
        self._worker.start()

    def stop(self) -> None:
        if self._worker is None:
            return
        self._stopping.set()
        self._worker.join(timeout=30)
        self._worker = None

    # -- API surface -------------------------------------------------------

    def submit(self, spec: dict, image_id: str, labels_id: str | None = None) -> dict:
        job = {
            "id": uuid.uuid4().hex,
            "status": "queued",
            "spec": {**spec, "image_id": image_id, "labels_id": labels_id},
            "created_at": _now(),
            "finished_at": None,
            "result_image_ids": [],
            "error": None,
        }
        with self._lock:
            self._jobs[job["id"]] = job
        self.ledger.append(job)
        self._queue.put(job["id"])
        return dict(job)

    def get(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise KeyError(job_id)
            return dict(job)

    def list(self) -> list[dict]:
        with self._lock:
            jobs = [dict(j) for j in self._jobs.values()]
        return sorted(jobs, key=lambda j: j["created_at"])

    # -- worker ------------------------------------------------------------

    def _transition(self, job_id: str, status: str, **updates) -> dict:
        with self._lock:
            job = self._jobs[job_id]
            job["status"] = status
            job.update(updates)
            snapshot = dict(job)
        self.ledger.append(snapshot)
        return snapshot

    def _work_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                job_id = self._queue.get(timeout=0.1)
            except queue.Empty:
                continue
            try:
                self._execute(job_id)
            finally:
                self._queue.task_done()

    def _execute(self, job_id: str) -> None:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None or job["status"] != "queued":
                return  # already handled; never run a job twice
        self._transition(job_id, "running")
        spec = job["spec"]
        try:
            image_bytes, _ = self.store.get(spec["image_id"])
            image = decode_rgb(image_bytes)
            if spec.get("labels_id"):
                labels_bytes, _ = self.store.get(spec["labels_id"])
                labels = decode_label_map(labels_bytes)
            else:
                labels = self.parser.labels_for(image, image_id=spec["image_id"])
            cfg = MaskGenConfig(d=spec["mask"]["d"], e=spec["mask"]["e"], f=spec["mask"]["f"])
            result = edit_image(
                image,
                labels,
                spec["prompt"],
                cfg,
                self.backend,
                seed=spec["seed"],
                steps=spec["steps"],
                guidance_scale=spec["guidance_scale"],
                variations=spec["variations"],
            )
            result_ids = [self.store.put(encode_png(frame)) for frame in result.edited]
            self._transition(job_id, "done", finished_at=_now(), result_image_ids=result_ids)
        except (DictiError, KeyError, ValueError) as exc:
            self._transition(job_id, "failed", finished_at=_now(), error=str(exc))
        except Exception as exc:  # keep the worker alive on surprises
            self._transition(job_id, "failed", finished_at=_now(), error=f"internal error: {exc}")
