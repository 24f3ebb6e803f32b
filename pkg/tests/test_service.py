from __future__ import annotations

import base64
import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from dicti.image_io import encode_png
from dicti.service import ServiceConfig, create_app
from dicti.service.ledger import JobLedger
from dicti.service.store import ImageStore, sniff_media_type

from conftest import figure_labels, random_image


def png_bytes(array):
    return encode_png(array)


def upload_image(rng, h=64, w=48):
    return png_bytes(random_image(rng, h, w))


def labels_bytes(h=64, w=48):
    return png_bytes(figure_labels(h, w))


@pytest.fixture
def client(tmp_path):
    app = create_app(ServiceConfig(data_dir=tmp_path / "data"))
    with TestClient(app) as client:
        yield client


def submit(client, image, spec=None, labels=None):
    files = {"image": ("photo.png", image, "image/png")}
    if labels is not None:
        files["labels"] = ("labels.png", labels, "image/png")
    return client.post(
        "/api/jobs",
        files=files,
        data={"spec": json.dumps(spec or {"prompt": "a red dress", "variations": 2,
                                          "mask": {"d": 4, "e": 1, "f": 1}})},
    )


def wait_for(client, job_id, timeout=20.0):
    deadline = time.monotonic() + timeout
    seen = []
    while time.monotonic() < deadline:
        job = client.get(f"/api/jobs/{job_id}").json()
        if not seen or seen[-1] != job["status"]:
            seen.append(job["status"])
        if job["status"] in ("done", "failed"):
            return job, seen
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not finish; states {seen}")


class TestHealth:
    def test_ok(self, client):
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["backend"] == "stub"


class TestSubmitJob:
    def test_queued_immediately(self, client, rng):
        resp = submit(client, upload_image(rng))
        assert resp.status_code == 201
        job = resp.json()
        assert job["status"] == "queued" and job["id"]

    def test_runs_to_done_with_variation_results(self, client, rng):
        job = submit(client, upload_image(rng)).json()
        done, seen = wait_for(client, job["id"])
        assert done["status"] == "done"
        assert len(done["result_image_ids"]) == 2
        assert done["finished_at"] is not None
        # states only ever move forward
        order = {"queued": 0, "running": 1, "done": 2}
        ranks = [order[s] for s in seen]
        assert ranks == sorted(ranks)

    def test_results_are_fetchable_pngs(self, client, rng):
        job = submit(client, upload_image(rng)).json()
        done, _ = wait_for(client, job["id"])
        for image_id in done["result_image_ids"]:
            resp = client.get(f"/api/images/{image_id}")
            assert resp.status_code == 200
            assert resp.headers["content-type"] == "image/png"
            decoded = Image.open(io.BytesIO(resp.content))
            assert decoded.size == (48, 64)

    def test_corrupt_upload_rejected_without_persisting(self, client):
        before = client.get("/api/jobs").json()
        resp = submit(client, b"not an image")
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "contract_violation" and "message" in body
        assert client.get("/api/jobs").json() == before

    def test_invalid_spec_fields(self, client, rng):
        resp = submit(client, upload_image(rng), spec={"prompt": "", "variations": 0})
        assert resp.status_code == 400
        body = resp.json()
        assert body["code"] == "validation_error"
        assert "field" in body

    def test_spec_not_json(self, client, rng):
        resp = client.post(
            "/api/jobs",
            files={"image": ("p.png", upload_image(rng), "image/png")},
            data={"spec": "{nope"},
        )
        assert resp.status_code == 400
        assert resp.json()["field"] == "spec"

    def test_uploaded_labels_drive_masks(self, client, rng):
        # all-background labels -> the job fails with a no-subject diagnostic
        blank = png_bytes(np.zeros((64, 48), dtype=np.uint8))
        job = submit(client, upload_image(rng), labels=blank).json()
        done, _ = wait_for(client, job["id"])
        assert done["status"] == "failed"
        assert "no body pixels" in done["error"]

    def test_jobs_list_in_creation_order(self, client, rng):
        ids = [submit(client, upload_image(rng)).json()["id"] for _ in range(3)]
        for job_id in ids:
            wait_for(client, job_id)
        listed = [j["id"] for j in client.get("/api/jobs").json()]
        assert [i for i in listed if i in ids] == ids


class TestGetJob:
    def test_unknown_id(self, client):
        resp = client.get("/api/jobs/doesnotexist")
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"

    def test_terminal_response_immutable(self, client, rng):
        job = submit(client, upload_image(rng)).json()
        done, _ = wait_for(client, job["id"])
        again = client.get(f"/api/jobs/{job['id']}").json()
        assert again == done


class TestPreviewMask:
    def preview(self, client, image, labels=None, **params):
        files = {"image": ("p.png", image, "image/png")}
        if labels is not None:
            files["labels"] = ("l.png", labels, "image/png")
        return client.post("/api/preview-mask", files=files, data=params)

    def test_dilation_grows_overlay(self, client, rng):
        image = upload_image(rng, 96, 64)
        labels = png_bytes(figure_labels(96, 64))
        small = self.preview(client, image, labels, d=0, e=1, f=1).json()
        large = self.preview(client, image, labels, d=12, e=1, f=1).json()
        assert large["stats"]["inpainting_area_px"] > small["stats"]["inpainting_area_px"]
        mask_small = np.asarray(
            Image.open(io.BytesIO(base64.b64decode(small["inpainting_mask_png"])))
        )
        mask_large = np.asarray(
            Image.open(io.BytesIO(base64.b64decode(large["inpainting_mask_png"])))
        )
        assert ((mask_small > 127) <= (mask_large > 127)).all()

    def test_synthetic_parser_used_without_labels(self, client, rng):
        resp = self.preview(client, upload_image(rng, 96, 64), d=4)
        assert resp.status_code == 200
        assert resp.json()["stats"]["inpainting_area_px"] > 0

    def test_deterministic_payload(self, client, rng):
        image = upload_image(rng, 64, 48)
        labels = labels_bytes()
        a = self.preview(client, image, labels, d=4, e=1, f=1).json()
        b = self.preview(client, image, labels, d=4, e=1, f=1).json()
        assert a == b

    def test_no_subject(self, client, rng):
        blank = png_bytes(np.zeros((64, 48), dtype=np.uint8))
        resp = self.preview(client, upload_image(rng), blank, d=4)
        assert resp.status_code == 422
        assert resp.json()["code"] == "no_subject"

    def test_stats_include_dimensions(self, client, rng):
        body = self.preview(client, upload_image(rng, 96, 64), labels_bytes(96, 64)).json()
        assert body["stats"]["width"] == 64 and body["stats"]["height"] == 96


class TestImageStore:
    def test_content_addressing_dedup(self, tmp_path):
        store = ImageStore(tmp_path)
        data = b"\x89PNG\r\n\x1a\nrest"
        first = store.put(data)
        second = store.put(data)
        assert first == second
        assert store.get(first) == (data, "image/png")

    def test_unknown_id(self, tmp_path):
        store = ImageStore(tmp_path)
        with pytest.raises(KeyError):
            store.get("ab" * 32)
        with pytest.raises(KeyError):
            store.get("../../etc/passwd")

    def test_media_type_sniffing(self):
        assert sniff_media_type(b"\xff\xd8\xffrest") == "image/jpeg"
        assert sniff_media_type(b"junk") == "application/octet-stream"

    def test_identical_upload_same_id_via_api(self, client, rng):
        image = upload_image(rng)
        job_a = submit(client, image).json()
        job_b = submit(client, image).json()
        assert job_a["spec"]["image_id"] == job_b["spec"]["image_id"]


class TestLedger:
    def test_append_and_replay(self, tmp_path):
        ledger = JobLedger(tmp_path / "jobs.ledger")
        ledger.append({"id": "a", "status": "queued", "created_at": "1"})
        ledger.append({"id": "a", "status": "done", "created_at": "1"})
        ledger.append({"id": "b", "status": "queued", "created_at": "2"})
        jobs = ledger.load()
        assert jobs["a"]["status"] == "done"
        assert jobs["b"]["status"] == "queued"

    def test_torn_tail_line_ignored(self, tmp_path):
        path = tmp_path / "jobs.ledger"
        ledger = JobLedger(path)
        ledger.append({"id": "a", "status": "queued", "created_at": "1"})
        with open(path, "a") as fh:
            fh.write('{"id": "b", "status"')  # crash mid-write
        assert set(ledger.load()) == {"a"}

    def test_compaction_preserves_latest_state(self, tmp_path):
        path = tmp_path / "jobs.ledger"
        ledger = JobLedger(path)
        for i in range(30):
            ledger.append({"id": "a", "status": "queued", "created_at": "1", "n": i})
        jobs = ledger.load()
        ledger._lines = 5000  # force the size trigger
        ledger.maybe_compact(jobs)
        assert len(path.read_text().splitlines()) == 1
        assert ledger.load()["a"]["n"] == 29


class TestRecovery:
    def test_interrupted_running_job_requeued_once(self, tmp_path, rng):
        data_dir = tmp_path / "data"
        store = ImageStore(data_dir / "images")
        image_id = store.put(upload_image(rng))
        labels_id = store.put(labels_bytes())
        ledger = JobLedger(data_dir / "jobs.ledger")
        spec = {
            "prompt": "a coat", "mask": {"d": 4, "e": 1, "f": 1},
            "seed": 0, "steps": 50, "guidance_scale": 7.5, "variations": 1,
            "image_id": image_id, "labels_id": labels_id,
        }
        ledger.append({
            "id": "interrupted", "status": "running", "spec": spec,
            "created_at": "2026-01-01T00:00:00+00:00", "finished_at": None,
            "result_image_ids": [], "error": None,
        })
        ledger.append({
            "id": "finished", "status": "done", "spec": spec,
            "created_at": "2026-01-01T00:00:01+00:00",
            "finished_at": "2026-01-01T00:00:02+00:00",
            "result_image_ids": [image_id], "error": None,
        })
        app = create_app(ServiceConfig(data_dir=data_dir))
        with TestClient(app) as client:
            done, _ = wait_for(client, "interrupted")
            assert done["status"] == "done"
            assert len(done["result_image_ids"]) == 1
            # terminal job recovered untouched
            finished = client.get("/api/jobs/finished").json()
            assert finished["status"] == "done"
            assert finished["result_image_ids"] == [image_id]
        # the interrupted job was executed exactly once: one requeue, one run
        transitions = [
            json.loads(line)["status"]
            for line in (data_dir / "jobs.ledger").read_text().splitlines()
            if json.loads(line)["id"] == "interrupted"
        ]
        assert transitions == ["running", "queued", "running", "done"]

    def test_queued_job_survives_restart(self, tmp_path, rng):
        data_dir = tmp_path / "data"
        store = ImageStore(data_dir / "images")
        image_id = store.put(upload_image(rng))
        labels_id = store.put(labels_bytes())
        ledger = JobLedger(data_dir / "jobs.ledger")
        ledger.append({
            "id": "waiting", "status": "queued",
            "spec": {
                "prompt": "x", "mask": {"d": 2, "e": 1, "f": 1},
                "seed": 0, "steps": 50, "guidance_scale": 7.5, "variations": 1,
                "image_id": image_id, "labels_id": labels_id,
            },
            "created_at": "2026-01-01T00:00:00+00:00", "finished_at": None,
            "result_image_ids": [], "error": None,
        })
        with TestClient(create_app(ServiceConfig(data_dir=data_dir))) as client:
            done, _ = wait_for(client, "waiting")
            assert done["status"] == "done"


class TestGetImage:
    def test_exact_bytes_round_trip(self, client, rng):
        image = upload_image(rng)
        job = submit(client, image).json()
        resp = client.get(f"/api/images/{job['spec']['image_id']}")
        assert resp.content == image

    def test_unknown_image(self, client):
        resp = client.get(f"/api/images/{'0' * 64}")
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"
