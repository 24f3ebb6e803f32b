"""Append-only job ledger.

Every job state transition appends one full JSON snapshot line; the latest
line per job id wins on reload. The file is compacted (rewritten with one
line per job) when the appended-lines count grows well past the live job
count. Writes are serialized by a lock; each append flushes to disk.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
from pathlib import Path

COMPACT_SLACK = 1024


class JobLedger:
    def __init__(self, path: Path | str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._lines = 0

    def load(self) -> dict[str, dict]:
        """Replay the ledger; returns the latest snapshot per job id."""
        jobs: dict[str, dict] = {}
        self._lines = 0
        if not self.path.is_file():
            return jobs
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    snapshot = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail write from a crash
                if isinstance(snapshot, dict) and "id" in snapshot:
                    jobs[snapshot["id"]] = snapshot
                    self._lines += 1
        return jobs

    def append(self, snapshot: dict) -> None:
        with self._lock:
            with open(self.path, "a") as fh:
                fh.write(json.dumps(snapshot, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._lines += 1

    def maybe_compact(self, jobs: dict[str, dict]) -> None:
        """Rewrite the ledger with one line per job once it has accumulated
        substantially more lines than live jobs."""
        with self._lock:
            if self._lines <= len(jobs) + COMPACT_SLACK:
                return
            fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=".ledger-")
            with os.fdopen(fd, "w") as fh:
                for job_id in sorted(jobs):
                    fh.write(json.dumps(jobs[job_id], sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, self.path)
            self._lines = len(jobs)
