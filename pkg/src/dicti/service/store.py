"""Content-addressed flat-file image store.

Blobs are keyed by the SHA-256 of their bytes, so identical uploads
deduplicate to one file. Writes go to a temp file first and are renamed
into place, so a crash never leaves a half-written blob under a valid id.
"""
from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

_MAGIC_TYPES = (
    (b"\x89PNG\r\n\x1a\n", "image/png"),
    (b"\xff\xd8\xff", "image/jpeg"),
)


def sniff_media_type(data: bytes) -> str:
    for magic, media_type in _MAGIC_TYPES:
        if data.startswith(magic):
            return media_type
    return "application/octet-stream"


class ImageStore:
    """Flat-file blob store addressed by content hash."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, blob_id: str) -> Path:
        return self.directory / blob_id

    def put(self, data: bytes) -> str:
        """Store bytes, returning their content id (idempotent)."""
        blob_id = hashlib.sha256(data).hexdigest()
        path = self._path(blob_id)
        if path.exists():
            return blob_id
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return blob_id

    def get(self, blob_id: str) -> tuple[bytes, str]:
        """Fetch (bytes, media type); KeyError for unknown ids."""
        path = self._path(blob_id)
        if not _valid_id(blob_id) or not path.is_file():
            raise KeyError(blob_id)
        data = path.read_bytes()
        return data, sniff_media_type(data)

    def __contains__(self, blob_id: str) -> bool:
        return _valid_id(blob_id) and self._path(blob_id).is_file()


def _valid_id(blob_id: str) -> bool:
    return len(blob_id) == 64 and all(c in "0123456789abcdef" for c in blob_id)
