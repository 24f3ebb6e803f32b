"""Reading and writing the pipeline's image artifacts.

Label maps travel as single-channel 8-bit grayscale PNG where the pixel
value is the label index (0-24). Binary masks travel as single-channel
8-bit PNG with values {0, 255}. Photos are 8-bit RGB.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ContractViolation
from .maskgen import as_label_map, as_mask


def as_rgb_image(image: np.ndarray) -> np.ndarray:
    """Validate and return an (H, W, 3) uint8 array."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractViolation(f"image must have shape (H, W, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        raise ContractViolation(f"image must be uint8, got dtype {arr.dtype}")
    return arr


def load_rgb(path: Path | str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def save_rgb(image: np.ndarray, path: Path | str) -> None:
    Image.fromarray(as_rgb_image(image), mode="RGB").save(path)


def decode_rgb(data: bytes) -> np.ndarray:
    """Decode encoded image bytes to RGB; raises ContractViolation on junk."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise ContractViolation(f"upload does not decode as an image: {exc}") from exc


def encode_png(image: np.ndarray) -> bytes:
    arr = np.asarray(image)
    if arr.ndim == 2:
        img = Image.fromarray(arr, mode="L")
    else:
        img = Image.fromarray(as_rgb_image(arr), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def load_label_map(path: Path | str) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return as_label_map(arr.astype(np.int32))


def decode_label_map(data: bytes) -> np.ndarray:
    """Decode uploaded label-map PNG bytes."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            arr = np.asarray(img.convert("L"))
    except (UnidentifiedImageError, OSError) as exc:
        raise ContractViolation(f"upload does not decode as a label map: {exc}") from exc
    return as_label_map(arr.astype(np.int32))


def save_label_map(labels: np.ndarray, path: Path | str) -> None:
    Image.fromarray(as_label_map(labels), mode="L").save(path, format="PNG")


def mask_to_bytes(mask: np.ndarray) -> np.ndarray:
    return np.where(as_mask(mask), np.uint8(255), np.uint8(0))


def load_mask(path: Path | str) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr > 127


def save_mask(mask: np.ndarray, path: Path | str) -> None:
    Image.fromarray(mask_to_bytes(mask), mode="L").save(path, format="PNG")


def image_size(path: Path | str) -> tuple[int, int]:
    """(width, height) without decoding the full image."""
    with Image.open(path) as img:
        return img.size
