"""Conditioning preparation and pluggable text-conditioned inpainting.

The editing pipeline hands a source image, an inpainting mask and an
augmented prompt to a backend. Backends are adapters: the "stub" backend
fills masked pixels with a deterministic pseudo-random field so the whole
pipeline is testable without model weights; the "diffusion" backend wraps
a pretrained latent-diffusion inpainting checkpoint.

Whatever the backend paints, :func:`synthesize` composites its output with
the source over the mask, so unmasked pixels always survive bit-exactly.
"""
from __future__ import annotations

import hashlib
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from .errors import BackendError, ContractViolation
from .image_io import as_rgb_image
from .maskgen import as_mask

# Fixed prompt suffix appended before synthesis to push the model toward
# photographic output.
PROMPT_SUFFIX = ", photorealism, detailed hands, natural lightning, sharp"

DEFAULT_STEPS = 50
DEFAULT_GUIDANCE = 7.5
DEFAULT_VARIATIONS = 4


def augment_prompt(prompt: str) -> str:
    """Append the fixed suffix once, keeping the original text as prefix."""
    return prompt + PROMPT_SUFFIX


def masked_image(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero out masked pixels, keeping only the areas to be preserved."""
    image = as_rgb_image(image)
    mask = as_mask(mask)
    if mask.shape != image.shape[:2]:
        raise ContractViolation(
            f"mask shape {mask.shape} does not match image shape {image.shape[:2]}"
        )
    return np.where(mask[..., None], np.uint8(0), image)


def downsample_mask(mask: np.ndarray, width: int, height: int) -> np.ndarray:
    """Reduce a mask to a (height, width) grid, keeping a cell True if any
    covered pixel is True (conservative covering)."""
    mask = as_mask(mask)
    if width <= 0 or height <= 0:
        raise ContractViolation(f"target dimensions must be positive, got {width}x{height}")
    src_h, src_w = mask.shape
    if src_h % height == 0 and src_w % width == 0:
        return mask.reshape(height, src_h // height, width, src_w // width).any(axis=(1, 3))
    # Rational cells: each source pixel belongs to exactly one target cell.
    rows = (np.arange(src_h, dtype=np.int64) * height) // src_h
    cols = (np.arange(src_w, dtype=np.int64) * width) // src_w
    out = np.zeros((height, width), dtype=bool)
    np.logical_or.at(out, (rows[:, None], cols[None, :]), mask)
    return out


@dataclass(frozen=True)
class SynthesisRequest:
    """Conditioning bundle for one synthesis call.

    ``prompt`` is the already-augmented text. ``variations`` is how many
    images to produce; variation ``v`` is generated from seed ``seed + v``.
    """

    image: np.ndarray
    mask: np.ndarray
    prompt: str
    seed: int = 0
    steps: int = DEFAULT_STEPS
    guidance_scale: float = DEFAULT_GUIDANCE
    variations: int = DEFAULT_VARIATIONS

    def __post_init__(self):
        image = as_rgb_image(self.image)
        mask = as_mask(self.mask)
        if mask.shape != image.shape[:2]:
            raise ContractViolation(
                f"mask shape {mask.shape} does not match image shape {image.shape[:2]}"
            )
        if not self.prompt:
            raise ContractViolation("prompt must be non-empty")
        if self.seed < 0:
            raise ContractViolation(f"seed must be >= 0, got {self.seed}")
        if self.steps <= 0:
            raise ContractViolation(f"steps must be > 0, got {self.steps}")
        if self.guidance_scale <= 0:
            raise ContractViolation(f"guidance_scale must be > 0, got {self.guidance_scale}")
        if self.variations < 1:
            raise ContractViolation(f"variations must be >= 1, got {self.variations}")


def _field_rng(seed: int, prompt: str) -> np.random.Generator:
    digest = hashlib.blake2b(
        f"{seed}\x1f{prompt}".encode("utf-8"), digest_size=8
    ).digest()
    return np.random.default_rng(int.from_bytes(digest, "big"))


def stub_fill(request: SynthesisRequest, variation: int = 0) -> np.ndarray:
    """Deterministic test fill: masked pixels become a pseudo-random color
    field keyed on (seed + variation, prompt); unmasked pixels are copied.

    Reproducible bit-for-bit across runs and platforms.
    """
    image = as_rgb_image(request.image)
    mask = as_mask(request.mask)
    rng = _field_rng(request.seed + variation, request.prompt)
    field = rng.integers(0, 256, size=image.shape, dtype=np.uint8)
    return np.where(mask[..., None], field, image)


class InpaintingBackend(ABC):
    """Adapter interface over a text-conditioned inpainting generator.

    ``generate`` returns a raw (H, W, 3) uint8 image for one variation;
    calls are serialized per instance because real backends are
    accelerator-bound.
    """

    name: str = "backend"
    #: square resolution the backend natively works at, or None for any size
    native_size: int | None = None

    def __init__(self):
        self._lock = threading.Lock()

    @abstractmethod
    def generate(self, request: SynthesisRequest, variation: int) -> np.ndarray:
        ...


class StubBackend(InpaintingBackend):
    """Non-neural deterministic backend used for tests and desk runs."""

    name = "stub"

    def generate(self, request: SynthesisRequest, variation: int) -> np.ndarray:
        return stub_fill(request, variation)


def _pad_to_square(array: np.ndarray) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    h, w = array.shape[:2]
    side = max(h, w)
    top = (side - h) // 2
    left = (side - w) // 2
    pad = [(top, side - h - top), (left, side - w - left)]
    if array.ndim == 3:
        pad.append((0, 0))
    return np.pad(array, pad), (top, left, h, w)


def fit_to_square(
    image: np.ndarray, mask: np.ndarray, size: int
) -> tuple[np.ndarray, np.ndarray, tuple[int, int, int, int]]:
    """Aspect-preserving pad-and-resize of an image/mask pair to size x size.

    Returns the transformed pair plus the crop box needed to invert the
    transform with :func:`restore_from_square`.
    """
    sq_image, box = _pad_to_square(image)
    sq_mask, _ = _pad_to_square(mask)
    resized_image = np.asarray(
        Image.fromarray(sq_image, mode="RGB").resize((size, size), Image.BICUBIC)
    )
    resized_mask = (
        np.asarray(
            Image.fromarray(np.where(sq_mask, np.uint8(255), np.uint8(0)), mode="L").resize(
                (size, size), Image.NEAREST
            )
        )
        > 127
    )
    return resized_image, resized_mask, box


def restore_from_square(image: np.ndarray, box: tuple[int, int, int, int]) -> np.ndarray:
    """Invert :func:`fit_to_square`: resize back to the padded square and crop."""
    top, left, h, w = box
    side = max(h, w)
    restored = np.asarray(
        Image.fromarray(image, mode="RGB").resize((side, side), Image.BICUBIC)
    )
    return restored[top : top + h, left : left + w]


@dataclass
class DiffusionSettings:
    """Configuration for the real latent-diffusion inpainting adapter."""

    model: str = "stabilityai/stable-diffusion-2-inpainting"
    device: str = "cpu"
    steps: int = DEFAULT_STEPS
    guidance_scale: float = DEFAULT_GUIDANCE
    deterministic: bool = True
    native_size: int = 512


class DiffusionBackend(InpaintingBackend):
    """Latent-diffusion inpainting adapter.

    Imports torch/diffusers lazily so the package works without them.
    Determinism holds when ``deterministic`` is set and the underlying
    model runs in deterministic mode; otherwise best-effort.
    """

    name = "diffusion"

    def __init__(self, settings: DiffusionSettings | None = None):
        super().__init__()
        self.settings = settings or DiffusionSettings()
        self.native_size = self.settings.native_size
        self._pipe = None

    def _load(self):
        if self._pipe is not None:
            return self._pipe
        try:
            import torch
            from diffusers import StableDiffusionInpaintPipeline
        except ImportError as exc:
            raise BackendError(
                "diffusion backend needs the 'diffusion' extra "
                f"(pip install dicti[diffusion]): {exc}"
            ) from exc
        try:
            self._pipe = StableDiffusionInpaintPipeline.from_pretrained(self.settings.model)
            self._pipe.to(self.settings.device)
        except Exception as exc:
            raise BackendError(f"failed to load model {self.settings.model!r}: {exc}") from exc
        if self.settings.deterministic:
            torch.use_deterministic_algorithms(True, warn_only=True)
        return self._pipe

    def generate(self, request: SynthesisRequest, variation: int) -> np.ndarray:
        pipe = self._load()
        import torch

        image, mask, box = fit_to_square(request.image, request.mask, self.native_size)
        generator = torch.Generator(self.settings.device).manual_seed(request.seed + variation)
        result = pipe(
            prompt=request.prompt,
            image=Image.fromarray(image, mode="RGB"),
            mask_image=Image.fromarray(np.where(mask, np.uint8(255), np.uint8(0)), mode="L"),
            num_inference_steps=request.steps,
            guidance_scale=request.guidance_scale,
            generator=generator,
        )
        out = np.asarray(result.images[0].convert("RGB"))
        return restore_from_square(out, box)


def synthesize(request: SynthesisRequest, backend: InpaintingBackend) -> list[np.ndarray]:
    """Produce ``request.variations`` garment images.

    Every unmasked pixel of each output equals the input pixel exactly:
    the backend output is composited with the input over the mask before
    return. Deterministic per (seed + variation index) for deterministic
    backends.
    """
    image = as_rgb_image(request.image)
    mask3 = as_mask(request.mask)[..., None]
    outputs = []
    with backend._lock:
        for variation in range(request.variations):
            try:
                raw = backend.generate(request, variation)
            except BackendError:
                raise
            except Exception as exc:
                raise BackendError(
                    f"backend {backend.name!r} failed on variation {variation}: {exc}"
                ) from exc
            raw = as_rgb_image(raw)
            if raw.shape != image.shape:
                raise ContractViolation(
                    f"backend returned shape {raw.shape}, expected {image.shape}"
                )
            outputs.append(np.where(mask3, raw, image))
    return outputs


def load_backend_config(path: Path | str) -> dict:
    """Read a YAML backend config (model, device, steps, guidance_scale,
    deterministic)."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ContractViolation(f"backend config must be a mapping, got {type(data).__name__}")
    return data


def create_backend(name: str, config: dict | None = None) -> InpaintingBackend:
    """Instantiate a backend by name: "stub" or "diffusion"."""
    config = config or {}
    if name == "stub":
        return StubBackend()
    if name == "diffusion":
        known = {f.name for f in DiffusionSettings.__dataclass_fields__.values()}
        unknown = set(config) - known
        if unknown:
            raise ContractViolation(f"unknown diffusion settings: {sorted(unknown)}")
        return DiffusionBackend(DiffusionSettings(**config))
    raise ContractViolation(f"unknown backend {name!r}; expected 'stub' or 'diffusion'")
