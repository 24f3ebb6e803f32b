"""Realism and prompt-adherence scoring for generated image sets.

Three measures:

* KID: unbiased squared MMD between feature distributions of generated
  and reference images, cubic polynomial kernel (x.y/dim + 1)^3, averaged
  over seeded random subsets. Lower is better; the unbiased estimator may
  go negative and is reported as-is.
* CLIP-S: 100 * max(cos(image embedding, prompt embedding), 0).
* CLIP-IQA: softmax of the image's cosine similarity to an antonym prompt
  pair, e^s_pos / (e^s_pos + e^s_neg).

Feature vectors and embeddings come from an injected extractor, so the
math is testable without neural models.
"""
from __future__ import annotations

import csv
import hashlib
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation, InsufficientSamples

DEFAULT_ANTONYMS = ("Good photo.", "Bad photo.")
DEFAULT_N_SUBSETS = 100
DEFAULT_MAX_SUBSET = 1000


def as_feature_set(rows: np.ndarray) -> np.ndarray:
    """Validate and return an (n, dim) float64 feature matrix."""
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise ContractViolation(f"feature set must be (n, dim) with dim >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ContractViolation("feature set contains non-finite entries")
    return arr


def poly_kernel(x: np.ndarray, y: np.ndarray, dim: int) -> float:
    """Cubic polynomial kernel (x.y / dim + 1)^3."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != (dim,) or y.shape != (dim,):
        raise ContractViolation(f"expected two vectors of length {dim}, got {x.shape} and {y.shape}")
    return float((np.dot(x, y) / dim + 1.0) ** 3)


def _poly_gram(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return ((a @ b.T) / a.shape[1] + 1.0) ** 3


def mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    """Unbiased squared MMD with the cubic polynomial kernel.

    1/(n(n-1)) * sum over i != j of
    k(x_i, x_j) + k(y_i, y_j) - k(x_i, y_j) - k(x_j, y_i).

    Exactly 0 when x and y are the identical sample set: the off-diagonal
    terms cancel pairwise before summation.
    """
    x = as_feature_set(x)
    y = as_feature_set(y)
    if x.shape[1] != y.shape[1]:
        raise ContractViolation(f"feature dims differ: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] != y.shape[0]:
        raise ContractViolation(f"sample counts differ: {x.shape[0]} vs {y.shape[0]}")
    n = x.shape[0]
    if n < 2:
        raise InsufficientSamples(f"unbiased estimator needs n >= 2, got {n}")
    k_xx = _poly_gram(x, x)
    k_yy = _poly_gram(y, y)
    k_xy = _poly_gram(x, y)
    # Sum over i != j of the cross terms k(x_i, y_j) + k(x_j, y_i) equals
    # twice the off-diagonal sum of k_xy. Grouping the totals this way makes
    # identical sample sets cancel exactly in floating point.
    np.fill_diagonal(k_xx, 0.0)
    np.fill_diagonal(k_yy, 0.0)
    np.fill_diagonal(k_xy, 0.0)
    sum_xx = k_xx.sum()
    sum_yy = k_yy.sum()
    sum_xy = k_xy.sum()
    return float(((sum_xx - sum_xy) + (sum_yy - sum_xy)) / (n * (n - 1)))


def kid(
    x: np.ndarray,
    y: np.ndarray,
    subset_size: int | None = None,
    n_subsets: int = DEFAULT_N_SUBSETS,
    rng_seed: int = 0,
) -> tuple[float, float]:
    """KID mean and standard deviation over seeded random subsets.

    Each subset draws ``subset_size`` indices without replacement; when
    both sets have the same sample count, the same (sorted) index draw is
    applied to both, so identical inputs score exactly 0. Deterministic
    for a fixed ``rng_seed``.
    """
    x = as_feature_set(x)
    y = as_feature_set(y)
    if x.shape[1] != y.shape[1]:
        raise ContractViolation(f"feature dims differ: {x.shape[1]} vs {y.shape[1]}")
    available = min(x.shape[0], y.shape[0])
    if subset_size is None:
        subset_size = min(DEFAULT_MAX_SUBSET, available)
    if subset_size < 2:
        raise InsufficientSamples(f"subset_size must be >= 2, got {subset_size}")
    if subset_size > available:
        raise InsufficientSamples(
            f"subset_size {subset_size} exceeds available samples {available}"
        )
    if n_subsets < 1:
        raise ContractViolation(f"n_subsets must be >= 1, got {n_subsets}")
    rng = np.random.default_rng(rng_seed)
    paired = x.shape[0] == y.shape[0]
    values = np.empty(n_subsets, dtype=np.float64)
    for t in range(n_subsets):
        idx_x = np.sort(rng.choice(x.shape[0], subset_size, replace=False))
        idx_y = idx_x if paired else np.sort(rng.choice(y.shape[0], subset_size, replace=False))
        values[t] = mmd2_unbiased(x[idx_x], y[idx_y])
    return float(values.mean()), float(values.std())


def normalize_embedding(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise ContractViolation("cannot normalize a zero or non-finite vector")
    return v / norm


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise ContractViolation(f"embedding dims differ: {a.shape} vs {b.shape}")
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        raise ContractViolation("zero-norm embedding")
    return float(np.dot(a, b) / denom)


def clip_score(image_embedding: np.ndarray, text_embedding: np.ndarray) -> float:
    """100 * cosine similarity, clamped below at 0; range [0, 100]."""
    return 100.0 * max(_cosine(image_embedding, text_embedding), 0.0)


def clip_iqa(
    image_embedding: np.ndarray,
    positive_embedding: np.ndarray,
    negative_embedding: np.ndarray,
) -> float:
    """Softmax weight of the positive antonym: e^s_pos / (e^s_pos + e^s_neg).

    Strictly inside (0, 1); 0.5 when both similarities tie.
    """
    s_pos = _cosine(image_embedding, positive_embedding)
    s_neg = _cosine(image_embedding, negative_embedding)
    e_pos = math.exp(s_pos)
    e_neg = math.exp(s_neg)
    return e_pos / (e_pos + e_neg)


class FeatureExtractor(ABC):
    """Maps images to feature vectors (for KID) and images/texts to
    embeddings of a shared space (for CLIP-S / CLIP-IQA).

    Implementations must be deterministic per input with fixed output
    dimensions.
    """

    name: str = "extractor"

    @abstractmethod
    def features(self, images: list[np.ndarray]) -> np.ndarray:
        """(n, dim) feature matrix for a list of (H, W, 3) uint8 images."""

    @abstractmethod
    def embed_image(self, image: np.ndarray) -> np.ndarray:
        """Unit-norm embedding of an image."""

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray:
        """Unit-norm embedding of a text."""


class StubExtractor(FeatureExtractor):
    """Deterministic non-neural extractor for desk runs and tests.

    Features are simple pixel statistics; embeddings are hash-seeded unit
    vectors, so scores are stable but carry no semantics.
    """

    name = "stub"

    def __init__(self, embed_dim: int = 64):
        self.embed_dim = embed_dim

    def features(self, images: list[np.ndarray]) -> np.ndarray:
        rows = []
        for image in images:
            arr = np.asarray(image, dtype=np.float64)
            channel_mean = arr.mean(axis=(0, 1)) / 255.0
            channel_std = arr.std(axis=(0, 1)) / 255.0
            gray = arr.mean(axis=2)
            hist, _ = np.histogram(gray, bins=10, range=(0.0, 255.0))
            hist = hist / gray.size
            rows.append(np.concatenate([channel_mean, channel_std, hist]))
        return np.asarray(rows, dtype=np.float64)

    def _hashed_unit(self, key: bytes) -> np.ndarray:
        digest = hashlib.blake2b(key, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        return normalize_embedding(rng.standard_normal(self.embed_dim))

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        arr = np.ascontiguousarray(np.asarray(image, dtype=np.uint8))
        return self._hashed_unit(b"image\x1f" + arr.tobytes())

    def embed_text(self, text: str) -> np.ndarray:
        return self._hashed_unit(b"text\x1f" + text.encode("utf-8"))


class ClipExtractor(FeatureExtractor):
    """Vision-language extractor backed by a pretrained CLIP checkpoint.

    Needs the 'clip' extra and downloaded weights; used for the optional
    full-scale evaluation runs, never in the test suite.
    """

    name = "clip"

    def __init__(self, model: str = "openai/clip-vit-base-patch32", device: str = "cpu"):
        self.model_name = model
        self.device = device
        self._bundle = None

    def _load(self):
        if self._bundle is None:
            try:
                import torch  # noqa: F401
                from transformers import CLIPModel, CLIPProcessor
            except ImportError as exc:
                raise ContractViolation(
                    f"clip extractor needs the 'clip' extra (pip install dicti[clip]): {exc}"
                ) from exc
            model = CLIPModel.from_pretrained(self.model_name).to(self.device).eval()
            processor = CLIPProcessor.from_pretrained(self.model_name)
            self._bundle = (model, processor)
        return self._bundle

    def features(self, images: list[np.ndarray]) -> np.ndarray:
        return np.stack([self.embed_image(image) for image in images])

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        import torch

        model, processor = self._load()
        inputs = processor(images=image, return_tensors="pt").to(self.device)
        with torch.no_grad():
            out = model.get_image_features(**inputs)[0].cpu().numpy()
        return normalize_embedding(out)

    def embed_text(self, text: str) -> np.ndarray:
        import torch

        model, processor = self._load()
        inputs = processor(text=[text], return_tensors="pt", padding=True).to(self.device)
        with torch.no_grad():
            out = model.get_text_features(**inputs)[0].cpu().numpy()
        return normalize_embedding(out)


def create_extractor(name: str, **kwargs) -> FeatureExtractor:
    if name == "stub":
        return StubExtractor(**kwargs)
    if name == "clip":
        return ClipExtractor(**kwargs)
    raise ContractViolation(f"unknown extractor {name!r}; expected 'stub' or 'clip'")


@dataclass(frozen=True)
class ImageScore:
    """Per-image prompt-adherence and quality scores."""

    image_id: str
    prompt_id: int
    clip_s: float
    clip_iqa: float


@dataclass(frozen=True)
class MetricsReport:
    """Aggregate scores over one generated image set."""

    kid_mean: float
    kid_std: float
    clip_s_mean: float
    clip_iqa_mean: float
    n_images: int
    subset_size: int
    n_subsets: int
    rng_seed: int


def score_images(
    images: list[np.ndarray],
    prompts: list[str],
    extractor: FeatureExtractor,
    antonym_pair: tuple[str, str] = DEFAULT_ANTONYMS,
    image_ids: list[str] | None = None,
    prompt_ids: list[int] | None = None,
) -> list[ImageScore]:
    """CLIP-S against each image's own prompt and CLIP-IQA per image."""
    if len(images) != len(prompts):
        raise ContractViolation(f"{len(images)} images but {len(prompts)} prompts")
    if image_ids is None:
        image_ids = [str(i) for i in range(len(images))]
    if prompt_ids is None:
        prompt_ids = list(range(len(prompts)))
    pos = extractor.embed_text(antonym_pair[0])
    neg = extractor.embed_text(antonym_pair[1])
    text_cache: dict[str, np.ndarray] = {}
    scores = []
    for image, prompt, image_id, prompt_id in zip(images, prompts, image_ids, prompt_ids):
        if prompt not in text_cache:
            text_cache[prompt] = extractor.embed_text(prompt)
        c_i = extractor.embed_image(image)
        scores.append(
            ImageScore(
                image_id=image_id,
                prompt_id=prompt_id,
                clip_s=clip_score(c_i, text_cache[prompt]),
                clip_iqa=clip_iqa(c_i, pos, neg),
            )
        )
    return scores


def evaluate_set(
    generated: list[np.ndarray],
    reference: list[np.ndarray],
    prompts: list[str],
    extractor: FeatureExtractor,
    antonym_pair: tuple[str, str] = DEFAULT_ANTONYMS,
    *,
    image_ids: list[str] | None = None,
    prompt_ids: list[int] | None = None,
    subset_size: int | None = None,
    n_subsets: int = DEFAULT_N_SUBSETS,
    rng_seed: int = 0,
    out_dir: Path | str | None = None,
) -> MetricsReport:
    """Score a generated set: KID against the reference set, CLIP-S per
    (image, prompt) pair, CLIP-IQA per image; aggregates averaged.

    When ``out_dir`` is given, writes ``scores.csv`` (one row per image)
    and ``summary.csv``.
    """
    if not generated or not reference:
        raise InsufficientSamples("need non-empty generated and reference sets")
    if len(prompts) != len(generated):
        raise ContractViolation(f"{len(generated)} images but {len(prompts)} prompts")
    gen_features = extractor.features(generated)
    ref_features = extractor.features(reference)
    available = min(gen_features.shape[0], ref_features.shape[0])
    if subset_size is None:
        subset_size = min(DEFAULT_MAX_SUBSET, available)
    kid_mean, kid_std = kid(
        gen_features, ref_features, subset_size=subset_size, n_subsets=n_subsets, rng_seed=rng_seed
    )
    scores = score_images(generated, prompts, extractor, antonym_pair, image_ids, prompt_ids)
    report = MetricsReport(
        kid_mean=kid_mean,
        kid_std=kid_std,
        clip_s_mean=float(np.mean([s.clip_s for s in scores])),
        clip_iqa_mean=float(np.mean([s.clip_iqa for s in scores])),
        n_images=len(generated),
        subset_size=subset_size,
        n_subsets=n_subsets,
        rng_seed=rng_seed,
    )
    if out_dir is not None:
        write_report(report, scores, out_dir)
    return report


def write_report(
    report: MetricsReport,
    scores: list[ImageScore],
    out_dir: Path | str,
    extra_columns: dict[str, list] | None = None,
) -> None:
    """Emit scores.csv (per image, optional extra columns) and summary.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    extra = extra_columns or {}
    for name, column in extra.items():
        if len(column) != len(scores):
            raise ContractViolation(f"extra column {name!r} has {len(column)} rows, expected {len(scores)}")
    with open(out / "scores.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "prompt_id", "clip_s", "clip_iqa", *extra.keys()])
        for i, s in enumerate(scores):
            writer.writerow(
                [s.image_id, s.prompt_id, f"{s.clip_s:.6f}", f"{s.clip_iqa:.6f}"]
                + [extra[name][i] for name in extra]
            )
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "kid_mean",
                "kid_std",
                "clip_s_mean",
                "clip_iqa_mean",
                "n_images",
                "subset_size",
                "n_subsets",
                "rng_seed",
            ]
        )
        writer.writerow(
            [
                f"{report.kid_mean:.8f}",
                f"{report.kid_std:.8f}",
                f"{report.clip_s_mean:.6f}",
                f"{report.clip_iqa_mean:.6f}",
                report.n_images,
                report.subset_size,
                report.n_subsets,
                report.rng_seed,
            ]
        )
