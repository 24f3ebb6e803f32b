"""End-to-end orchestration: parse, mask, synthesize, stitch.

Also the batch harnesses: dataset ingestion, the cartesian
image-by-prompt evaluation run, and the dilation-radius ablation sweep.
Batch runs record per-cell failures and continue, so large sweeps survive
isolated bad inputs.
"""
from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import image_io
from .errors import ContractViolation, EmptyDatasetError, IngestionError, NoSubjectError
from .maskgen import (
    MaskGenConfig,
    as_mask,
    head_mask,
    inpainting_mask,
    mask_area,
    mask_from_labels,
)
from .metrics import (
    DEFAULT_ANTONYMS,
    DEFAULT_N_SUBSETS,
    FeatureExtractor,
    ImageScore,
    MetricsReport,
    evaluate_set,
    kid,
    score_images,
    write_report,
)
from .parsers import LabelMapProvider
from .synthesis import (
    DEFAULT_GUIDANCE,
    DEFAULT_STEPS,
    DEFAULT_VARIATIONS,
    InpaintingBackend,
    SynthesisRequest,
    augment_prompt,
    synthesize,
)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}


def stitch(generated: np.ndarray, source: np.ndarray, head: np.ndarray) -> np.ndarray:
    """Identity-preserving composite: source pixels under the head mask,
    generated pixels elsewhere. Hard edges, no blending."""
    generated = image_io.as_rgb_image(generated)
    source = image_io.as_rgb_image(source)
    head = as_mask(head)
    if generated.shape != source.shape or head.shape != source.shape[:2]:
        raise ContractViolation(
            f"shape mismatch: generated {generated.shape}, source {source.shape}, "
            f"head mask {head.shape}"
        )
    return np.where(head[..., None], source, generated)


def derive_seed(base_seed: int, *parts) -> int:
    """Stable per-task seed from the base seed and task coordinates."""
    key = "\x1f".join([str(base_seed), *[str(p) for p in parts]])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1  # keep it a non-negative int64


@dataclass(frozen=True)
class EditJobSpec:
    """One edit request: where the image lives and how to process it."""

    image_path: Path
    prompt: str
    maskgen: MaskGenConfig = field(default_factory=MaskGenConfig)
    seed: int = 0
    steps: int = DEFAULT_STEPS
    guidance_scale: float = DEFAULT_GUIDANCE
    variations: int = DEFAULT_VARIATIONS
    backend: str = "stub"
    labels_path: Path | None = None
    out_dir: Path | None = None
    save_intermediates: bool = False

    def __post_init__(self):
        if not self.prompt:
            raise ContractViolation("prompt must be non-empty")


@dataclass
class EditResult:
    """Outputs of one edit: final frames plus inspectable intermediates."""

    edited: list[np.ndarray]
    garments: list[np.ndarray]
    inpaint_mask: np.ndarray
    head: np.ndarray


def edit_image(
    image: np.ndarray,
    labels: np.ndarray,
    prompt: str,
    cfg: MaskGenConfig,
    backend: InpaintingBackend,
    *,
    seed: int = 0,
    steps: int = DEFAULT_STEPS,
    guidance_scale: float = DEFAULT_GUIDANCE,
    variations: int = DEFAULT_VARIATIONS,
) -> EditResult:
    """Full edit on in-memory arrays: masks, synthesis, head stitching.

    Raises NoSubjectError when the label map holds no body pixels.
    """
    image = image_io.as_rgb_image(image)
    if labels.shape != image.shape[:2]:
        raise ContractViolation(
            f"label map shape {labels.shape} does not match image {image.shape[:2]}"
        )
    if not mask_from_labels(labels, cfg.body_labels).any():
        raise NoSubjectError("label map contains no body pixels; nothing to edit")
    m_i = inpainting_mask(labels, cfg)
    m_h = head_mask(labels, cfg)
    request = SynthesisRequest(
        image=image,
        mask=m_i,
        prompt=augment_prompt(prompt),
        seed=seed,
        steps=steps,
        guidance_scale=guidance_scale,
        variations=variations,
    )
    garments = synthesize(request, backend)
    edited = [stitch(g, image, m_h) for g in garments]
    return EditResult(edited=edited, garments=garments, inpaint_mask=m_i, head=m_h)


def run_edit(
    spec: EditJobSpec,
    parser: LabelMapProvider | None,
    backend: InpaintingBackend,
) -> list[np.ndarray]:
    """File-level edit: load the image, resolve labels, edit, and persist
    outputs when the spec names an output directory."""
    image = image_io.load_rgb(spec.image_path)
    if spec.labels_path is not None:
        labels = image_io.load_label_map(spec.labels_path)
    elif parser is not None:
        labels = parser.labels_for(image, image_id=spec.image_path.stem)
    else:
        raise ContractViolation("no labels path given and no parser configured")
    result = edit_image(
        image,
        labels,
        spec.prompt,
        spec.maskgen,
        backend,
        seed=spec.seed,
        steps=spec.steps,
        guidance_scale=spec.guidance_scale,
        variations=spec.variations,
    )
    if spec.out_dir is not None:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = spec.image_path.stem
        for v, edited in enumerate(result.edited):
            image_io.save_rgb(edited, out / f"{stem}_edit_{v:02d}.png")
        if spec.save_intermediates:
            image_io.save_mask(result.inpaint_mask, out / f"{stem}_mask_inpaint.png")
            image_io.save_mask(result.head, out / f"{stem}_mask_head.png")
            for v, garment in enumerate(result.garments):
                image_io.save_rgb(garment, out / f"{stem}_garment_{v:02d}.png")
    return result.edited


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: Path
    label_path: Path | None = None
    width: int | None = None
    height: int | None = None


@dataclass
class DatasetManifest:
    """Ordered, deterministic listing of a dataset's images."""

    name: str
    entries: list[ManifestEntry]

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise ContractViolation("manifest image ids must be unique")

    def __len__(self) -> int:
        return len(self.entries)


def _image_files(directory: Path, recursive: bool = False) -> list[Path]:
    pattern = "**/*" if recursive else "*"
    return sorted(
        p for p in directory.glob(pattern)
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def _find_subdir(root: Path, candidates: tuple[str, ...]) -> Path | None:
    for name in candidates:
        if (root / name).is_dir():
            return root / name
    return None


def ingest_viton(
    root: Path | str,
    labels_dir: Path | str | None = None,
    record_sizes: bool = False,
) -> DatasetManifest:
    """Manifest for a VITON-HD style layout: an ``image`` directory of
    same-size frontal photos, optionally a sibling label-map directory."""
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset root not found: {root}")
    image_dir = _find_subdir(root, ("image", "images"))
    if image_dir is None:
        if _image_files(root):
            image_dir = root
        else:
            raise IngestionError(f"no image directory under {root}")
    if labels_dir is not None:
        label_dir = Path(labels_dir)
        if not label_dir.is_dir():
            raise IngestionError(f"label-map directory not found: {label_dir}")
    else:
        label_dir = _find_subdir(root, ("image-densepose", "image-parse", "labels"))
    files = _image_files(image_dir)
    if not files:
        raise EmptyDatasetError(f"no images in {image_dir}")
    entries = []
    for path in files:
        label_path = None
        if label_dir is not None:
            candidate = label_dir / f"{path.stem}.png"
            if candidate.is_file():
                label_path = candidate
        width = height = None
        if record_sizes:
            width, height = image_io.image_size(path)
        entries.append(
            ManifestEntry(
                image_id=path.stem, image_path=path, label_path=label_path,
                width=width, height=height,
            )
        )
    return DatasetManifest(name="viton", entries=entries)


def ingest_fashionpedia(
    root: Path | str,
    labels_root: Path | str | None = None,
) -> DatasetManifest:
    """Manifest for an in-the-wild layout: images of mixed sizes, possibly
    nested in split directories; ids come from relative paths and each
    entry records its dimensions."""
    root = Path(root)
    if not root.is_dir():
        raise IngestionError(f"dataset root not found: {root}")
    label_dir = Path(labels_root) if labels_root is not None else _find_subdir(root, ("labels",))
    files = [
        p for p in _image_files(root, recursive=True)
        if label_dir is None or not p.is_relative_to(label_dir)
    ]
    if not files:
        raise EmptyDatasetError(f"no images under {root}")
    entries = []
    for path in files:
        rel = path.relative_to(root)
        image_id = rel.with_suffix("").as_posix()
        label_path = None
        if label_dir is not None:
            candidate = label_dir / rel.with_suffix(".png")
            if candidate.is_file():
                label_path = candidate
        width, height = image_io.image_size(path)
        entries.append(
            ManifestEntry(
                image_id=image_id, image_path=path, label_path=label_path,
                width=width, height=height,
            )
        )
    entries.sort(key=lambda e: e.image_id)
    return DatasetManifest(name="fashionpedia", entries=entries)


def load_prompts(path: Path | str) -> list[str]:
    """Prompt file: one prompt per line, 0-based prompt ids by position."""
    lines = [line.strip() for line in Path(path).read_text().splitlines()]
    prompts = [line for line in lines if line]
    if not prompts:
        raise ContractViolation(f"prompt file {path} is empty")
    return prompts


def crop_top_square(image: np.ndarray) -> np.ndarray:
    """Center-crop the top WxW region (upper-body crop for square models)."""
    h, w = image.shape[:2]
    if h <= w:
        left = (w - h) // 2
        return image[:, left : left + h]
    return image[:w, :, :]


@dataclass(frozen=True)
class GenerationTask:
    """One planned generation cell."""

    image_id: str
    prompt_id: int
    variation: int
    seed: int


def plan_eval(
    manifest: DatasetManifest, prompts: list[str], base_seed: int = 0
) -> list[GenerationTask]:
    """Cartesian image-by-prompt plan, one variation per pair."""
    if not manifest.entries:
        raise EmptyDatasetError("manifest has no entries")
    if not prompts:
        raise ContractViolation("prompt list is empty")
    return [
        GenerationTask(
            image_id=entry.image_id,
            prompt_id=prompt_id,
            variation=0,
            seed=derive_seed(base_seed, entry.image_id, prompt_id, 0),
        )
        for entry in manifest.entries
        for prompt_id in range(len(prompts))
    ]


@dataclass
class AblationGrid:
    """Sweep definition over the body-dilation radius."""

    d_values: list[int]
    prompts: list[str]
    entries: list[ManifestEntry]
    variations: int = 5
    e: int = 10
    f: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if not self.d_values:
            raise ContractViolation("d_values must be non-empty")
        if any(b <= a for a, b in zip(self.d_values, self.d_values[1:])):
            raise ContractViolation(f"d_values must be strictly increasing, got {self.d_values}")
        if not self.prompts:
            raise ContractViolation("prompts must be non-empty")
        if self.variations < 1:
            raise ContractViolation(f"variations must be >= 1, got {self.variations}")


def plan_ablation(grid: AblationGrid) -> dict[int, list[GenerationTask]]:
    """Per-radius generation plan for the dilation sweep."""
    plan: dict[int, list[GenerationTask]] = {}
    for d in grid.d_values:
        plan[d] = [
            GenerationTask(
                image_id=entry.image_id,
                prompt_id=prompt_id,
                variation=variation,
                seed=derive_seed(grid.base_seed, entry.image_id, prompt_id, variation),
            )
            for entry in grid.entries
            for prompt_id in range(len(grid.prompts))
            for variation in range(grid.variations)
        ]
    return plan


@dataclass(frozen=True)
class CellFailure:
    """A batch cell that errored; the run continues without it."""

    d: int | None
    image_id: str
    prompt_id: int
    variation: int
    error: str


def _write_failures(failures: list[CellFailure], out_dir: Path) -> None:
    if not failures:
        return
    with open(out_dir / "failures.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "image_id", "prompt_id", "variation", "error"])
        for f in failures:
            writer.writerow(["" if f.d is None else f.d, f.image_id, f.prompt_id, f.variation, f.error])


def _guard(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # recorded by the caller, run continues
        return exc


@dataclass
class EvalRun:
    """Everything run_eval produced."""

    report: MetricsReport
    scores: list[ImageScore]
    failures: list[CellFailure]


def _load_entry(entry: ManifestEntry, square_crop: bool) -> tuple[np.ndarray, np.ndarray | None]:
    image = image_io.load_rgb(entry.image_path)
    labels = image_io.load_label_map(entry.label_path) if entry.label_path else None
    if square_crop:
        image = crop_top_square(image)
        labels = crop_top_square(labels) if labels is not None else None
    return image, labels


def _entry_labels(
    entry: ManifestEntry,
    image: np.ndarray,
    labels: np.ndarray | None,
    parser: LabelMapProvider | None,
) -> np.ndarray:
    if labels is not None:
        return labels
    if parser is None:
        raise ContractViolation(f"no label map for {entry.image_id} and no parser configured")
    return parser.labels_for(image, image_id=entry.image_id)


def run_eval(
    manifest: DatasetManifest,
    prompts: list[str],
    backend: InpaintingBackend,
    extractor: FeatureExtractor,
    parser: LabelMapProvider | None = None,
    out_dir: Path | str | None = None,
    *,
    cfg: MaskGenConfig | None = None,
    base_seed: int = 0,
    steps: int = DEFAULT_STEPS,
    guidance_scale: float = DEFAULT_GUIDANCE,
    square_crop: bool = False,
    antonym_pair: tuple[str, str] = DEFAULT_ANTONYMS,
    n_subsets: int = DEFAULT_N_SUBSETS,
    rng_seed: int = 0,
    workers: int = 4,
) -> EvalRun:
    """Generate one edit per (image, prompt) pair and score the whole set
    against the original images."""
    cfg = cfg or MaskGenConfig()
    tasks = plan_eval(manifest, prompts, base_seed)

    references: list[np.ndarray] = []
    sources: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    failures: list[CellFailure] = []
    for entry in manifest.entries:
        try:
            image, labels = _load_entry(entry, square_crop)
            sources[entry.image_id] = (image, _entry_labels(entry, image, labels, parser))
            references.append(image)
        except Exception as exc:
            failures.append(CellFailure(None, entry.image_id, -1, -1, str(exc)))

    def generate(task: GenerationTask):
        if task.image_id not in sources:
            raise ContractViolation(f"source for {task.image_id} failed to load")
        image, labels = sources[task.image_id]
        result = edit_image(
            image,
            labels,
            prompts[task.prompt_id],
            cfg,
            backend,
            seed=task.seed,
            steps=steps,
            guidance_scale=guidance_scale,
            variations=1,
        )
        return result.edited[0]

    generated: list[tuple[GenerationTask, np.ndarray]] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for task, outcome in zip(tasks, pool.map(lambda t: _guard(generate, t), tasks)):
            if isinstance(outcome, Exception):
                failures.append(
                    CellFailure(None, task.image_id, task.prompt_id, task.variation, str(outcome))
                )
            else:
                generated.append((task, outcome))

    if not generated:
        raise EmptyDatasetError("every generation cell failed")
    generated.sort(key=lambda pair: (pair[0].image_id, pair[0].prompt_id, pair[0].variation))
    images = [img for _, img in generated]
    image_ids = [t.image_id for t, _ in generated]
    prompt_ids = [t.prompt_id for t, _ in generated]
    task_prompts = [prompts[t.prompt_id] for t, _ in generated]
    report = evaluate_set(
        images,
        references,
        task_prompts,
        extractor,
        antonym_pair,
        image_ids=image_ids,
        prompt_ids=prompt_ids,
        n_subsets=n_subsets,
        rng_seed=rng_seed,
    )
    scores = score_images(images, task_prompts, extractor, antonym_pair, image_ids, prompt_ids)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report(report, scores, out)
        _write_failures(failures, out)
    return EvalRun(report=report, scores=scores, failures=failures)


@dataclass
class AblationRow:
    """One generated cell of the dilation sweep."""

    d: int
    image_id: str
    prompt_id: int
    variation: int
    mask_area_px: int
    clip_s: float
    clip_iqa: float


@dataclass
class AblationSummary:
    """Aggregates for one dilation radius."""

    d: int
    kid_mean: float
    kid_std: float
    clip_s_mean: float
    clip_iqa_mean: float
    n_images: int
    mask_area_mean: float
    mask_area_min: int
    mask_area_max: int


@dataclass
class AblationRun:
    rows: list[AblationRow]
    summaries: list[AblationSummary]
    failures: list[CellFailure]


def run_ablation(
    grid: AblationGrid,
    backend: InpaintingBackend,
    extractor: FeatureExtractor,
    parser: LabelMapProvider | None = None,
    out_dir: Path | str | None = None,
    *,
    base_cfg: MaskGenConfig | None = None,
    steps: int = DEFAULT_STEPS,
    guidance_scale: float = DEFAULT_GUIDANCE,
    square_crop: bool = False,
    antonym_pair: tuple[str, str] = DEFAULT_ANTONYMS,
    n_subsets: int = DEFAULT_N_SUBSETS,
    rng_seed: int = 0,
    save_intermediates: bool = True,
    workers: int = 4,
) -> AblationRun:
    """Sweep the dilation radius: per radius, generate every
    (image, prompt, variation) cell, record mask areas, score CLIP metrics
    per image and KID per radius against the original images."""
    base = base_cfg or MaskGenConfig()
    plan = plan_ablation(grid)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    sources: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    references: list[np.ndarray] = []
    failures: list[CellFailure] = []
    for entry in grid.entries:
        try:
            image, labels = _load_entry(entry, square_crop)
            sources[entry.image_id] = (image, _entry_labels(entry, image, labels, parser))
            references.append(image)
        except Exception as exc:
            failures.append(CellFailure(None, entry.image_id, -1, -1, str(exc)))
    if not sources:
        raise EmptyDatasetError("no ablation source images could be loaded")
    ref_features = extractor.features(references)

    rows: list[AblationRow] = []
    summaries: list[AblationSummary] = []
    for d in grid.d_values:
        cfg = replace(base, d=d, e=grid.e, f=grid.f)
        areas: dict[str, int] = {}
        masks: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for image_id, (image, labels) in sorted(sources.items()):
            m_i = inpainting_mask(labels, cfg)
            masks[image_id] = (m_i, head_mask(labels, cfg))
            areas[image_id] = mask_area(m_i)
            if out is not None and save_intermediates:
                mask_dir = out / f"d_{d:03d}" / "masks"
                mask_dir.mkdir(parents=True, exist_ok=True)
                image_io.save_mask(m_i, mask_dir / f"{Path(image_id).name}_inpaint.png")
                image_io.save_mask(masks[image_id][1], mask_dir / f"{Path(image_id).name}_head.png")

        def generate(task: GenerationTask):
            image, labels = sources[task.image_id]
            m_i, m_h = masks[task.image_id]
            request = SynthesisRequest(
                image=image,
                mask=m_i,
                prompt=augment_prompt(grid.prompts[task.prompt_id]),
                seed=task.seed,
                steps=steps,
                guidance_scale=guidance_scale,
                variations=1,
            )
            garment = synthesize(request, backend)[0]
            return garment, stitch(garment, image, m_h)

        tasks = [t for t in plan[d] if t.image_id in sources]
        cells: list[tuple[GenerationTask, np.ndarray]] = []
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for task, outcome in zip(tasks, pool.map(lambda t: _guard(generate, t), tasks)):
                if isinstance(outcome, Exception):
                    failures.append(
                        CellFailure(d, task.image_id, task.prompt_id, task.variation, str(outcome))
                    )
                    continue
                garment, edited = outcome
                if out is not None and save_intermediates:
                    cell_dir = out / f"d_{d:03d}" / "generated"
                    cell_dir.mkdir(parents=True, exist_ok=True)
                    stem = f"{Path(task.image_id).name}_p{task.prompt_id}_v{task.variation}"
                    image_io.save_rgb(garment, cell_dir / f"{stem}_garment.png")
                    image_io.save_rgb(edited, cell_dir / f"{stem}_edited.png")
                cells.append((task, edited))
        if not cells:
            continue
        cells.sort(key=lambda pair: (pair[0].image_id, pair[0].prompt_id, pair[0].variation))
        images = [img for _, img in cells]
        cell_prompts = [grid.prompts[t.prompt_id] for t, _ in cells]
        scores = score_images(
            images,
            cell_prompts,
            extractor,
            antonym_pair,
            image_ids=[t.image_id for t, _ in cells],
            prompt_ids=[t.prompt_id for t, _ in cells],
        )
        gen_features = extractor.features(images)
        subset_size = min(len(references), gen_features.shape[0])
        if subset_size >= 2:
            kid_mean, kid_std = kid(
                gen_features, ref_features, subset_size=subset_size,
                n_subsets=n_subsets, rng_seed=rng_seed,
            )
        else:
            # the unbiased estimator needs two samples per side
            kid_mean = kid_std = float("nan")
        for (task, _), score in zip(cells, scores):
            rows.append(
                AblationRow(
                    d=d,
                    image_id=task.image_id,
                    prompt_id=task.prompt_id,
                    variation=task.variation,
                    mask_area_px=areas[task.image_id],
                    clip_s=score.clip_s,
                    clip_iqa=score.clip_iqa,
                )
            )
        area_values = [areas[t.image_id] for t, _ in cells]
        summaries.append(
            AblationSummary(
                d=d,
                kid_mean=kid_mean,
                kid_std=kid_std,
                clip_s_mean=float(np.mean([s.clip_s for s in scores])),
                clip_iqa_mean=float(np.mean([s.clip_iqa for s in scores])),
                n_images=len(cells),
                mask_area_mean=float(np.mean(area_values)),
                mask_area_min=int(np.min(area_values)),
                mask_area_max=int(np.max(area_values)),
            )
        )

    rows.sort(key=lambda r: (r.d, r.image_id, r.prompt_id, r.variation))
    if out is not None:
        _write_ablation_csv(rows, summaries, out)
        _write_failures(failures, out)
    return AblationRun(rows=rows, summaries=summaries, failures=failures)


def _write_ablation_csv(
    rows: list[AblationRow], summaries: list[AblationSummary], out_dir: Path
) -> None:
    with open(out_dir / "scores.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "image_id", "prompt_id", "variation", "mask_area_px", "clip_s", "clip_iqa"])
        for r in rows:
            writer.writerow(
                [r.d, r.image_id, r.prompt_id, r.variation, r.mask_area_px,
                 f"{r.clip_s:.6f}", f"{r.clip_iqa:.6f}"]
            )
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["d", "kid_mean", "kid_std", "clip_s_mean", "clip_iqa_mean", "n_images",
             "mask_area_mean", "mask_area_min", "mask_area_max"]
        )
        for s in summaries:
            writer.writerow(
                [s.d, f"{s.kid_mean:.8f}", f"{s.kid_std:.8f}", f"{s.clip_s_mean:.6f}",
                 f"{s.clip_iqa_mean:.6f}", s.n_images, f"{s.mask_area_mean:.1f}",
                 s.mask_area_min, s.mask_area_max]
            )
