"""Binary-mask generation from body-part label maps.

A human parser assigns every pixel one of 24 body-part labels (0 is
background). This module turns such a label map into the two masks the
editing pipeline needs: the inpainting mask (dilated body region minus
eroded hand/foot regions) and the head mask (eroded face/neck region).

Dilation and erosion use a closed pixel disk (dx^2 + dy^2 <= r^2) as the
structuring element and treat everything outside the image as background,
so masks erode at the borders.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ContractViolation

LABEL_COUNT = 24

# Default label groups for the standard 24-part human-parsing convention:
# 1-2 torso, 3-4 hands, 5-6 feet, 7-14 legs, 15-22 arms, 23-24 head.
HAND_FOOT_LABELS = frozenset({3, 4, 5, 6})
HEAD_LABELS = frozenset({23, 24})
BODY_LABELS = frozenset(range(1, LABEL_COUNT + 1)) - HAND_FOOT_LABELS - HEAD_LABELS


def as_label_map(labels: np.ndarray) -> np.ndarray:
    """Validate and return a 2-D uint8 label map with values in [0, 24]."""
    arr = np.asarray(labels)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractViolation(f"label map must be a non-empty 2-D grid, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ContractViolation(f"label map must hold integers, got dtype {arr.dtype}")
    if arr.min() < 0 or arr.max() > LABEL_COUNT:
        raise ContractViolation(
            f"label values must lie in [0, {LABEL_COUNT}], got range "
            f"[{arr.min()}, {arr.max()}]"
        )
    return arr.astype(np.uint8, copy=False)


def as_mask(mask: np.ndarray) -> np.ndarray:
    """Validate and return a 2-D boolean mask."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractViolation(f"mask must be a non-empty 2-D grid, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        raise ContractViolation(f"mask must be boolean, got dtype {arr.dtype}")
    return arr


def _check_radius(radius: int) -> int:
    if not isinstance(radius, (int, np.integer)) or radius < 0:
        raise ContractViolation(f"radius must be a non-negative integer, got {radius!r}")
    return int(radius)


def disk_offsets(radius: int) -> np.ndarray:
    """(dy, dx) offsets of the closed disk of the given radius.

    The origin is always included and the offset set is symmetric under
    negation.
    """
    radius = _check_radius(radius)
    span = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    keep = dy * dy + dx * dx <= radius * radius
    return np.stack([dy[keep], dx[keep]], axis=1)


def disk_footprint(radius: int) -> np.ndarray:
    """Boolean (2r+1, 2r+1) array marking the closed disk of the given radius."""
    radius = _check_radius(radius)
    span = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    return dy * dy + dx * dx <= radius * radius


def _nearest_true_sq_dist(mask: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance from each pixel to the nearest True pixel.

    Computed exactly in integer arithmetic from the feature transform, so
    threshold comparisons against r^2 are free of float rounding.
    """
    iy, ix = ndimage.distance_transform_edt(~mask, return_distances=False, return_indices=True)
    yy, xx = np.indices(mask.shape, dtype=np.int64)
    dy = yy - iy
    dx = xx - ix
    return dy * dy + dx * dx


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilate by a closed disk: OR over the disk neighborhood of each pixel.

    Pixels outside the image count as False. Radius 0 is the identity.
    """
    mask = as_mask(mask)
    radius = _check_radius(radius)
    if radius == 0 or not mask.any():
        return mask.copy()
    return _nearest_true_sq_dist(mask) <= radius * radius


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Erode by a closed disk: AND over the disk neighborhood of each pixel.

    Pixels outside the image count as False, so the mask erodes at image
    borders. Radius 0 is the identity; the result is a subset of the input.
    """
    mask = as_mask(mask)
    radius = _check_radius(radius)
    if radius == 0:
        return mask.copy()
    if not mask.any():
        return np.zeros_like(mask)
    # Pad with a False border so out-of-image pixels participate as background.
    padded = np.pad(mask, radius, constant_values=False)
    sq_dist = _nearest_true_sq_dist(~padded)  # distance to nearest False pixel
    eroded = sq_dist > radius * radius
    return eroded[radius:-radius, radius:-radius]


def mask_from_labels(labels: np.ndarray, include) -> np.ndarray:
    """Boolean mask of pixels whose label is in ``include``.

    ``include`` must be a subset of [1, 24]; an empty set yields an
    all-False mask.
    """
    labels = as_label_map(labels)
    include = frozenset(int(v) for v in include)
    bad = [v for v in include if v < 1 or v > LABEL_COUNT]
    if bad:
        raise ContractViolation(f"labels to include must lie in [1, {LABEL_COUNT}], got {sorted(bad)}")
    if not include:
        return np.zeros(labels.shape, dtype=bool)
    return np.isin(labels, sorted(include))


@dataclass(frozen=True)
class MaskGenConfig:
    """Radii and label groups driving mask generation.

    ``d`` dilates the body region (room for loose garments), ``e`` erodes
    the preserved hand/foot regions before they are subtracted, and ``f``
    erodes the head region to avoid sharp stitching edges. The label
    groups default to the standard 24-part convention and must be
    pairwise disjoint.
    """

    d: int = 70
    e: int = 10
    f: int = 5
    body_labels: frozenset = field(default=BODY_LABELS)
    preserved_labels: frozenset = field(default=HAND_FOOT_LABELS)
    head_labels: frozenset = field(default=HEAD_LABELS)

    def __post_init__(self):
        for name in ("d", "e", "f"):
            _check_radius(getattr(self, name))
        groups = {
            "body_labels": frozenset(int(v) for v in self.body_labels),
            "preserved_labels": frozenset(int(v) for v in self.preserved_labels),
            "head_labels": frozenset(int(v) for v in self.head_labels),
        }
        for name, group in groups.items():
            object.__setattr__(self, name, group)
            bad = [v for v in group if v < 1 or v > LABEL_COUNT]
            if bad:
                raise ContractViolation(f"{name} must lie in [1, {LABEL_COUNT}], got {sorted(bad)}")
        names = list(groups)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                overlap = groups[a] & groups[b]
                if overlap:
                    raise ContractViolation(f"{a} and {b} overlap on labels {sorted(overlap)}")


def inpainting_mask(labels: np.ndarray, cfg: MaskGenConfig) -> np.ndarray:
    """Region the generator may repaint: dilated body minus eroded preserved areas."""
    body = mask_from_labels(labels, cfg.body_labels)
    preserved = mask_from_labels(labels, cfg.preserved_labels)
    return dilate(body, cfg.d) & ~erode(preserved, cfg.e)


def head_mask(labels: np.ndarray, cfg: MaskGenConfig) -> np.ndarray:
    """Eroded face/neck region, restored from the source after synthesis."""
    return erode(mask_from_labels(labels, cfg.head_labels), cfg.f)


def mask_area(mask: np.ndarray) -> int:
    """Number of True pixels."""
    return int(np.count_nonzero(as_mask(mask)))
