"""Pluggable label-map providers.

The pipeline needs a body-part label map for every image. Sources:
precomputed PNG label maps on disk, an external parser process invoked
per image, or a deterministic synthetic figure used by tests and demos
(the synthetic provider is plumbing, not a real human parser).
"""
from __future__ import annotations

import shlex
import subprocess
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np

from .errors import ContractViolation, DictiError
from .image_io import load_label_map, save_rgb


class LabelMapProvider(ABC):
    """Yields a label map for an image."""

    name: str = "parser"

    @abstractmethod
    def labels_for(self, image: np.ndarray, image_id: str | None = None) -> np.ndarray:
        """Label map with the same height/width as ``image``."""


class PrecomputedLabelMaps(LabelMapProvider):
    """Looks up label-map PNGs in a directory by image id (or id stem)."""

    name = "precomputed"

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ContractViolation(f"label-map directory not found: {self.directory}")

    def labels_for(self, image: np.ndarray, image_id: str | None = None) -> np.ndarray:
        if image_id is None:
            raise ContractViolation("precomputed label maps need an image id")
        stem = Path(image_id).stem
        for candidate in (self.directory / f"{image_id}.png", self.directory / f"{stem}.png"):
            if candidate.is_file():
                labels = load_label_map(candidate)
                if labels.shape != image.shape[:2]:
                    raise ContractViolation(
                        f"label map {candidate} has shape {labels.shape}, "
                        f"image has {image.shape[:2]}"
                    )
                return labels
        raise DictiError(f"no precomputed label map for {image_id!r} in {self.directory}")


class CommandLabelParser(LabelMapProvider):
    """Runs an external parser: a command template with {image} and {output}
    placeholders that must write a label-map PNG to {output}."""

    name = "command"

    def __init__(self, template: str):
        if "{image}" not in template or "{output}" not in template:
            raise ContractViolation("command template needs {image} and {output} placeholders")
        self.template = template

    def labels_for(self, image: np.ndarray, image_id: str | None = None) -> np.ndarray:
        with tempfile.TemporaryDirectory(prefix="dicti-parse-") as tmp:
            image_path = Path(tmp) / "input.png"
            output_path = Path(tmp) / "labels.png"
            save_rgb(image, image_path)
            cmd = [
                part.format(image=str(image_path), output=str(output_path))
                for part in shlex.split(self.template)
            ]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            if proc.returncode != 0:
                raise DictiError(
                    f"label parser exited with {proc.returncode}: {proc.stderr.strip()}"
                )
            if not output_path.is_file():
                raise DictiError("label parser produced no output file")
            labels = load_label_map(output_path)
        if labels.shape != image.shape[:2]:
            raise ContractViolation(
                f"parser returned shape {labels.shape}, image has {image.shape[:2]}"
            )
        return labels


class SyntheticFigureParser(LabelMapProvider):
    """Deterministic geometric stand-in for a human parser.

    Draws a stylized frontal figure (head, torso, arms, hands, legs, feet)
    scaled to the image so demos and service tests run without any
    segmentation model. Output depends only on the image dimensions.
    """

    name = "synthetic"

    def labels_for(self, image: np.ndarray, image_id: str | None = None) -> np.ndarray:
        h, w = image.shape[:2]
        labels = np.zeros((h, w), dtype=np.uint8)
        yy, xx = np.indices((h, w))
        cx = w // 2

        def ellipse(cy_, cx_, ry, rx):
            ry = max(ry, 1)
            rx = max(rx, 1)
            return ((yy - cy_) / ry) ** 2 + ((xx - cx_) / rx) ** 2 <= 1.0

        def box(y0, y1, x0, x1):
            return (yy >= y0) & (yy < y1) & (xx >= x0) & (xx < x1)

        head_ry = h // 10
        head_cy = h // 6
        labels[ellipse(head_cy, cx, head_ry, max(w // 12, 1))] = 23

        torso_top = head_cy + head_ry
        torso_bottom = h // 2
        torso_half = w // 6
        labels[box(torso_top, torso_bottom, cx - torso_half, cx + torso_half)] = 1

        arm_half = max(w // 24, 1)
        arm_bottom = torso_top + (torso_bottom - torso_top) * 3 // 4
        labels[box(torso_top, arm_bottom, cx - torso_half - 2 * arm_half, cx - torso_half)] = 15
        labels[box(torso_top, arm_bottom, cx + torso_half, cx + torso_half + 2 * arm_half)] = 16
        hand_h = max(h // 24, 1)
        labels[box(arm_bottom, arm_bottom + hand_h, cx - torso_half - 2 * arm_half, cx - torso_half)] = 4
        labels[box(arm_bottom, arm_bottom + hand_h, cx + torso_half, cx + torso_half + 2 * arm_half)] = 3

        leg_half = max(torso_half // 2, 1)
        leg_bottom = h * 5 // 6
        labels[box(torso_bottom, leg_bottom, cx - torso_half, cx - torso_half + leg_half)] = 7
        labels[box(torso_bottom, leg_bottom, cx + torso_half - leg_half, cx + torso_half)] = 8
        foot_h = max(h // 24, 1)
        labels[box(leg_bottom, leg_bottom + foot_h, cx - torso_half, cx - torso_half + leg_half)] = 5
        labels[box(leg_bottom, leg_bottom + foot_h, cx + torso_half - leg_half, cx + torso_half)] = 6
        return labels


def create_parser(spec: str) -> LabelMapProvider:
    """Build a provider from a spec string.

    "precomputed:DIR", "command:TEMPLATE", or "synthetic".
    """
    if spec == "synthetic":
        return SyntheticFigureParser()
    kind, sep, arg = spec.partition(":")
    if not sep or not arg:
        raise ContractViolation(f"bad parser spec {spec!r}")
    if kind == "precomputed":
        return PrecomputedLabelMaps(arg)
    if kind == "command":
        return CommandLabelParser(arg)
    raise ContractViolation(f"unknown parser kind {kind!r}")
