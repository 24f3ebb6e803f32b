from __future__ import annotations

import sys

import numpy as np
import pytest

from dicti.errors import ContractViolation, DictiError
from dicti.image_io import save_label_map
from dicti.maskgen import LABEL_COUNT
from dicti.parsers import (
    CommandLabelParser,
    PrecomputedLabelMaps,
    SyntheticFigureParser,
    create_parser,
)

from conftest import figure_labels, random_image


class TestSyntheticFigureParser:
    def test_shape_and_label_range(self, rng):
        parser = SyntheticFigureParser()
        labels = parser.labels_for(random_image(rng, 96, 64))
        assert labels.shape == (96, 64)
        assert labels.max() <= LABEL_COUNT

    def test_contains_body_and_head(self, rng):
        labels = SyntheticFigureParser().labels_for(random_image(rng, 120, 80))
        present = set(np.unique(labels))
        assert 1 in present and 23 in present
        assert {3, 4} & present and {5, 6} & present

    def test_depends_only_on_dimensions(self, rng):
        parser = SyntheticFigureParser()
        a = parser.labels_for(random_image(rng, 60, 40))
        b = parser.labels_for(random_image(rng, 60, 40))
        assert np.array_equal(a, b)


class TestPrecomputedLabelMaps:
    def test_lookup_by_stem(self, rng, tmp_path):
        labels = figure_labels(32, 24)
        save_label_map(labels, tmp_path / "photo.png")
        parser = PrecomputedLabelMaps(tmp_path)
        got = parser.labels_for(random_image(rng, 32, 24), image_id="photo")
        assert np.array_equal(got, labels)

    def test_missing_id_raises(self, rng, tmp_path):
        parser = PrecomputedLabelMaps(tmp_path)
        with pytest.raises(DictiError, match="no precomputed label map"):
            parser.labels_for(random_image(rng, 8, 8), image_id="absent")

    def test_requires_image_id(self, rng, tmp_path):
        with pytest.raises(ContractViolation):
            PrecomputedLabelMaps(tmp_path).labels_for(random_image(rng, 8, 8))

    def test_shape_mismatch_rejected(self, rng, tmp_path):
        save_label_map(figure_labels(16, 16), tmp_path / "photo.png")
        parser = PrecomputedLabelMaps(tmp_path)
        with pytest.raises(ContractViolation):
            parser.labels_for(random_image(rng, 8, 8), image_id="photo")

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(ContractViolation):
            PrecomputedLabelMaps(tmp_path / "nope")


WRITER_SNIPPET = (
    "import sys; from PIL import Image; import numpy as np; "
    "img = Image.open(sys.argv[1]); w, h = img.size; "
    "arr = np.zeros((h, w), dtype=np.uint8); arr[h//4:h//2, w//4:w//2] = 1; "
    "Image.fromarray(arr, mode='L').save(sys.argv[2])"
)


class TestCommandLabelParser:
    def test_template_placeholders_required(self):
        with pytest.raises(ContractViolation):
            CommandLabelParser("densepose --in foo")

    def test_invokes_external_process(self, rng):
        parser = CommandLabelParser(f'{sys.executable} -c "{WRITER_SNIPPET}" {{image}} {{output}}')
        image = random_image(rng, 16, 20)
        labels = parser.labels_for(image)
        assert labels.shape == (16, 20)
        assert labels[5, 6] == 1

    def test_failing_process_raises(self, rng):
        parser = CommandLabelParser(
            f"{sys.executable} -c import~nonsense {{image}} {{output}}"
        )
        with pytest.raises(DictiError, match="label parser"):
            parser.labels_for(random_image(rng, 8, 8))


class TestCreateParser:
    def test_synthetic(self):
        assert isinstance(create_parser("synthetic"), SyntheticFigureParser)

    def test_precomputed(self, tmp_path):
        assert isinstance(create_parser(f"precomputed:{tmp_path}"), PrecomputedLabelMaps)

    def test_command(self):
        parser = create_parser("command:run {image} {output}")
        assert isinstance(parser, CommandLabelParser)

    def test_bad_specs_rejected(self):
        for spec in ("", "precomputed", "mystery:x"):
            with pytest.raises(ContractViolation):
                create_parser(spec)
