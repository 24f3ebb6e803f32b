"""Text-guided garment editing.

Masks come from body-part label maps, garments from a pluggable
text-conditioned inpainting backend, identity from hard head stitching;
an evaluation suite scores realism and prompt adherence.
"""

from . import image_io, maskgen, metrics, parsers, pipeline, synthesis
from .errors import (
    BackendError,
    ContractViolation,
    DictiError,
    EmptyDatasetError,
    IngestionError,
    InsufficientSamples,
    NoSubjectError,
)

__version__ = "0.1.0"

__all__ = [
    "image_io",
    "maskgen",
    "metrics",
    "parsers",
    "pipeline",
    "synthesis",
    "DictiError",
    "ContractViolation",
    "InsufficientSamples",
    "BackendError",
    "NoSubjectError",
    "IngestionError",
    "EmptyDatasetError",
    "__version__",
]
