"""Service configuration."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class ServiceConfig:
    """Where the service keeps its data and which plugins it drives.

    ``backend`` and ``parser`` use the same names/specs as the CLI:
    backend "stub" or "diffusion", parser "synthetic",
    "precomputed:DIR" or "command:TEMPLATE".
    """

    data_dir: Path
    backend: str = "stub"
    backend_config: dict = field(default_factory=dict)
    parser: str = "synthetic"
    queue_depth: int = 64

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
