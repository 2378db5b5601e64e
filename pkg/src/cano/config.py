"""Runtime configuration: structured config file plus CLI flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import yaml

from .criteria import CriterionConfig
from .errors import DataFormatError


@dataclass(frozen=True)
class AppConfig:
    sample_count: int = 4096
    grid_step_deg: float = 1.0
    gaussian_sigma: float = 1.0
    refine: bool = True
    lease_seconds: float = 120.0
    seed: int = 0
    workers: int = 4

    def criterion_config(self) -> CriterionConfig:
        return CriterionConfig(grid_step=np.radians(self.grid_step_deg),
                               refine=self.refine,
                               gaussian_sigma=self.gaussian_sigma)


def load_config(path: str | Path | None, **overrides) -> AppConfig:
    """Load YAML/JSON config, then apply non-None keyword overrides."""
    cfg = AppConfig()
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise DataFormatError(f"cannot parse config {path}: {exc}") from exc
        unknown = set(data) - set(AppConfig.__dataclass_fields__)
        if unknown:
            raise DataFormatError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **data)
    applied = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **applied)
