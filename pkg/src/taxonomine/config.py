"""Run configuration shared by the taxonomy builder and the sweep driver."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from typing import Optional

from .errors import ExperimentError

PERCENTILES = (25, 50, 75)


@dataclass(frozen=True)
class RunConfig:
    """One pipeline configuration: the three experimental factors plus the
    fixed thresholds and the provider roster fingerprint inputs."""

    augmentation: bool = False
    percentile: int = 50
    soft_clustering: bool = False
    aug_threshold: float = 0.9
    consolidate_threshold: float = 0.95
    min_cluster_size: int = 5
    min_labels: int = 10
    max_levels: int = 5
    target_dim: int = 10
    min_doc_matches: int = 3
    seed: int = 0
    domain_label: str = "AI Skills Taxonomy"
    provider_models: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.percentile not in PERCENTILES:
            raise ExperimentError(
                f"percentile must be one of {PERCENTILES}, got {self.percentile}"
            )
        if self.max_levels < 1 or self.min_labels < 1:
            raise ExperimentError("max_levels and min_labels must be >= 1")

    def with_providers(self, model_ids: tuple[str, ...]) -> "RunConfig":
        return replace(self, provider_models=tuple(model_ids))

    def fingerprint(self) -> str:
        """Stable hash of the full configuration."""
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def factor_key(self) -> tuple[bool, bool, int]:
        return (self.augmentation, self.soft_clustering, self.percentile)


def full_grid(base: Optional[RunConfig] = None) -> list[RunConfig]:
    """The 2 x 3 x 2 factor grid (augmentation x percentile x soft), ordered
    augmentation Y then N, soft Y then N, percentile ascending."""
    base = base if base is not None else RunConfig()
    grid = []
    for aug in (True, False):
        for soft in (True, False):
            for pct in PERCENTILES:
                grid.append(
                    replace(
                        base,
                        augmentation=aug,
                        soft_clustering=soft,
                        percentile=pct,
                    )
                )
    return grid
