"""Exception hierarchy for taxonomine.

Every error raised by the package derives from :class:`TaxonomineError` so
callers can catch pipeline failures with a single except clause while still
being able to distinguish the failing stage.
"""

from __future__ import annotations


class TaxonomineError(Exception):
    """Base class for all taxonomine errors."""


class CorpusError(TaxonomineError):
    """Malformed corpus input (bad JSONL record, invalid month, duplicate id)."""


class MiningError(TaxonomineError):
    """Keyword-dictionary or candidate-mining failure."""


class ConfigurationError(TaxonomineError):
    """Invalid provider or run configuration detected before any request."""


class ProviderError(TaxonomineError):
    """Embedding/chat backend failure after exhausting the retry policy.

    ``failed_indices`` carries the positions of the inputs that could not be
    served, when the failure is per-batch.
    """

    def __init__(self, message: str, failed_indices: list[int] | None = None):
        super().__init__(message)
        self.failed_indices = failed_indices or []


class SelectionError(TaxonomineError):
    """Scoring / filtering / augmentation failure."""


class ClusteringError(TaxonomineError):
    """Dimensionality-reduction or clustering failure."""


class LabelingError(TaxonomineError):
    """Cluster labeling or label consolidation failure."""


class LevelFailure(TaxonomineError):
    """A taxonomy level produced zero clusters; the build must stop."""


class TaxonomyError(TaxonomineError):
    """Invalid taxonomy structure (broken links, cycles, malformed file)."""


class EvaluationError(TaxonomineError):
    """Metric computation failure (no valid level, unparseable judge output)."""


class ExperimentError(TaxonomineError):
    """Sweep or ANOVA failure (incomplete grid, bad results table)."""
