"""taxonomine: hierarchical AI-skill taxonomies from job-posting corpora.

The pipeline mines keyword-bearing sentences from postings, scores and
filters them by embedding similarity to a keyword dictionary, optionally
augments them by semantic search, clusters them level by level into a
labeled hierarchy, and evaluates the result with silhouette, LLM-judge,
coverage/utilization, and factorial-ANOVA analyses.  Deterministic mock
providers make every stage runnable offline.
"""

from .config import RunConfig, full_grid
from .corpus import Document, Sentence, holdout_split, load_corpus, split_sentences
from .errors import (
    ClusteringError,
    ConfigurationError,
    CorpusError,
    EvaluationError,
    ExperimentError,
    LabelingError,
    LevelFailure,
    MiningError,
    ProviderError,
    SelectionError,
    TaxonomineError,
    TaxonomyError,
)
from .evaluation import (
    CoverageReport,
    JudgeScores,
    LabeledTestSet,
    evaluate_coverage,
    judge_taxonomy,
    label_test_sentences,
    macro_f1,
    silhouette_mean,
)
from .experiments import (
    AnovaResult,
    AnovaTable,
    SweepInputs,
    SweepResult,
    f_upper_tail,
    factorial_anova,
    run_sweep,
)
from .mining import KeywordSet, load_keywords, match_sentence, mine_candidates
from .providers import (
    Clients,
    EmbeddingClient,
    ChatClient,
    ProviderConfig,
    ProviderRoster,
    build_clients,
    load_roster,
    mock_roster,
)
from .selection import (
    ScoredPool,
    augment_candidates,
    class_score,
    percentile_filter,
    score_pool,
)
from .taxonomy import (
    Taxonomy,
    TaxonomyNode,
    build_taxonomy,
    load_taxonomy,
    serialize_taxonomy,
)

__version__ = "0.1.0"

__all__ = [
    "AnovaResult",
    "AnovaTable",
    "ChatClient",
    "Clients",
    "ClusteringError",
    "ConfigurationError",
    "CorpusError",
    "CoverageReport",
    "Document",
    "EmbeddingClient",
    "EvaluationError",
    "ExperimentError",
    "JudgeScores",
    "KeywordSet",
    "LabeledTestSet",
    "LabelingError",
    "LevelFailure",
    "MiningError",
    "ProviderConfig",
    "ProviderError",
    "ProviderRoster",
    "RunConfig",
    "ScoredPool",
    "SelectionError",
    "Sentence",
    "SweepInputs",
    "SweepResult",
    "Taxonomy",
    "TaxonomyNode",
    "TaxonomineError",
    "TaxonomyError",
    "augment_candidates",
    "build_clients",
    "build_taxonomy",
    "class_score",
    "evaluate_coverage",
    "f_upper_tail",
    "factorial_anova",
    "full_grid",
    "holdout_split",
    "judge_taxonomy",
    "label_test_sentences",
    "load_corpus",
    "load_keywords",
    "load_roster",
    "load_taxonomy",
    "macro_f1",
    "match_sentence",
    "mine_candidates",
    "mock_roster",
    "percentile_filter",
    "run_sweep",
    "score_pool",
    "serialize_taxonomy",
    "silhouette_mean",
    "split_sentences",
    "__version__",
]
