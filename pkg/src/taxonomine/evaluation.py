"""Taxonomy quality metrics.

Three metric families:

* geometric — mean silhouette over the clustered levels;
* judged — a chat model scores the serialized hierarchy on twelve named
  criteria in four categories;
* coverage — held-out test sentences are labeled AI-related / not by two
  independent chat judges, then matched against leaf labels by embedding
  similarity; macro-F1 against the lenient (either judge) and strict (both
  judges) truths, plus leaf-label utilization at the best strict threshold.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .clustering import ClusterAssignment, PointSet
from .corpus import Document, split_sentences
from .errors import EvaluationError
from .prompts import TAXONOMY_JUDGE, TEST_SET_LABEL, load_template, render
from .providers import ChatClient, EmbeddingClient
from .taxonomy import Taxonomy, taxonomy_json

logger = logging.getLogger(__name__)

TAUS = (0.9, 0.8, 0.7, 0.6)

#: Canonical judge structure: category -> ordered criteria.
CATEGORIES: dict[str, tuple[str, ...]] = {
    "clarity": ("precision", "unambiguity", "consistency", "accessibility"),
    "hierarchical_coherence": (
        "gradational_specificity",
        "parent_child_coherence",
        "consistency",
    ),
    "orthogonality": ("distinctiveness", "non_overlap"),
    "completeness": ("domain_coverage", "depth", "balance"),
}

_KEY_ALIASES = {
    "ambiguity": "unambiguity",
    "coverage": "domain_coverage",
    "nonoverlap": "non_overlap",
    "non_overlapping": "non_overlap",
    "parent_child": "parent_child_coherence",
}


def _normalize_key(raw: str) -> str:
    key = re.sub(r"[^a-z0-9]+", "_", raw.strip().lower()).strip("_")
    return _KEY_ALIASES.get(key, key)


@dataclass
class JudgeScores:
    """Raw per-criterion scores, grouped by category.

    ``scores`` maps canonical category name to ``{criterion: value}``.  Values
    are reals in [1, 5]; parsing from a live judge additionally requires them
    to be integers.  A category average is the mean of the members the judge
    actually returned.
    """

    scores: dict[str, dict[str, float]]

    def __post_init__(self) -> None:
        for category, members in self.scores.items():
            if category not in CATEGORIES:
                raise EvaluationError(f"unknown judge category {category!r}")
            if not members:
                raise EvaluationError(f"judge category {category!r} is empty")
            for criterion, value in members.items():
                if criterion not in CATEGORIES[category]:
                    raise EvaluationError(
                        f"unknown criterion {criterion!r} in category {category!r}"
                    )
                if not (1.0 <= float(value) <= 5.0):
                    raise EvaluationError(
                        f"score {value!r} for {category}/{criterion} outside [1, 5]"
                    )
        missing = [c for c in CATEGORIES if c not in self.scores]
        if missing:
            raise EvaluationError(f"judge reply missing categories: {missing}")

    def category_averages(self) -> dict[str, float]:
        return {
            category: float(np.mean(list(self.scores[category].values())))
            for category in CATEGORIES
        }

    def flat(self) -> dict[str, float]:
        """``{category}.{criterion}`` -> value, in canonical order."""
        out: dict[str, float] = {}
        for category, criteria in CATEGORIES.items():
            for criterion in criteria:
                if criterion in self.scores[category]:
                    out[f"{category}.{criterion}"] = float(
                        self.scores[category][criterion]
                    )
        return out


# ---------------------------------------------------------------------------
# Judge
# ---------------------------------------------------------------------------


def _first_json_object(text: str) -> Optional[dict]:
    """Extract and parse the first balanced ``{...}`` block."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(text)):
            ch = text[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    block = text[start : i + 1]
                    try:
                        obj = json.loads(block)
                    except json.JSONDecodeError:
                        break
                    return obj if isinstance(obj, dict) else None
        start = text.find("{", start + 1)
    return None


def _score_value(value) -> Optional[float]:
    """Pull a numeric score out of a raw JSON value; integers only."""
    if isinstance(value, dict):
        for key in value:
            if _normalize_key(str(key)) == "score":
                return _score_value(value[key])
        return None
    if isinstance(value, bool):
        return None
    if isinstance(value, str):
        value = value.strip()
        if not re.fullmatch(r"-?\d+", value):
            return None
        value = int(value)
    if isinstance(value, float) and not value.is_integer():
        return None
    if isinstance(value, (int, float)):
        return float(value)
    return None


_CRITERION_CATEGORY = {
    criterion: category
    for category, criteria in CATEGORIES.items()
    for criterion in criteria
    if criterion != "consistency"  # appears in two categories; nested form only
}


def _scores_from_obj(obj: dict) -> dict[str, dict[str, float]]:
    """Map a parsed judge reply (nested or flat) onto the canonical grid."""
    out: dict[str, dict[str, float]] = {c: {} for c in CATEGORIES}
    for raw_key, raw_value in obj.items():
        key = _normalize_key(str(raw_key))
        if key in CATEGORIES and isinstance(raw_value, dict):
            for crit_key, crit_value in raw_value.items():
                criterion = _normalize_key(str(crit_key))
                if criterion not in CATEGORIES[key]:
                    logger.warning(
                        "ignoring unknown judge criterion %r in %r", crit_key, raw_key
                    )
                    continue
                score = _score_value(crit_value)
                if score is None:
                    raise EvaluationError(
                        f"non-integer score {crit_value!r} for {key}/{criterion}"
                    )
                out[key][criterion] = score
        elif key in _CRITERION_CATEGORY:
            score = _score_value(raw_value)
            if score is None:
                raise EvaluationError(f"non-integer score {raw_value!r} for {key}")
            out[_CRITERION_CATEGORY[key]][key] = score
        else:
            logger.warning("ignoring unknown judge key %r", raw_key)
    return {c: members for c, members in out.items() if members}


def judge_taxonomy(
    taxonomy: Taxonomy, chat: ChatClient, *, template: Optional[str] = None
) -> JudgeScores:
    """Render the judge prompt over the serialized hierarchy and parse the
    scored JSON reply.  One re-ask on a malformed reply, then an error."""
    template = template if template is not None else load_template(TAXONOMY_JUDGE)
    prompt = render(template, TAXONOMY_JSON_STRING=taxonomy_json(taxonomy))
    last_error: Optional[Exception] = None
    for attempt in range(2):
        ask = prompt
        if attempt:
            ask = (
                prompt
                + "\n\nYour previous reply was not valid. Output only the JSON "
                "object of integer scores, nothing else."
            )
        completion = chat.complete(ask)
        obj = _first_json_object(completion)
        if obj is None:
            last_error = EvaluationError("judge reply carries no JSON object")
            logger.warning("judge reply unparseable (attempt %d)", attempt + 1)
            continue
        try:
            return JudgeScores(scores=_scores_from_obj(obj))
        except EvaluationError as exc:
            last_error = exc
            logger.warning("judge reply rejected (attempt %d): %s", attempt + 1, exc)
    raise EvaluationError(f"judge reply unusable after re-ask: {last_error}")


# ---------------------------------------------------------------------------
# Silhouette
# ---------------------------------------------------------------------------


def silhouette_level(points: PointSet, assignment: ClusterAssignment) -> Optional[float]:
    """Mean silhouette of one level's non-noise points, or ``None`` when
    fewer than two clusters remain after dropping noise."""
    mask = assignment.labels != -1
    labels = assignment.labels[mask]
    distinct = np.unique(labels)
    if distinct.size < 2:
        return None
    vectors = points.vectors[mask]
    n = vectors.shape[0]
    sq = np.sum(vectors * vectors, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (vectors @ vectors.T), 0.0)
    dist = np.sqrt(d2)

    sums = np.stack(
        [dist[:, labels == c].sum(axis=1) for c in distinct], axis=1
    )  # (n, C) total distance from each point to each cluster
    counts = np.array([(labels == c).sum() for c in distinct])
    own_col = np.searchsorted(distinct, labels)

    scores = np.zeros(n)
    for i in range(n):
        c = own_col[i]
        if counts[c] <= 1:
            continue  # singleton-cluster point: s = 0 by convention
        a = sums[i, c] / (counts[c] - 1)
        other = [sums[i, k] / counts[k] for k in range(len(distinct)) if k != c]
        b = min(other)
        denom = max(a, b)
        scores[i] = (b - a) / denom if denom > 0 else 0.0
    return float(scores.mean())


def silhouette_mean(
    per_level_points: Sequence[tuple[PointSet, ClusterAssignment]],
) -> float:
    """Mean over levels of the per-level mean silhouette; levels with fewer
    than two clusters are skipped with a warning."""
    level_scores = []
    for level, (points, assignment) in enumerate(per_level_points):
        score = silhouette_level(points, assignment)
        if score is None:
            logger.warning(
                "level %d has < 2 clusters after noise removal; skipped in "
                "silhouette",
                level,
            )
            continue
        level_scores.append(score)
    if not level_scores:
        raise EvaluationError("no level with >= 2 clusters; silhouette undefined")
    return float(np.mean(level_scores))


# ---------------------------------------------------------------------------
# Test-set labeling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestSentence:
    __test__ = False  # keep pytest from collecting this as a test class

    text: str
    judge_a: int
    judge_b: int

    def __post_init__(self) -> None:
        if self.judge_a not in (0, 1) or self.judge_b not in (0, 1):
            raise EvaluationError("judge labels must be 0 or 1")


@dataclass
class LabeledTestSet:
    """Held-out sentences with two independent binary AI-relatedness labels."""

    sentences: list[TestSentence] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)

    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]

    def lenient(self) -> np.ndarray:
        """Truth under the lenient rule: positive iff either judge flagged."""
        return np.array(
            [1 if (s.judge_a or s.judge_b) else 0 for s in self.sentences], dtype=int
        )

    def strict(self) -> np.ndarray:
        """Truth under the strict rule: positive iff both judges flagged."""
        return np.array(
            [1 if (s.judge_a and s.judge_b) else 0 for s in self.sentences], dtype=int
        )

    def save_jsonl(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for s in self.sentences:
                fh.write(
                    json.dumps(
                        {"sentence": s.text, "judge_a": s.judge_a, "judge_b": s.judge_b},
                        ensure_ascii=False,
                    )
                    + "\n"
                )

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "LabeledTestSet":
        sentences = []
        with Path(path).open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    sentences.append(
                        TestSentence(
                            text=obj["sentence"],
                            judge_a=int(obj["judge_a"]),
                            judge_b=int(obj["judge_b"]),
                        )
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise EvaluationError(
                        f"{path}:{line_no}: bad labeled-test-set record: {exc}"
                    ) from exc
        return cls(sentences=sentences)


_BRACKET_RE = re.compile(r"\[([^\[\]]*)\]")
_INT_RE = re.compile(r"\d+")


def parse_id_list(completion: str) -> Optional[set[int]]:
    """Extract sentence ids from the last bracketed list in a reply.

    Returns ``None`` when no bracketed list exists (unparseable); an empty
    bracket parses to the empty set.
    """
    matches = _BRACKET_RE.findall(completion)
    if not matches:
        return None
    return {int(m) for m in _INT_RE.findall(matches[-1])}


def _judge_document(
    sentence_map: dict[int, str],
    chat: ChatClient,
    template: str,
    judge_name: str,
) -> set[int]:
    prompt = render(
        template,
        DICTIONARY_OF_MAPPED_JOB_POSTING_SENTENCES=repr(sentence_map),
    )
    for attempt in range(2):
        ask = prompt
        if attempt:
            ask = (
                prompt
                + "\n\nYour previous reply had no bracketed list. Answer with "
                "a Python list of statement IDs only, e.g. [1, 3]."
            )
        ids = parse_id_list(chat.complete(ask))
        if ids is not None:
            return {i for i in ids if i in sentence_map}
    logger.warning(
        "judge %s: unparseable id list after re-ask; treating document as all-0",
        judge_name,
    )
    return set()


def label_test_sentences(
    test_docs: Iterable[Document],
    chat_a: ChatClient,
    chat_b: ChatClient,
    *,
    template: Optional[str] = None,
) -> LabeledTestSet:
    """Label every sentence of the held-out documents with two chat judges.

    Sentences are numbered 1..k within each document and sent as an id ->
    text dictionary; a judge's reply is the bracketed list of AI-related ids.
    """
    template = template if template is not None else load_template(TEST_SET_LABEL)
    out = LabeledTestSet()
    for doc in test_docs:
        sentences = split_sentences(doc)
        if not sentences:
            continue
        sentence_map = {i + 1: s.text for i, s in enumerate(sentences)}
        flagged_a = _judge_document(sentence_map, chat_a, template, "a")
        flagged_b = _judge_document(sentence_map, chat_b, template, "b")
        for i, s in enumerate(sentences):
            out.sentences.append(
                TestSentence(
                    text=s.text,
                    judge_a=1 if (i + 1) in flagged_a else 0,
                    judge_b=1 if (i + 1) in flagged_b else 0,
                )
            )
    if not out.sentences:
        logger.warning("labeled test set is empty")
    return out


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------


def macro_f1(preds: np.ndarray, truth: np.ndarray) -> float:
    """Unweighted mean F1 over classes {0, 1}; empty denominators give 0."""
    preds = np.asarray(preds, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if preds.shape != truth.shape:
        raise EvaluationError("prediction/truth length mismatch")
    f1s = []
    for cls in (0, 1):
        tp = int(np.sum((preds == cls) & (truth == cls)))
        fp = int(np.sum((preds == cls) & (truth != cls)))
        fn = int(np.sum((preds != cls) & (truth == cls)))
        precision = tp / (tp + fp) if (tp + fp) else 0.0
        recall = tp / (tp + fn) if (tp + fn) else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if (precision + recall)
            else 0.0
        )
        f1s.append(f1)
    return float(np.mean(f1s))


def _ensemble_similarity(
    sentence_texts: Sequence[str],
    leaf_texts: Sequence[str],
    providers: Sequence[EmbeddingClient],
) -> np.ndarray:
    """(sentences x leaves) cosine similarity, averaged over providers."""
    if not providers:
        raise EvaluationError("coverage needs at least one embedding provider")
    total = None
    for client in providers:
        s = client.embed_matrix(list(sentence_texts))
        l = client.embed_matrix(list(leaf_texts))
        sims = np.clip(s @ l.T, -1.0, 1.0)
        total = sims if total is None else total + sims
    return total / len(providers)


@dataclass(frozen=True)
class CoverageAtTau:
    tau: float
    lenient_f1: float
    strict_f1: float
    matched_leaf_ids: tuple[str, ...]


@dataclass
class CoverageReport:
    """Coverage macro-F1 per similarity threshold, plus leaf utilization at
    the strict-optimal threshold."""

    per_tau: dict[float, CoverageAtTau]
    best_strict_tau: float
    label_utilization: float
    n_leaves: int
    n_sentences: int

    def to_dict(self) -> dict:
        return {
            "schema": "coverage-report/v1",
            "n_leaves": self.n_leaves,
            "n_sentences": self.n_sentences,
            "per_tau": {
                f"{tau:.1f}": {
                    "lenient_f1": r.lenient_f1,
                    "strict_f1": r.strict_f1,
                    "matched_leaves": len(r.matched_leaf_ids),
                    "matched_leaf_ids": list(r.matched_leaf_ids),
                }
                for tau, r in sorted(self.per_tau.items(), reverse=True)
            },
            "best_strict_tau": self.best_strict_tau,
            "label_utilization": self.label_utilization,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )


def coverage_at(
    taxonomy: Taxonomy,
    lts: LabeledTestSet,
    tau: float,
    providers: Sequence[EmbeddingClient],
) -> CoverageAtTau:
    """Coverage at a single threshold (see :func:`evaluate_coverage`)."""
    report = evaluate_coverage(taxonomy, lts, providers, taus=(tau,))
    return report.per_tau[tau]


def evaluate_coverage(
    taxonomy: Taxonomy,
    lts: LabeledTestSet,
    providers: Sequence[EmbeddingClient],
    taus: Sequence[float] = TAUS,
) -> CoverageReport:
    """Match test sentences against leaf labels at every threshold.

    A sentence is predicted AI-related iff its best provider-averaged cosine
    similarity to any leaf label is strictly above τ.  Macro-F1 is computed
    against both truth rules; a leaf is "matched" at τ when at least one test
    sentence clears τ against it.
    """
    leaves = taxonomy.leaves()
    if not leaves:
        raise EvaluationError("taxonomy has no leaf labels to match against")
    if not taus:
        raise EvaluationError("at least one tau is required")
    for tau in taus:
        if not (0.0 < tau < 1.0):
            raise EvaluationError(f"tau must be in (0, 1), got {tau}")
    leaf_ids = [leaf.id for leaf in leaves]
    texts = lts.texts()
    if not texts:
        logger.warning("empty test set; coverage F1 is 0 by convention")
        sims = np.zeros((0, len(leaves)))
    else:
        sims = _ensemble_similarity(texts, [leaf.text for leaf in leaves], providers)
    lenient_truth = lts.lenient()
    strict_truth = lts.strict()
    best_sim = sims.max(axis=1) if texts else np.zeros(0)

    per_tau: dict[float, CoverageAtTau] = {}
    for tau in taus:
        preds = (best_sim > tau).astype(int)
        matched_mask = (sims > tau).any(axis=0) if texts else np.zeros(
            len(leaves), dtype=bool
        )
        per_tau[tau] = CoverageAtTau(
            tau=tau,
            lenient_f1=macro_f1(preds, lenient_truth),
            strict_f1=macro_f1(preds, strict_truth),
            matched_leaf_ids=tuple(
                sorted(leaf_ids[j] for j in np.flatnonzero(matched_mask))
            ),
        )

    best_tau, util = utilization(taxonomy, per_tau)
    return CoverageReport(
        per_tau=per_tau,
        best_strict_tau=best_tau,
        label_utilization=util,
        n_leaves=len(leaves),
        n_sentences=len(texts),
    )


def utilization(
    taxonomy: Taxonomy, per_tau: dict[float, CoverageAtTau]
) -> tuple[float, float]:
    """Best strict threshold (ties favor the larger τ) and the fraction of
    leaves matched there."""
    if not per_tau:
        raise EvaluationError("utilization needs at least one evaluated tau")
    n_leaves = len(taxonomy.leaves())
    best_tau = max(per_tau, key=lambda t: (per_tau[t].strict_f1, t))
    util = (
        len(per_tau[best_tau].matched_leaf_ids) / n_leaves if n_leaves else 0.0
    )
    return best_tau, util
