"""Class-relatedness scoring, percentile filtering, and augmentation.

These are the data-inclusion controls of the pipeline: scoring ranks every
mined candidate by how close it sits to the keyword dictionary in embedding
space; percentile filtering keeps only candidates whose score strictly
exceeds the chosen percentile of mined scores (filtering cascades to their
augmented children); augmentation adds near-duplicate corpus sentences found
by exact brute-force semantic search against the candidate set.

Scoring definition, per provider: ``(mean(sims) + max(sims)) / 2`` where
``sims`` are cosine similarities between the candidate and every keyword;
the final score is the arithmetic mean over providers.  Augmented candidates
are never re-scored and never enter the percentile distribution; they
inherit their parent's score so every pool entry carries one.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Sentence
from .errors import SelectionError
from .mining import AUGMENTED, CandidateSentence, KeywordSet, MINED, candidate_id
from .providers import EmbeddingClient, EmbeddingVector

logger = logging.getLogger(__name__)

_SEARCH_CHUNK = 512


def _content_key(text: str) -> bytes:
    return hashlib.sha256(text.encode("utf-8")).digest()


@dataclass
class ScoredPool:
    """Candidates with populated scores plus the keyword-embedding context."""

    candidates: list[CandidateSentence]
    keyword_embeddings: dict[str, np.ndarray] = field(default_factory=dict)
    provider_ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = set()
        for cand in self.candidates:
            if cand.class_score is None:
                raise SelectionError(f"candidate {cand.id} has no class_score")
            ids.add(cand.id)
        for cand in self.candidates:
            if cand.origin == AUGMENTED and cand.parent_candidate_id not in ids:
                raise SelectionError(
                    f"augmented candidate {cand.id} references missing parent "
                    f"{cand.parent_candidate_id}"
                )

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def mined(self) -> list[CandidateSentence]:
        return [c for c in self.candidates if c.origin == MINED]

    @property
    def augmented(self) -> list[CandidateSentence]:
        return [c for c in self.candidates if c.origin == AUGMENTED]

    def by_id(self) -> dict[str, CandidateSentence]:
        return {c.id: c for c in self.candidates}


def _provider_score(sims: np.ndarray) -> float:
    return float((sims.mean() + sims.max()) / 2.0)


def class_score(
    candidate_text: str,
    keyword_embs: Sequence[Sequence[EmbeddingVector] | np.ndarray],
    clients: Sequence[EmbeddingClient],
) -> float:
    """Mean-max class-relatedness score of one text, averaged over providers."""
    if not clients:
        raise SelectionError("class_score requires at least one provider")
    if len(keyword_embs) != len(clients):
        raise SelectionError("keyword_embs and clients must align one-to-one")
    per_provider = []
    for embs, client in zip(keyword_embs, clients):
        matrix = (
            embs
            if isinstance(embs, np.ndarray)
            else np.vstack([e.values for e in embs])
        )
        if matrix.size == 0:
            raise SelectionError("keyword embedding set is empty")
        vec = client.embed([candidate_text])[0].values
        sims = np.clip(matrix @ vec, -1.0, 1.0)
        per_provider.append(_provider_score(sims))
    return float(np.mean(per_provider))


def score_pool(
    candidates: list[CandidateSentence],
    keywords: KeywordSet,
    clients: Sequence[EmbeddingClient],
) -> ScoredPool:
    """Score every candidate against the keyword dictionary, batched.

    Equivalent to calling :func:`class_score` per candidate, but embeds the
    candidate texts in provider batches.
    """
    if not clients:
        raise SelectionError("score_pool requires at least one provider")
    texts = [c.sentence.text for c in candidates]
    keyword_list = list(keywords.keywords)
    keyword_matrices: dict[str, np.ndarray] = {}
    totals = np.zeros(len(candidates), dtype=np.float64)
    for client in clients:
        kw_matrix = client.embed_matrix(keyword_list)
        keyword_matrices[client.config.model_id] = kw_matrix
        if texts:
            cand_matrix = client.embed_matrix(texts)
            sims = np.clip(cand_matrix @ kw_matrix.T, -1.0, 1.0)
            totals += (sims.mean(axis=1) + sims.max(axis=1)) / 2.0
    scores = totals / len(clients)
    scored = [c.with_score(float(s)) for c, s in zip(candidates, scores)]
    return ScoredPool(
        candidates=scored,
        keyword_embeddings=keyword_matrices,
        provider_ids=[c.config.model_id for c in clients],
    )


def percentile_filter(pool: ScoredPool, pct: int) -> ScoredPool:
    """Keep mined candidates scoring strictly above the pct-th percentile.

    The percentile is computed with linear interpolation over the mined
    scores only; 75 is the strictest setting (~25% survive).  Augmented
    candidates survive exactly when their parent does (cascade), regardless
    of their own inherited score.
    """
    if pct not in (25, 50, 75):
        raise SelectionError(f"percentile must be one of 25/50/75, got {pct}")
    mined = pool.mined
    if not mined:
        logger.warning("percentile_filter on empty pool; nothing to do")
        return ScoredPool(
            candidates=[],
            keyword_embeddings=pool.keyword_embeddings,
            provider_ids=pool.provider_ids,
        )
    scores = np.array([c.class_score for c in mined], dtype=np.float64)
    cut = float(np.percentile(scores, pct))
    surviving_ids = {c.id for c in mined if c.class_score > cut}
    kept = [
        c
        for c in pool.candidates
        if (c.origin == MINED and c.id in surviving_ids)
        or (c.origin == AUGMENTED and c.parent_candidate_id in surviving_ids)
    ]
    return ScoredPool(
        candidates=kept,
        keyword_embeddings=pool.keyword_embeddings,
        provider_ids=pool.provider_ids,
    )


def augment_candidates(
    pool: ScoredPool,
    train_sentences: Iterable[Sentence],
    threshold: float = 0.9,
    client: Optional[EmbeddingClient] = None,
) -> ScoredPool:
    """Add corpus sentences whose similarity to a candidate exceeds threshold.

    Exact brute-force search: every non-candidate sentence is compared (under
    the single augmentation provider) against all candidate embeddings taken
    as a snapshot at call time.  A sentence is added once, as an augmented
    candidate parented to its most similar candidate (similarity ties break
    to the lexicographically lower candidate id), inheriting the parent's
    class score.
    """
    if client is None:
        raise SelectionError("augment_candidates requires an embedding client")
    if not 0.0 < threshold <= 1.0:
        raise SelectionError(f"augmentation threshold {threshold} outside (0, 1]")
    if not pool.candidates:
        logger.warning("augment_candidates on empty pool; nothing to do")
        return pool

    target_texts = [c.sentence.text for c in pool.candidates]
    target_ids = [c.id for c in pool.candidates]
    target_scores = [c.class_score for c in pool.candidates]
    target_matrix = client.embed_matrix(target_texts)

    known_ids = set(target_ids)
    known_content = {_content_key(t) for t in target_texts}

    additions: list[CandidateSentence] = []

    def flush(batch: list[Sentence]) -> None:
        if not batch:
            return
        matrix = client.embed_matrix([s.text for s in batch])
        sims = np.clip(matrix @ target_matrix.T, -1.0, 1.0)
        for row, sent in enumerate(batch):
            best = float(sims[row].max())
            if best <= threshold:
                continue
            tied = np.flatnonzero(sims[row] >= best - 1e-12)
            parent_pos = min(tied, key=lambda j: target_ids[j])
            additions.append(
                CandidateSentence(
                    id=candidate_id(sent.doc_id, sent.index),
                    sentence=sent,
                    matched_keywords=(),
                    doc_match_count=0,
                    origin=AUGMENTED,
                    parent_candidate_id=target_ids[parent_pos],
                    class_score=target_scores[parent_pos],
                )
            )

    batch: list[Sentence] = []
    for sent in train_sentences:
        key = _content_key(sent.text)
        if key in known_content:
            continue
        if candidate_id(sent.doc_id, sent.index) in known_ids:
            continue
        known_content.add(key)
        batch.append(sent)
        if len(batch) >= _SEARCH_CHUNK:
            flush(batch)
            batch = []
    flush(batch)

    if additions:
        logger.info("augmentation added %d candidates", len(additions))
    return ScoredPool(
        candidates=pool.candidates + additions,
        keyword_embeddings=pool.keyword_embeddings,
        provider_ids=pool.provider_ids,
    )


# ---------------------------------------------------------------------------
# Candidate persistence (JSONL)
# ---------------------------------------------------------------------------


def candidate_to_json(candidate: CandidateSentence) -> dict:
    return {
        "id": candidate.id,
        "doc_id": candidate.sentence.doc_id,
        "index": candidate.sentence.index,
        "text": candidate.sentence.text,
        "span": list(candidate.sentence.span),
        "matched_keywords": list(candidate.matched_keywords),
        "doc_match_count": candidate.doc_match_count,
        "origin": candidate.origin,
        "parent_candidate_id": candidate.parent_candidate_id,
        "class_score": candidate.class_score,
    }


def candidate_from_json(obj: dict) -> CandidateSentence:
    sentence = Sentence(
        doc_id=obj["doc_id"],
        index=int(obj["index"]),
        text=obj["text"],
        span=tuple(obj["span"]),
    )
    return CandidateSentence(
        id=obj["id"],
        sentence=sentence,
        matched_keywords=tuple(obj.get("matched_keywords", ())),
        doc_match_count=int(obj.get("doc_match_count", 0)),
        origin=obj.get("origin", MINED),
        parent_candidate_id=obj.get("parent_candidate_id"),
        class_score=obj.get("class_score"),
    )


def save_candidates(
    candidates: Sequence[CandidateSentence], path: str | Path
) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for candidate in candidates:
            fh.write(json.dumps(candidate_to_json(candidate), ensure_ascii=False))
            fh.write("\n")


def load_candidates(path: str | Path) -> list[CandidateSentence]:
    path = Path(path)
    if not path.exists():
        raise SelectionError(f"candidate file not found: {path}")
    out: list[CandidateSentence] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(candidate_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SelectionError(
                    f"{path}:{line_no}: bad candidate record: {exc}"
                ) from exc
    return out
