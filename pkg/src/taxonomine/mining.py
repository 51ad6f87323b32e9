"""Keyword-dictionary loading and multi-pattern candidate extraction.

Matching runs as a single Aho-Corasick automaton pass per sentence rather
than one scan per keyword, so the cost per sentence is linear in its length
plus the number of hits — the property that makes corpus-scale mining
feasible.  A hit only counts when both sides of the matched span sit on a
boundary.  The default boundary rule is strict: whitespace or the sentence
start/end ("PyTorch," does not match "pytorch").  ``loose_boundaries``
relaxes the rule so any non-alphanumeric character counts as a boundary.
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .corpus import Document, Sentence, split_sentences
from .errors import MiningError

logger = logging.getLogger(__name__)

MINED = "mined"
AUGMENTED = "augmented"


def candidate_id(doc_id: str, sentence_index: int) -> str:
    """Stable candidate id derived from the document id and sentence ordinal."""
    digest = hashlib.sha256(f"{doc_id}\x1f{sentence_index}".encode("utf-8")).hexdigest()
    return digest[:16]


class _Automaton:
    """Aho-Corasick automaton over a fixed set of lowercase patterns.

    States are integers; ``goto`` maps state -> {char -> state}; ``fail``
    holds failure links; ``output`` lists pattern indices terminating at each
    state (own plus those inherited along failure links).
    """

    def __init__(self, patterns: list[str]):
        self.patterns = patterns
        self.goto: list[dict[str, int]] = [{}]
        self.fail: list[int] = [0]
        self.output: list[list[int]] = [[]]
        for idx, pat in enumerate(patterns):
            self._insert(pat, idx)
        self._build_failure_links()

    def _insert(self, pattern: str, idx: int) -> None:
        state = 0
        for ch in pattern:
            nxt = self.goto[state].get(ch)
            if nxt is None:
                nxt = len(self.goto)
                self.goto.append({})
                self.fail.append(0)
                self.output.append([])
                self.goto[state][ch] = nxt
            state = nxt
        self.output[state].append(idx)

    def _build_failure_links(self) -> None:
        queue: deque[int] = deque()
        for state in self.goto[0].values():
            self.fail[state] = 0
            queue.append(state)
        while queue:
            state = queue.popleft()
            for ch, nxt in self.goto[state].items():
                queue.append(nxt)
                f = self.fail[state]
                while f and ch not in self.goto[f]:
                    f = self.fail[f]
                self.fail[nxt] = self.goto[f].get(ch, 0)
                self.output[nxt] = self.output[nxt] + self.output[self.fail[nxt]]

    def scan(self, text: str) -> Iterator[tuple[int, int]]:
        """Yield (end_index_exclusive, pattern_index) for every occurrence."""
        state = 0
        for pos, ch in enumerate(text):
            while state and ch not in self.goto[state]:
                state = self.fail[state]
            state = self.goto[state].get(ch, 0)
            for idx in self.output[state]:
                yield pos + 1, idx


@dataclass
class KeywordSet:
    """Normalized keyword dictionary (lowercase, deduplicated, sorted)."""

    keywords: tuple[str, ...]
    source_note: str = ""
    _automaton: Optional[_Automaton] = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        for kw in self.keywords:
            if not kw:
                raise MiningError("keyword set contains an empty string")
            if kw != kw.lower():
                raise MiningError(f"keyword {kw!r} is not lowercase")
            if kw != kw.strip():
                raise MiningError(f"keyword {kw!r} has surrounding whitespace")
            if "/" in kw or "(" in kw or ")" in kw:
                raise MiningError(f"keyword {kw!r} contains forbidden characters")
        if len(set(self.keywords)) != len(self.keywords):
            raise MiningError("keyword set contains duplicates")

    @property
    def automaton(self) -> _Automaton:
        if self._automaton is None:
            self._automaton = _Automaton(list(self.keywords))
        return self._automaton


def normalize_keyword(raw: str) -> list[str]:
    """Apply dictionary normalization to one raw entry.

    Parenthesis characters are removed, '/' splits the entry into separate
    keywords, each part is lowercased, trimmed, and internal whitespace is
    collapsed to single spaces.  Empty results are dropped.
    """
    cleaned = raw.replace("(", "").replace(")", "")
    out = []
    for part in cleaned.split("/"):
        norm = re.sub(r"\s+", " ", part.strip().lower())
        if norm:
            out.append(norm)
    return out


def load_keywords(path: str | Path, source_note: str = "") -> KeywordSet:
    """Load a one-keyword-per-line dictionary and normalize it."""
    path = Path(path)
    if not path.exists():
        raise MiningError(f"keyword file not found: {path}")
    entries: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            entries.update(normalize_keyword(line))
    if not entries:
        raise MiningError(f"keyword file {path} contains no usable keywords")
    return KeywordSet(keywords=tuple(sorted(entries)), source_note=source_note or str(path))


def _boundary_ok(text: str, start: int, end: int, loose: bool) -> bool:
    left_ok = start == 0 or (
        not text[start - 1].isalnum() if loose else text[start - 1].isspace()
    )
    if not left_ok:
        return False
    return end == len(text) or (
        not text[end].isalnum() if loose else text[end].isspace()
    )


def match_sentence(
    sentence: Sentence | str, keywords: KeywordSet, *, loose_boundaries: bool = False
) -> list[str]:
    """Return the keywords matching a sentence, each reported at most once.

    Matching is case-insensitive; a hit requires a valid boundary on both
    sides of the matched span.  The result is sorted alphabetically.
    """
    text = sentence.text if isinstance(sentence, Sentence) else sentence
    lowered = text.lower()
    hits: set[str] = set()
    for end, idx in keywords.automaton.scan(lowered):
        kw = keywords.keywords[idx]
        start = end - len(kw)
        if _boundary_ok(lowered, start, end, loose_boundaries):
            hits.add(kw)
    return sorted(hits)


@dataclass(frozen=True)
class CandidateSentence:
    """A mined or augmented sentence with match metadata and lineage."""

    id: str
    sentence: Sentence
    matched_keywords: tuple[str, ...] = ()
    doc_match_count: int = 0
    origin: str = MINED
    parent_candidate_id: Optional[str] = None
    class_score: Optional[float] = None

    def __post_init__(self) -> None:
        if self.origin not in (MINED, AUGMENTED):
            raise MiningError(f"invalid candidate origin {self.origin!r}")
        if self.origin == MINED:
            if not self.matched_keywords:
                raise MiningError(f"mined candidate {self.id} has no matched keywords")
            if self.parent_candidate_id is not None:
                raise MiningError(f"mined candidate {self.id} must not have a parent")
            if self.doc_match_count < 1:
                raise MiningError(f"mined candidate {self.id} has doc_match_count < 1")
        else:
            if self.parent_candidate_id is None:
                raise MiningError(f"augmented candidate {self.id} requires a parent id")
        if self.class_score is not None and not -1.0 <= self.class_score <= 1.0:
            raise MiningError(
                f"candidate {self.id}: class_score {self.class_score} outside [-1, 1]"
            )

    def with_score(self, score: float) -> "CandidateSentence":
        return CandidateSentence(
            id=self.id,
            sentence=self.sentence,
            matched_keywords=self.matched_keywords,
            doc_match_count=self.doc_match_count,
            origin=self.origin,
            parent_candidate_id=self.parent_candidate_id,
            class_score=score,
        )


def mine_candidates(
    train: Iterable[Document],
    keywords: KeywordSet,
    min_doc_matches: int = 3,
    *,
    loose_boundaries: bool = False,
) -> list[CandidateSentence]:
    """Extract candidate sentences from documents with enough keyword hits.

    For each document, every sentence is matched against the dictionary; when
    the number of matching sentences reaches ``min_doc_matches``, those
    sentences are emitted as mined candidates carrying the per-document match
    count.  Output order is deterministic: document order, then sentence
    index.
    """
    if min_doc_matches < 1:
        raise MiningError("min_doc_matches must be >= 1")
    out: list[CandidateSentence] = []
    for doc in train:
        matched: list[tuple[Sentence, list[str]]] = []
        for sent in split_sentences(doc):
            kws = match_sentence(sent, keywords, loose_boundaries=loose_boundaries)
            if kws:
                matched.append((sent, kws))
        if len(matched) >= min_doc_matches:
            for sent, kws in matched:
                out.append(
                    CandidateSentence(
                        id=candidate_id(doc.id, sent.index),
                        sentence=sent,
                        matched_keywords=tuple(kws),
                        doc_match_count=len(matched),
                        origin=MINED,
                    )
                )
    return out
