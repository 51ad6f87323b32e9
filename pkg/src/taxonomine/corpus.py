"""Corpus ingestion, sentence segmentation, and holdout splitting.

The corpus format is JSONL: one object per line with keys ``id``, ``text``
and ``month`` (``YYYY-MM``).  Loading is streaming — memory usage is bounded
by the largest single document plus the set of seen ids (kept for duplicate
detection), not by file size.

Sentence segmentation is rule-based and fully deterministic:

* split after ``.``, ``!`` or ``?`` when followed by whitespace and an
  uppercase letter or digit,
* unless the period terminates a known abbreviation (``e.g.``, ``i.e.``,
  ``Sr.``, ``Jr.``, ``Inc.``, ...) or the position lies inside an open
  parenthesis,
* additionally split on any whitespace run containing two or more newlines
  (paragraph breaks).

Each sentence records its character span into the source document; spans are
trimmed to the non-whitespace extent, so the spans tile exactly the
non-whitespace characters of the document.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import CorpusError

logger = logging.getLogger(__name__)

_MONTH_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")

#: Abbreviations whose trailing period never ends a sentence (lowercased).
ABBREVIATIONS = frozenset(
    {
        "e.g.",
        "i.e.",
        "etc.",
        "vs.",
        "sr.",
        "jr.",
        "dr.",
        "mr.",
        "mrs.",
        "ms.",
        "prof.",
        "inc.",
        "ltd.",
        "co.",
        "corp.",
        "dept.",
        "no.",
        "st.",
        "approx.",
        "min.",
        "max.",
    }
)

_SENTENCE_END = ".!?"


@dataclass(frozen=True)
class Document:
    """A single posting: unique id, full text, and calendar month tag."""

    id: str
    text: str
    month: str
    source: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if not self.text.strip():
            raise CorpusError(f"document {self.id!r}: text empty after trim")
        if not _MONTH_RE.match(self.month):
            raise CorpusError(
                f"document {self.id!r}: month {self.month!r} is not a valid YYYY-MM"
            )


@dataclass(frozen=True)
class Sentence:
    """One ordered segment of a document, with its character span."""

    doc_id: str
    index: int
    text: str
    span: tuple[int, int]

    def __post_init__(self) -> None:
        if not self.text:
            raise CorpusError(f"sentence {self.doc_id}:{self.index} has empty text")
        start, end = self.span
        if not (0 <= start < end):
            raise CorpusError(
                f"sentence {self.doc_id}:{self.index} has invalid span {self.span}"
            )


@dataclass
class LoadReport:
    """Counters accumulated by :func:`load_corpus`."""

    documents: int = 0
    blank_lines: int = 0
    deduped: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


def load_corpus(
    path: str | Path,
    source: str = "",
    *,
    fail_fast: bool = True,
    dedupe: bool = False,
    report: LoadReport | None = None,
) -> Iterator[Document]:
    """Stream :class:`Document` objects from a JSONL file in file order.

    Blank lines are skipped and counted.  A malformed line (bad JSON, missing
    key, invalid field) raises :class:`CorpusError` naming the line number
    when ``fail_fast`` is true, otherwise it is recorded on ``report`` and
    skipped.  Duplicate ids are rejected the same way by default; with
    ``dedupe`` the later occurrences are silently dropped and counted.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    rep = report if report is not None else LoadReport()
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                rep.blank_lines += 1
                continue
            try:
                doc = _parse_record(line, line_no, source)
            except CorpusError as exc:
                if fail_fast:
                    raise
                rep.errors.append((line_no, str(exc)))
                logger.warning("skipping line %d: %s", line_no, exc)
                continue
            if doc.id in seen_ids:
                if dedupe:
                    rep.deduped += 1
                    continue
                exc = CorpusError(f"line {line_no}: duplicate document id {doc.id!r}")
                if fail_fast:
                    raise exc
                rep.errors.append((line_no, str(exc)))
                logger.warning("skipping line %d: %s", line_no, exc)
                continue
            seen_ids.add(doc.id)
            rep.documents += 1
            yield doc


def _parse_record(line: str, line_no: int, source: str) -> Document:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: record is not a JSON object")
    for key in ("id", "text", "month"):
        if key not in obj:
            raise CorpusError(f"line {line_no}: missing key {key!r}")
    try:
        return Document(
            id=str(obj["id"]), text=str(obj["text"]), month=str(obj["month"]), source=source
        )
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}") from exc


def _is_abbreviation(text: str, period_idx: int) -> bool:
    """True when the period at ``period_idx`` ends a known abbreviation."""
    start = period_idx
    while start > 0 and (text[start - 1].isalpha() or text[start - 1] == "."):
        start -= 1
    token = text[start : period_idx + 1].lower()
    return token in ABBREVIATIONS


def _paragraph_blocks(text: str) -> Iterator[tuple[int, int]]:
    """Yield (start, end) spans between whitespace runs holding >= 2 newlines."""
    boundary = re.compile(r"[^\S\n]*\n[^\S\n]*(?:\n[^\S\n]*)+")
    pos = 0
    for m in boundary.finditer(text):
        if m.start() > pos:
            yield pos, m.start()
        pos = m.end()
    if pos < len(text):
        yield pos, len(text)


def _split_block(text: str, start: int, end: int) -> Iterator[tuple[int, int]]:
    """Split one paragraph block on sentence-final punctuation."""
    sent_start = start
    i = start
    depth = 0
    while i < end:
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(0, depth - 1)
        elif ch in _SENTENCE_END and depth == 0:
            # consume a run of terminal punctuation ("?!", "...")
            j = i
            while j + 1 < end and text[j + 1] in _SENTENCE_END:
                j += 1
            k = j + 1
            while k < end and text[k].isspace():
                k += 1
            follows_upper = k < end and (text[k].isupper() or text[k].isdigit())
            is_abbrev = ch == "." and j == i and _is_abbreviation(text, i)
            if follows_upper and k > j + 1 and not is_abbrev:
                yield sent_start, j + 1
                sent_start = k
                i = k
                continue
            i = j + 1
            continue
        i += 1
    if sent_start < end:
        yield sent_start, end


def split_sentences(doc: Document) -> list[Sentence]:
    """Deterministically segment a document into sentences with exact spans."""
    text = doc.text
    sentences: list[Sentence] = []
    for b_start, b_end in _paragraph_blocks(text):
        for s_start, s_end in _split_block(text, b_start, b_end):
            # trim the span to its non-whitespace extent
            while s_start < s_end and text[s_start].isspace():
                s_start += 1
            while s_end > s_start and text[s_end - 1].isspace():
                s_end -= 1
            if s_start >= s_end:
                continue
            sentences.append(
                Sentence(
                    doc_id=doc.id,
                    index=len(sentences),
                    text=text[s_start:s_end],
                    span=(s_start, s_end),
                )
            )
    return sentences


def holdout_split(
    corpus: Iterable[Document], holdout_month: str
) -> tuple[list[Document], list[Document]]:
    """Partition a corpus into (train, test) by calendar month.

    ``test`` holds exactly the documents whose month equals ``holdout_month``;
    the partition is exhaustive and disjoint.  An absent holdout month yields
    an empty test list with a warning.  Both sides are materialized as lists
    (the CLI streams to files instead when splitting large corpora).
    """
    if not _MONTH_RE.match(holdout_month):
        raise CorpusError(f"holdout month {holdout_month!r} is not a valid YYYY-MM")
    train: list[Document] = []
    test: list[Document] = []
    for doc in corpus:
        (test if doc.month == holdout_month else train).append(doc)
    if not test:
        logger.warning("holdout month %s not present in corpus; test set empty", holdout_month)
    return train, test


def document_to_json(doc: Document) -> str:
    """Serialize a document back to its JSONL line form."""
    return json.dumps(
        {"id": doc.id, "text": doc.text, "month": doc.month}, ensure_ascii=False
    )
