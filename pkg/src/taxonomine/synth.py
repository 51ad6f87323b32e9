"""Deterministic synthetic job-posting corpus with planted taxonomy structure.

The generator writes four kinds of postings:

* AI postings — 4-6 sentences drawn from one of ten AI themes; every sentence
  carries one of the theme's keyword phrases, so the posting clears the
  min-doc-matches mining gate and its sentences share enough vocabulary to
  cluster by sub-topic and then by theme.
* partial postings — one or two near-duplicates of sentences from AI
  postings (a strict token superset, so cosine similarity stays high under
  bag-of-words embeddings) padded with office filler; too few keyword
  sentences to be mined, which makes them augmentation bait.
* noise postings — office/logistics sentences with no AI vocabulary.
* test postings — dated in the holdout month; a controlled mix of themed AI
  sentences, "extended-only" sentences (automation/analytics vocabulary that
  only the lenient mock judge flags), and noise.

Everything is driven by one seeded RNG, so a given spec always produces the
same corpus bytes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .corpus import Document

_TOKEN_RE = re.compile(r"[a-z0-9]+")

TRAIN_MONTHS = ("2024-01", "2024-02", "2024-03", "2024-04", "2024-05")
TEST_MONTH = "2024-06"


@dataclass(frozen=True)
class Theme:
    name: str
    tokens: tuple[str, ...]  # theme vocabulary, sprinkled into every sentence
    keywords: tuple[str, ...]  # two-word minable phrases sharing a theme word

    def sub_word(self, idx: int) -> str:
        """The subtheme-specific half of a keyword phrase (the word that is
        not shared across the theme's phrases)."""
        first, second = self.keywords[idx].split()
        others = {self.keywords[j].split()[0] for j in range(len(self.keywords))}
        return second if len(others) == 1 else first


THEMES: tuple[Theme, ...] = (
    Theme(
        name="vision",
        tokens=("vision", "visual", "camera"),
        keywords=(
            "image segmentation",
            "image classification",
            "image detection",
            "image retrieval",
            "image tracking",
            "image captioning",
        ),
    ),
    Theme(
        name="language",
        tokens=("language", "linguistic", "nlp"),
        keywords=(
            "text summarization",
            "text translation",
            "text categorization",
            "text parsing",
            "text paraphrasing",
            "text moderation",
        ),
    ),
    Theme(
        name="speech",
        tokens=("speech", "voice", "audio"),
        keywords=(
            "speech recognition",
            "speech synthesis",
            "speech diarization",
            "speech denoising",
            "speech transcription",
            "speech prosody",
        ),
    ),
    Theme(
        name="robotics",
        tokens=("robotics", "robot", "autonomous"),
        keywords=(
            "robot navigation",
            "robot manipulation",
            "robot grasping",
            "robot planning",
            "robot calibration",
            "robot teleoperation",
        ),
    ),
    Theme(
        name="forecasting",
        tokens=("timeseries", "seasonal", "quantitative"),
        keywords=(
            "demand forecasting",
            "sales forecasting",
            "revenue forecasting",
            "traffic forecasting",
            "weather forecasting",
            "energy forecasting",
        ),
    ),
    Theme(
        name="recommendation",
        tokens=("personalization", "ranking", "preferences"),
        keywords=(
            "product recommendation",
            "content recommendation",
            "media recommendation",
            "music recommendation",
            "news recommendation",
            "grocery recommendation",
        ),
    ),
    Theme(
        name="anomaly",
        tokens=("fraud", "risk", "alerting"),
        keywords=(
            "anomaly screening",
            "anomaly scoring",
            "anomaly triage",
            "anomaly monitoring",
            "anomaly flagging",
            "anomaly auditing",
        ),
    ),
    Theme(
        name="optimization",
        tokens=("operations", "dispatch", "throughput"),
        keywords=(
            "route optimization",
            "fleet optimization",
            "warehouse optimization",
            "logistics optimization",
            "delivery optimization",
            "network optimization",
        ),
    ),
    Theme(
        name="dialogue",
        tokens=("conversational", "assistant", "chat"),
        keywords=(
            "dialogue orchestration",
            "dialogue grounding",
            "dialogue steering",
            "dialogue memory",
            "dialogue handoff",
            "dialogue scripting",
        ),
    ),
    Theme(
        name="simulation",
        tokens=("simulator", "digital", "twin"),
        keywords=(
            "physics simulation",
            "climate simulation",
            "market simulation",
            "crowd simulation",
            "terrain simulation",
            "molecular simulation",
        ),
    ),
)

# Every opener carries "models" so the strict mock judge flags themed
# sentences; extended-only and noise templates must avoid that vocabulary.
_OPENERS = (
    "Experience building models for",
    "You will ship models for",
    "We develop models for",
    "Hands on models background in",
    "Expertise delivering models for",
    "Proven models skills in",
)

_FILLERS = (
    "for enterprise clients",
    "with agile teams",
    "in regulated industries",
    "for global rollouts",
    "with cross functional squads",
    "under tight deadlines",
    "for partner integrations",
    "with quarterly reviews",
    "across regional offices",
    "for onboarding cohorts",
    "with vendor toolchains",
    "in hybrid settings",
    "for compliance audits",
    "with legacy migrations",
    "across brand portfolios",
)

_UNIQUE_PADS = (
    "initiative",
    "charter",
    "roadmap",
    "backlog",
    "cadence",
    "workflow",
    "handbook",
    "framework",
    "milestone",
    "guild",
)

_NOISE_VERBS = (
    "Coordinate",
    "Organize",
    "Manage",
    "Schedule",
    "Prepare",
    "Oversee",
    "Process",
    "Review",
)

_NOISE_OBJECTS = (
    "payroll cycles",
    "benefits paperwork",
    "travel reimbursements",
    "office supplies",
    "meeting rooms",
    "shift rosters",
    "customer escalations",
    "invoice approvals",
    "parking permits",
    "catering orders",
    "visitor badges",
    "mailroom deliveries",
)

_NOISE_TAILS = (
    "for the finance team",
    "at headquarters",
    "before month end",
    "with external vendors",
    "during busy periods",
    "for every branch",
    "according to policy",
    "without delays",
)

_EXT_VERBS = ("Support", "Maintain", "Improve", "Streamline")

_EXT_OBJECTS = (
    "python automation scripts",
    "cloud analytics dashboards",
    "statistical reporting workbooks",
    "automation playbooks",
    "analytics scorecards",
    "python reporting notebooks",
)


@dataclass(frozen=True)
class SynthSpec:
    """Corpus shape.  Defaults are sized so the full 12-configuration sweep
    builds two-level taxonomies in every cell."""

    n_ai_docs: int = 320
    n_partial_docs: int = 75
    n_noise_docs: int = 55
    n_test_docs: int = 50
    seed: int = 7
    train_months: tuple[str, ...] = TRAIN_MONTHS
    test_month: str = TEST_MONTH


class _SentenceFactory:
    """Builds sentences with globally unique token multisets (duplicate
    multisets would collapse to identical bag-of-words embeddings)."""

    def __init__(self, rng) -> None:
        self.rng = rng
        self._seen: set[tuple[str, ...]] = set()

    def _unique(self, text: str) -> str:
        sig = tuple(sorted(_TOKEN_RE.findall(text.lower())))
        while sig in self._seen:
            text = f"{text} {self.rng.choice(_UNIQUE_PADS)}"
            sig = tuple(sorted(_TOKEN_RE.findall(text.lower())))
        self._seen.add(sig)
        return text

    def ai(self, theme: Theme, sub_idx: Optional[int] = None) -> str:
        rng = self.rng
        if sub_idx is None:
            sub_idx = rng.randrange(len(theme.keywords))
        keyword = theme.keywords[sub_idx]
        sub = theme.sub_word(sub_idx)
        # Keyword repetition spreads class scores within each subtheme so
        # percentile cuts prune every subtheme instead of whole subthemes.
        roll = rng.random()
        reps = 3 if roll < 0.2 else (2 if roll < 0.55 else 1)
        kw_block = " and ".join([keyword] * reps)
        t1, t2 = rng.sample(list(theme.tokens), 2)
        text = (
            f"{rng.choice(_OPENERS)} {kw_block} across {t1} {sub} and "
            f"{t2} {sub} {rng.choice(_FILLERS)}"
        )
        return self._unique(text)

    def near_duplicate(self, base: str) -> str:
        return self._unique(f"{base} {self.rng.choice(_UNIQUE_PADS)}")

    def noise(self) -> str:
        rng = self.rng
        text = (
            f"{rng.choice(_NOISE_VERBS)} {rng.choice(_NOISE_OBJECTS)} and "
            f"{rng.choice(_NOISE_OBJECTS)} {rng.choice(_NOISE_TAILS)}"
        )
        return self._unique(text)

    def extended_only(self) -> str:
        rng = self.rng
        text = (
            f"{rng.choice(_EXT_VERBS)} {rng.choice(_EXT_OBJECTS)} "
            f"{rng.choice(_NOISE_TAILS)}"
        )
        return self._unique(text)


def _doc_text(sentences: list[str]) -> str:
    return " ".join(s[0].upper() + s[1:] + "." for s in sentences)


def generate_corpus(spec: SynthSpec = SynthSpec()) -> tuple[list[Document], list[str]]:
    """Build the synthetic corpus and its keyword dictionary.

    Returns ``(documents, keywords)``; keywords are the 60 theme phrases.
    """
    import random

    rng = random.Random(spec.seed)
    factory = _SentenceFactory(rng)
    docs: list[Document] = []
    serial = 0

    def add(sentences: list[str], month: str) -> None:
        nonlocal serial
        docs.append(
            Document(
                id=f"synth-{serial:05d}",
                text=_doc_text(sentences),
                month=month,
                source="synth",
            )
        )
        serial += 1

    ai_sentence_bank: list[str] = []
    for _ in range(spec.n_ai_docs):
        theme = rng.choice(THEMES)
        sentences = [factory.ai(theme) for _ in range(rng.randint(4, 6))]
        ai_sentence_bank.extend(sentences)
        sentences = sentences + [factory.noise() for _ in range(rng.randint(1, 2))]
        rng.shuffle(sentences)
        add(sentences, rng.choice(spec.train_months))

    for _ in range(spec.n_partial_docs):
        n_dups = rng.randint(1, 2)
        sentences = [
            factory.near_duplicate(rng.choice(ai_sentence_bank)) for _ in range(n_dups)
        ]
        sentences += [factory.noise() for _ in range(rng.randint(2, 4))]
        rng.shuffle(sentences)
        add(sentences, rng.choice(spec.train_months))

    for _ in range(spec.n_noise_docs):
        sentences = [factory.noise() for _ in range(rng.randint(4, 7))]
        add(sentences, rng.choice(spec.train_months))

    for _ in range(spec.n_test_docs):
        theme = rng.choice(THEMES)
        sentences = [factory.ai(theme) for _ in range(rng.randint(2, 3))]
        sentences += [factory.extended_only() for _ in range(rng.randint(1, 2))]
        sentences += [factory.noise() for _ in range(rng.randint(2, 3))]
        rng.shuffle(sentences)
        add(sentences, spec.test_month)

    keywords = [kw for theme in THEMES for kw in theme.keywords]
    return docs, keywords


def write_corpus(
    out_dir: str | Path, spec: SynthSpec = SynthSpec()
) -> tuple[Path, Path]:
    """Write ``corpus.jsonl`` and ``keywords.txt`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    docs, keywords = generate_corpus(spec)
    corpus_path = out_dir / "corpus.jsonl"
    with corpus_path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "text": doc.text,
                        "month": doc.month,
                        "source": doc.source,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    keywords_path = out_dir / "keywords.txt"
    keywords_path.write_text("\n".join(keywords) + "\n", encoding="utf-8")
    return corpus_path, keywords_path
