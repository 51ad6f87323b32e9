"""LLM distillation of clusters into labels, and similarity consolidation.

``label_cluster`` renders the bundled leaf-label prompt with a cluster's
member statements and extracts the single-line description the model returns
after the final ``Description:`` marker.  Clusters larger than
``PROMPT_MEMBER_CAP`` are represented by the members nearest the cluster
centroid to keep prompts bounded.

``consolidate_labels`` merges near-duplicate labels: labels form a graph
with an edge wherever pairwise cosine similarity exceeds the threshold, and
each connected component of two or more labels is replaced by one aggregated
label produced with the bundled aggregation prompt.  Freshly generated texts
are re-checked once — if new merges appear they are applied a single time,
with no fixpoint loop.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import LabelingError
from .providers import ChatClient, EmbeddingClient
from .prompts import LABEL_AGGREGATION, LEAF_LABEL, load_template, render

logger = logging.getLogger(__name__)

PROMPT_MEMBER_CAP = 30

_DESCRIPTION_MARKER = "Description:"


@dataclass(frozen=True)
class ClusterLabel:
    """A one-line description of a cluster and the items it covers."""

    cluster_id: int
    text: str
    member_ids: tuple[str, ...]
    consolidated_from: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.text or "\n" in self.text:
            raise LabelingError(
                f"label for cluster {self.cluster_id} must be non-empty single-line"
            )
        if not self.member_ids:
            raise LabelingError(f"label for cluster {self.cluster_id} has no members")


def sanitize_label(text: str) -> str:
    """Clean LLM output into a single tidy line.

    Strips leading list markers and surrounding quotes, collapses internal
    whitespace, and truncates at the first line break.
    """
    line = text.strip().splitlines()[0] if text.strip() else ""
    line = re.sub(r"^(?:[\-\*•·]\s*|\d+[\.\)]\s+)+", "", line.strip())
    line = line.strip().strip("\"'").strip()
    return re.sub(r"\s+", " ", line)


def extract_description(completion: str) -> Optional[str]:
    """Text after the final ``Description:`` marker, or None when absent."""
    idx = completion.rfind(_DESCRIPTION_MARKER)
    if idx < 0:
        return None
    tail = completion[idx + len(_DESCRIPTION_MARKER) :]
    cleaned = sanitize_label(tail)
    return cleaned or None


def select_representative(
    texts: Sequence[str],
    vectors: Optional[np.ndarray] = None,
    cap: int = PROMPT_MEMBER_CAP,
) -> list[str]:
    """Subsample texts for the prompt: the ``cap`` nearest the centroid.

    Without vectors the first ``cap`` texts are taken (deterministic on
    input order).
    """
    if len(texts) <= cap:
        return list(texts)
    if vectors is None:
        return list(texts[:cap])
    centroid = vectors.mean(axis=0)
    dists = np.linalg.norm(vectors - centroid, axis=1)
    order = np.argsort(dists, kind="stable")[:cap]
    return [texts[int(i)] for i in sorted(order)]


def _statements_block(texts: Sequence[str]) -> str:
    return repr(list(texts))


def _ask_description(prompt: str, chat: ChatClient, describe: str) -> str:
    completion = chat.complete(prompt)
    description = extract_description(completion)
    if description is None:
        logger.warning("%s: no Description marker; re-asking once", describe)
        completion = chat.complete(prompt)
        description = extract_description(completion)
    if description is None:
        raise LabelingError(f"{describe}: completion carries no Description marker")
    return description


def label_cluster(
    member_texts: Sequence[str],
    chat: ChatClient,
    *,
    member_vectors: Optional[np.ndarray] = None,
    template: Optional[str] = None,
) -> str:
    """Produce one label sentence for a cluster of member statements."""
    if not member_texts:
        raise LabelingError("label_cluster requires at least one member text")
    chosen = select_representative(member_texts, member_vectors)
    template = template if template is not None else load_template(LEAF_LABEL)
    prompt = render(template, CANDIDATES=_statements_block(chosen))
    return _ask_description(prompt, chat, "cluster labeling")


def _connected_components(n: int, edges: list[tuple[int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [groups[root] for root in sorted(groups)]


def _similarity_components(
    labels: Sequence[ClusterLabel],
    threshold: float,
    embed: EmbeddingClient,
) -> list[list[int]]:
    matrix = embed.embed_matrix([l.text for l in labels])
    sims = np.clip(matrix @ matrix.T, -1.0, 1.0)
    edges = [
        (i, j)
        for i in range(len(labels))
        for j in range(i + 1, len(labels))
        if sims[i, j] > threshold
    ]
    return _connected_components(len(labels), edges)


def _aggregate(
    component: list[ClusterLabel], chat: ChatClient, template: str
) -> ClusterLabel:
    prompt = render(template, LABELS=_statements_block([l.text for l in component]))
    text = _ask_description(prompt, chat, "label aggregation")
    member_ids = tuple(sorted(set(m for l in component for m in l.member_ids)))
    consolidated = tuple(
        sorted(
            set(
                sum(
                    (list(l.consolidated_from) or [l.cluster_id] for l in component),
                    [],
                )
            )
        )
    )
    return ClusterLabel(
        cluster_id=min(l.cluster_id for l in component),
        text=text,
        member_ids=member_ids,
        consolidated_from=consolidated,
    )


def consolidate_labels(
    labels: Sequence[ClusterLabel],
    threshold: float = 0.95,
    embed: Optional[EmbeddingClient] = None,
    chat: Optional[ChatClient] = None,
    *,
    template: Optional[str] = None,
) -> list[ClusterLabel]:
    """Merge connected components of near-duplicate labels.

    Components are taken under transitive closure of "pairwise cosine >
    threshold".  Singleton components pass through unchanged; larger ones are
    replaced by one aggregated label whose ``member_ids`` is the union and
    whose ``consolidated_from`` records the source cluster ids.  One
    post-merge re-check pass runs on the result.
    """
    if not labels:
        raise LabelingError("consolidate_labels requires at least one label")
    if embed is None or chat is None:
        raise LabelingError("consolidate_labels requires embed and chat clients")
    template = template if template is not None else load_template(LABEL_AGGREGATION)

    def one_pass(current: Sequence[ClusterLabel]) -> tuple[list[ClusterLabel], bool]:
        if len(current) < 2:
            return list(current), False
        components = _similarity_components(current, threshold, embed)
        merged_any = any(len(c) > 1 for c in components)
        if not merged_any:
            return list(current), False
        out = []
        for comp in components:
            group = [current[i] for i in comp]
            out.append(group[0] if len(group) == 1 else _aggregate(group, chat, template))
        return out, True

    first, merged = one_pass(labels)
    if not merged:
        return first
    second, merged_again = one_pass(first)
    if merged_again:
        logger.info("consolidation re-check merged additional labels (single extra pass)")
    return second
