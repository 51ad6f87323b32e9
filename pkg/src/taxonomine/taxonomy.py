"""Iterative hierarchy construction from a scored candidate pool.

Level 0 clusters the candidate sentences and writes one label per cluster;
every subsequent level re-embeds the previous level's label texts and
clusters those, so labels become progressively broader.  Construction stops
when a level yields fewer labels than ``min_labels`` (that level is kept),
when ``max_levels`` levels exist, or when a level fails outright.  A
synthetic root named by ``RunConfig.domain_label`` is added on top.

Node ids are ``L{level}.{index:04d}``; the root id is ``"root"``.  With soft
clustering off, inputs left as noise at some level have no parent above; the
whole subtree under such a node is pruned and the pruned ids are recorded in
the build log.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .clustering import (
    ClusterAssignment,
    PointSet,
    cluster_density,
    reduce_dimensions,
    soft_assign,
)
from .config import RunConfig
from .errors import LevelFailure, TaxonomyError
from .labeling import ClusterLabel, consolidate_labels, label_cluster
from .providers import Clients
from .selection import ScoredPool

logger = logging.getLogger(__name__)

SCHEMA = "taxonomy/v1"
ROOT_ID = "root"


def node_id(level: int, index: int) -> str:
    return f"L{level}.{index:04d}"


@dataclass
class TaxonomyNode:
    """One taxonomy entry.  Leaves (level 0) hold candidate sentence ids;
    inner nodes hold child node ids."""

    id: str
    level: int
    text: str
    parent: Optional[str] = None
    children: list[str] = field(default_factory=list)
    member_candidate_ids: tuple[str, ...] = ()

    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class Taxonomy:
    """A validated node forest with a single synthetic root."""

    nodes: dict[str, TaxonomyNode]
    root_id: str
    levels: int
    config_fingerprint: str = ""
    build_log: list[dict] = field(default_factory=list)

    @property
    def root(self) -> TaxonomyNode:
        return self.nodes[self.root_id]

    def level_nodes(self, level: int) -> list[TaxonomyNode]:
        out = [n for n in self.nodes.values() if n.level == level]
        out.sort(key=lambda n: n.id)
        return out

    def leaves(self) -> list[TaxonomyNode]:
        return self.level_nodes(0)

    def validate(self) -> None:
        """Structural checks: single root, parent/child consistency, level
        arithmetic, acyclicity, and non-empty leaf membership."""
        if self.root_id not in self.nodes:
            raise TaxonomyError(f"root id {self.root_id!r} missing from nodes")
        rootless = [n.id for n in self.nodes.values() if n.parent is None]
        if rootless != [self.root_id]:
            raise TaxonomyError(
                f"expected exactly one parentless node ({self.root_id!r}), "
                f"found {sorted(rootless)}"
            )
        seen: set[str] = set()
        stack = [self.root_id]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise TaxonomyError(f"cycle or duplicate reference at node {nid!r}")
            seen.add(nid)
            node = self.nodes.get(nid)
            if node is None:
                raise TaxonomyError(f"dangling child reference {nid!r}")
            for child_id in node.children:
                child = self.nodes.get(child_id)
                if child is None:
                    raise TaxonomyError(
                        f"node {nid!r} references missing child {child_id!r}"
                    )
                if child.parent != nid:
                    raise TaxonomyError(
                        f"child {child_id!r} does not point back to parent {nid!r}"
                    )
                if child.level != node.level - 1:
                    raise TaxonomyError(
                        f"child {child_id!r} at level {child.level} under "
                        f"{nid!r} at level {node.level}"
                    )
                stack.append(child_id)
        unreachable = set(self.nodes) - seen
        if unreachable:
            raise TaxonomyError(f"unreachable nodes: {sorted(unreachable)}")
        for node in self.nodes.values():
            if node.id == self.root_id:
                continue
            if node.level == 0 and not node.member_candidate_ids:
                raise TaxonomyError(f"leaf {node.id!r} has no member candidates")
            if node.level > 0 and not node.children:
                raise TaxonomyError(f"inner node {node.id!r} has no children")
        assigned: set[str] = set()
        for leaf in self.leaves():
            overlap = assigned.intersection(leaf.member_candidate_ids)
            if overlap:
                raise TaxonomyError(
                    f"candidates assigned to more than one leaf: {sorted(overlap)[:5]}"
                )
            assigned.update(leaf.member_candidate_ids)

    def label_texts(self, level: int) -> list[str]:
        return [n.text for n in self.level_nodes(level)]


# ---------------------------------------------------------------------------
# Level construction
# ---------------------------------------------------------------------------


def build_level(
    inputs: list[tuple[str, str]],
    cfg: RunConfig,
    clients: Clients,
    *,
    stats_out: Optional[dict] = None,
    points_out: Optional[list] = None,
) -> list[ClusterLabel]:
    """Cluster ``inputs`` (pairs of ``(input_id, text)``) and label every
    cluster, consolidating near-duplicate labels.

    Returns the consolidated labels, whose ``member_ids`` are input ids.
    Raises :class:`LevelFailure` when no cluster survives.  ``stats_out``
    receives per-level counters; ``points_out`` (a list) receives the
    ``(PointSet, ClusterAssignment)`` pair used, for later geometric
    evaluation.
    """
    if not inputs:
        raise LevelFailure("level received no inputs")
    ids = [pair[0] for pair in inputs]
    if len(set(ids)) != len(ids):
        raise TaxonomyError("duplicate input ids in level construction")
    texts = [pair[1] for pair in inputs]

    matrix = clients.primary_embedding.embed_matrix(texts)
    points = reduce_dimensions(matrix, target_dim=cfg.target_dim, ids=ids)
    assignment = cluster_density(points, min_cluster_size=cfg.min_cluster_size)
    if cfg.soft_clustering:
        assignment = soft_assign(points, assignment)
    if points_out is not None:
        points_out.append((points, assignment))

    cluster_ids = sorted(assignment.centroids)
    if not cluster_ids:
        raise LevelFailure(
            f"clustering left all {len(inputs)} inputs as noise; "
            "no cluster to label"
        )

    raw_labels: list[ClusterLabel] = []
    for cid in cluster_ids:
        member_idx = assignment.cluster_members(cid)
        member_texts = [texts[i] for i in member_idx]
        text = label_cluster(
            member_texts,
            clients.label,
            member_vectors=points.vectors[member_idx],
        )
        raw_labels.append(
            ClusterLabel(
                cluster_id=cid,
                text=text,
                member_ids=tuple(ids[i] for i in member_idx),
            )
        )

    consolidated = consolidate_labels(
        raw_labels,
        threshold=cfg.consolidate_threshold,
        embed=clients.primary_embedding,
        chat=clients.label,
    )

    noise_idx = np.flatnonzero(assignment.labels == -1)
    if stats_out is not None:
        stats_out.update(
            {
                "inputs": len(inputs),
                "clusters": len(cluster_ids),
                "labels": len(consolidated),
                "consolidated_away": len(raw_labels) - len(consolidated),
                "noise": int(noise_idx.size),
                "noise_input_ids": [ids[i] for i in noise_idx],
            }
        )
    return consolidated


# ---------------------------------------------------------------------------
# Full taxonomy construction
# ---------------------------------------------------------------------------


def build_taxonomy(
    pool: ScoredPool,
    cfg: RunConfig,
    clients: Clients,
    *,
    artifacts: Optional[list] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> Taxonomy:
    """Iterate :func:`build_level` from candidate sentences upward and attach
    a synthetic root.

    ``artifacts``, when given a list, receives one ``(PointSet,
    ClusterAssignment)`` pair per built level (for silhouette evaluation).
    A level-0 failure still returns a root-only taxonomy whose build log
    records the stop cause.
    """
    if not pool.candidates:
        raise TaxonomyError("cannot build a taxonomy from an empty pool")

    def note(msg: str) -> None:
        logger.info(msg)
        if progress is not None:
            progress(msg)

    level_inputs: list[tuple[str, str]] = [
        (c.id, c.sentence.text) for c in pool.candidates
    ]
    per_level_labels: list[list[ClusterLabel]] = []
    build_log: list[dict] = []
    stop_cause = None

    for level in range(cfg.max_levels):
        stats: dict = {"level": level}
        sink = artifacts if artifacts is not None else None
        try:
            labels = build_level(
                level_inputs, cfg, clients, stats_out=stats, points_out=sink
            )
        except LevelFailure as exc:
            stop_cause = f"level {level} failed: {exc}"
            stats["error"] = str(exc)
            build_log.append(stats)
            break
        build_log.append(stats)
        if per_level_labels and len(labels) > len(per_level_labels[-1]):
            raise TaxonomyError(
                f"level {level} grew from {len(per_level_labels[-1])} to "
                f"{len(labels)} labels; hierarchy must not widen upward"
            )
        per_level_labels.append(labels)
        note(
            f"level {level}: {stats['inputs']} inputs -> {stats['clusters']} "
            f"clusters -> {len(labels)} labels ({stats['noise']} noise)"
        )
        if len(labels) < cfg.min_labels:
            stop_cause = (
                f"level {level} produced {len(labels)} labels "
                f"(< min_labels {cfg.min_labels})"
            )
            break
        if level + 1 >= cfg.max_levels:
            stop_cause = f"reached max_levels {cfg.max_levels}"
            break
        level_inputs = [
            (node_id(level, i), lab.text) for i, lab in enumerate(labels)
        ]

    nodes: dict[str, TaxonomyNode] = {}
    for level, labels in enumerate(per_level_labels):
        for i, lab in enumerate(labels):
            nid = node_id(level, i)
            if level == 0:
                node = TaxonomyNode(
                    id=nid,
                    level=0,
                    text=lab.text,
                    member_candidate_ids=tuple(sorted(lab.member_ids)),
                )
            else:
                children = sorted(lab.member_ids)
                node = TaxonomyNode(
                    id=nid, level=level, text=lab.text, children=list(children)
                )
                for child_id in children:
                    nodes[child_id].parent = nid
            nodes[nid] = node

    top = len(per_level_labels)
    root = TaxonomyNode(id=ROOT_ID, level=top, text=cfg.domain_label)
    if per_level_labels:
        root.children = [
            node_id(top - 1, i) for i in range(len(per_level_labels[-1]))
        ]
        for child_id in root.children:
            nodes[child_id].parent = ROOT_ID
    nodes[ROOT_ID] = root

    pruned = _prune_orphans(nodes, ROOT_ID)
    if pruned:
        build_log.append({"pruned_orphan_subtrees": pruned})
        note(f"pruned {len(pruned)} orphan subtree nodes: {pruned[:8]}")
    build_log.append({"stop_cause": stop_cause or "exhausted configured levels"})

    taxonomy = Taxonomy(
        nodes=nodes,
        root_id=ROOT_ID,
        levels=len(per_level_labels),
        config_fingerprint=cfg.fingerprint(),
        build_log=build_log,
    )
    taxonomy.validate()
    return taxonomy


def _prune_orphans(nodes: dict[str, TaxonomyNode], root_id: str) -> list[str]:
    """Remove every subtree whose apex never got a parent (its inputs were
    noise at the next level up).  Returns the removed node ids, sorted."""
    orphan_roots = [
        nid for nid, node in nodes.items() if node.parent is None and nid != root_id
    ]
    removed: list[str] = []
    for apex in orphan_roots:
        stack = [apex]
        while stack:
            nid = stack.pop()
            node = nodes.pop(nid, None)
            if node is None:
                continue
            removed.append(nid)
            stack.extend(node.children)
    return sorted(removed)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _nested_dict(taxonomy: Taxonomy, nid: str) -> dict:
    node = taxonomy.nodes[nid]
    out: dict = {"id": node.id, "level": node.level, "text": node.text}
    if node.children:
        out["children"] = [_nested_dict(taxonomy, c) for c in node.children]
    if node.member_candidate_ids:
        out["members"] = list(node.member_candidate_ids)
    return out


def taxonomy_to_dict(taxonomy: Taxonomy) -> dict:
    return {
        "schema": SCHEMA,
        "levels": taxonomy.levels,
        "config_fingerprint": taxonomy.config_fingerprint,
        "build_log": taxonomy.build_log,
        "root": _nested_dict(taxonomy, taxonomy.root_id),
        "index": {
            nid: {"level": node.level, "parent": node.parent}
            for nid, node in sorted(taxonomy.nodes.items())
        },
    }


def taxonomy_json(taxonomy: Taxonomy, *, indent: Optional[int] = None) -> str:
    """Deterministic JSON of the nested hierarchy only (no index/log); this
    is the string evaluation prompts embed."""
    return json.dumps(
        _nested_dict(taxonomy, taxonomy.root_id), sort_keys=True, indent=indent
    )


def serialize_taxonomy(taxonomy: Taxonomy, path: str | Path) -> None:
    """Write the full taxonomy document; key order is sorted, so equal
    taxonomies serialize byte-identically."""
    path = Path(path)
    payload = json.dumps(taxonomy_to_dict(taxonomy), sort_keys=True, indent=2)
    path.write_text(payload + "\n", encoding="utf-8")


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Read and re-validate a serialized taxonomy.

    Malformed structure raises :class:`TaxonomyError` naming the JSON path of
    the offending node.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TaxonomyError(f"cannot read taxonomy {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise TaxonomyError(f"{path}: not a {SCHEMA} document")
    if "root" not in doc:
        raise TaxonomyError(f"{path}: missing 'root'")

    nodes: dict[str, TaxonomyNode] = {}

    def walk(obj: dict, parent: Optional[str], json_path: str) -> str:
        if not isinstance(obj, dict):
            raise TaxonomyError(f"{json_path}: node must be an object")
        for key in ("id", "level", "text"):
            if key not in obj:
                raise TaxonomyError(f"{json_path}: node missing {key!r}")
        nid = obj["id"]
        if not isinstance(nid, str) or not nid:
            raise TaxonomyError(f"{json_path}: node id must be a non-empty string")
        if nid in nodes:
            raise TaxonomyError(f"{json_path}: duplicate node id {nid!r}")
        if not isinstance(obj["level"], int) or isinstance(obj["level"], bool):
            raise TaxonomyError(f"{json_path}: level must be an integer")
        if not isinstance(obj["text"], str) or not obj["text"].strip():
            raise TaxonomyError(f"{json_path}: text must be a non-empty string")
        members = obj.get("members", [])
        if not isinstance(members, list) or any(
            not isinstance(m, str) for m in members
        ):
            raise TaxonomyError(f"{json_path}: members must be a list of strings")
        node = TaxonomyNode(
            id=nid,
            level=obj["level"],
            text=obj["text"],
            parent=parent,
            member_candidate_ids=tuple(members),
        )
        nodes[nid] = node
        children = obj.get("children", [])
        if not isinstance(children, list):
            raise TaxonomyError(f"{json_path}: children must be a list")
        for i, child in enumerate(children):
            child_id = walk(child, nid, f"{json_path}.children[{i}]")
            node.children.append(child_id)
        return nid

    root_id = walk(doc["root"], None, "root")
    taxonomy = Taxonomy(
        nodes=nodes,
        root_id=root_id,
        levels=int(doc.get("levels", nodes[root_id].level)),
        config_fingerprint=str(doc.get("config_fingerprint", "")),
        build_log=list(doc.get("build_log", [])),
    )
    taxonomy.validate()
    return taxonomy
