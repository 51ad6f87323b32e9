"""Dimensionality reduction, density clustering with noise, soft reassignment.

The reducer is a deterministic principal-component projection: mean-centered
SVD, components ordered by decreasing variance, each component's sign fixed
so its largest-magnitude loading is positive.  Determinism is the point —
every downstream artifact becomes exactly reproducible.

The clusterer implements the HDBSCAN core pipeline from scratch:

1. core distance of each point = distance to its k-th nearest neighbor
   (k = ``min_cluster_size``, counting the point itself),
2. mutual-reachability distance ``max(core_i, core_j, d_ij)``,
3. minimum spanning tree of the mutual-reachability graph (dense Prim),
4. single-linkage hierarchy from the stably-sorted MST edges,
5. condensation of the hierarchy by minimum cluster size,
6. cluster extraction by excess of mass over the condensed tree.

Points in no selected cluster receive label -1 (noise).  Cluster ids are
densely renumbered 0..C-1 by decreasing size.  One documented special case:
when the condensed hierarchy contains no split at all (e.g. all points are
identical) and there are at least ``min_cluster_size`` points, the root is
selected as a single cluster instead of declaring everything noise.

``soft_assign`` optionally re-introduces noise points by Euclidean proximity
to cluster centroids; core labels and centroids are never altered.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ClusteringError

logger = logging.getLogger(__name__)

CORE = "core"
SOFT = "soft"
NOISE = "noise"


@dataclass
class PointSet:
    """Items with reduced coordinates."""

    ids: tuple
    vectors: np.ndarray
    original_dim: int

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2:
            raise ClusteringError("PointSet.vectors must be a 2-D matrix")
        if len(self.ids) != self.vectors.shape[0]:
            raise ClusteringError(
                f"PointSet has {len(self.ids)} ids but {self.vectors.shape[0]} vectors"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ClusteringError("PointSet.vectors contains non-finite entries")
        if self.vectors.shape[1] > self.original_dim:
            raise ClusteringError("reduced dimension exceeds original dimension")

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass
class ClusterAssignment:
    """Per-point labels (-1 = noise), membership kind, and cluster centroids."""

    labels: np.ndarray
    membership: tuple[str, ...]
    centroids: dict[int, np.ndarray]

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.membership) != self.labels.shape[0]:
            raise ClusteringError("membership length must match labels length")
        for kind, label in zip(self.membership, self.labels):
            if kind not in (CORE, SOFT, NOISE):
                raise ClusteringError(f"invalid membership kind {kind!r}")
            if kind == NOISE and label != -1:
                raise ClusteringError("noise membership requires label -1")
            if kind != NOISE and label == -1:
                raise ClusteringError("labeled points cannot have noise membership")

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def cluster_members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)


def reduce_dimensions(
    vectors: np.ndarray,
    target_dim: int = 10,
    ids: Optional[Sequence] = None,
) -> PointSet:
    """Project vectors onto their top principal components, deterministically.

    Inputs already at or below ``target_dim`` pass through unchanged.  If the
    data's rank is below ``target_dim``, the available components are used
    and the remaining coordinates are zero-padded, with a warning.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ClusteringError("reduce_dimensions expects an (n, d) matrix")
    n, d = X.shape
    if n < 2:
        raise ClusteringError("reduce_dimensions requires at least 2 points")
    if target_dim < 1:
        raise ClusteringError("target_dim must be >= 1")
    point_ids = tuple(ids) if ids is not None else tuple(range(n))
    if len(point_ids) != n:
        raise ClusteringError("ids length must match number of vectors")
    if d <= target_dim:
        return PointSet(ids=point_ids, vectors=X.copy(), original_dim=d)

    mean = X.mean(axis=0)
    centered = X - mean
    # SVD of the centered data: rows of Vt are principal axes ordered by
    # decreasing singular value (= decreasing explained variance).
    _, s, Vt = np.linalg.svd(centered, full_matrices=False)
    tol = s[0] * max(n, d) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    k = min(target_dim, rank)
    components = Vt[:k]
    # canonical sign: largest-|loading| entry of each component is positive
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    projected = centered @ components.T
    if k < target_dim:
        logger.warning(
            "input rank %d below target_dim %d; padding %d zero dimensions",
            rank,
            target_dim,
            target_dim - k,
        )
        projected = np.hstack([projected, np.zeros((n, target_dim - k))])
    return PointSet(ids=point_ids, vectors=projected, original_dim=d)


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix."""
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    D = np.sqrt(d2)
    np.fill_diagonal(D, 0.0)
    return D


def _prim_mst(W: np.ndarray) -> list[tuple[int, int, float]]:
    """Minimum spanning tree of a dense symmetric weight matrix.

    Returns n-1 edges (u, v, weight) in the deterministic order Prim's
    algorithm discovers them, starting from vertex 0.
    """
    n = W.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    best[0] = 0.0
    edges: list[tuple[int, int, float]] = []
    for _ in range(n):
        masked = np.where(in_tree, np.inf, best)
        u = int(np.argmin(masked))
        in_tree[u] = True
        if parent[u] >= 0:
            edges.append((int(parent[u]), u, float(best[u])))
        row = W[u]
        improve = (~in_tree) & (row < best)
        best[improve] = row[improve]
        parent[improve] = u
    return edges


def _single_linkage(edges: list[tuple[int, int, float]], n: int) -> np.ndarray:
    """Single-linkage merge table from MST edges.

    Row t describes merge ``n + t``: (left child id, right child id,
    distance, merged size).  Edges are processed in stable order of
    increasing weight.
    """
    weights = np.array([w for (_, _, w) in edges])
    order = np.argsort(weights, kind="stable")
    uf_parent = np.arange(n, dtype=np.int64)

    def find(x: int) -> int:
        root = x
        while uf_parent[root] != root:
            root = uf_parent[root]
        while uf_parent[x] != root:
            uf_parent[x], x = root, uf_parent[x]
        return root

    cluster_of = np.arange(n, dtype=np.int64)  # representative -> linkage id
    sizes = np.ones(2 * n - 1, dtype=np.int64)
    table = np.zeros((n - 1, 4), dtype=np.float64)
    for t, edge_idx in enumerate(order):
        u, v, w = edges[edge_idx]
        ru, rv = find(u), find(v)
        lu, lv = int(cluster_of[ru]), int(cluster_of[rv])
        new_id = n + t
        sizes[new_id] = sizes[lu] + sizes[lv]
        table[t] = (lu, lv, w, sizes[new_id])
        uf_parent[rv] = ru
        cluster_of[ru] = new_id
    return table


def _condense_tree(
    linkage: np.ndarray, n: int, min_cluster_size: int
) -> list[tuple[int, int, float, int]]:
    """Condense a single-linkage hierarchy by minimum cluster size.

    Returns rows (parent, child, lambda, child_size) where ids < n are
    points and ids >= n are condensed clusters; the root cluster has id n.
    Walking top-down: a split where both sides reach ``min_cluster_size``
    creates two new clusters; smaller sides fall out as individual points at
    the split's lambda = 1/distance.
    """
    root = 2 * n - 2
    if n == 1:
        return []
    relabel = np.full(root + 1, -1, dtype=np.int64)
    relabel[root] = n
    next_label = n + 1
    visited = np.zeros(root + 1, dtype=bool)
    out: list[tuple[int, int, float, int]] = []

    def node_size(node: int) -> int:
        return 1 if node < n else int(linkage[node - n, 3])

    def leaves_under(node: int) -> list[int]:
        stack, pts = [node], []
        while stack:
            cur = stack.pop()
            visited[cur] = True
            if cur < n:
                pts.append(cur)
            else:
                stack.append(int(linkage[cur - n, 0]))
                stack.append(int(linkage[cur - n, 1]))
        return pts

    bfs = [root]
    head = 0
    while head < len(bfs):
        node = bfs[head]
        head += 1
        if node < n or visited[node]:
            continue
        visited[node] = True
        left, right = int(linkage[node - n, 0]), int(linkage[node - n, 1])
        dist = float(linkage[node - n, 2])
        lam = 1.0 / dist if dist > 0.0 else math.inf
        left_size, right_size = node_size(left), node_size(right)
        label_here = int(relabel[node])
        if left_size >= min_cluster_size and right_size >= min_cluster_size:
            relabel[left] = next_label
            out.append((label_here, next_label, lam, left_size))
            next_label += 1
            relabel[right] = next_label
            out.append((label_here, next_label, lam, right_size))
            next_label += 1
            bfs.extend((left, right))
        elif left_size < min_cluster_size and right_size < min_cluster_size:
            for point in leaves_under(left):
                out.append((label_here, point, lam, 1))
            for point in leaves_under(right):
                out.append((label_here, point, lam, 1))
        elif left_size < min_cluster_size:
            relabel[right] = label_here
            for point in leaves_under(left):
                out.append((label_here, point, lam, 1))
            bfs.append(right)
        else:
            relabel[left] = label_here
            for point in leaves_under(right):
                out.append((label_here, point, lam, 1))
            bfs.append(left)
    return out


def _stabilities(
    condensed: list[tuple[int, int, float, int]], n: int
) -> dict[int, float]:
    """Stability of each condensed cluster: sum of (lambda - birth) * size."""
    births: dict[int, float] = {}
    for parent, child, lam, _size in condensed:
        if child >= n:
            births[child] = lam
    stability: dict[int, float] = {}
    for parent, child, lam, size in condensed:
        birth = births.get(parent, 0.0)
        stability[parent] = stability.get(parent, 0.0) + (lam - birth) * size
    for parent, child, _lam, _size in condensed:
        if child >= n:
            stability.setdefault(child, 0.0)
    return stability


def _excess_of_mass(
    condensed: list[tuple[int, int, float, int]],
    stability: dict[int, float],
    n: int,
) -> set[int]:
    """Excess-of-mass cluster selection over the condensed tree (root excluded)."""
    children_of: dict[int, list[int]] = {}
    for parent, child, _lam, _size in condensed:
        if child >= n:
            children_of.setdefault(parent, []).append(child)
    cluster_nodes = sorted(
        (c for c in stability if c != n), reverse=True
    )
    is_cluster = {c: True for c in cluster_nodes}
    stab = dict(stability)
    for node in cluster_nodes:
        subtree = sum(stab[c] for c in children_of.get(node, []))
        if subtree > stab[node]:
            is_cluster[node] = False
            stab[node] = subtree
        else:
            # select this node; deselect every descendant cluster
            stack = list(children_of.get(node, []))
            while stack:
                sub = stack.pop()
                is_cluster[sub] = False
                stack.extend(children_of.get(sub, []))
    return {c for c, keep in is_cluster.items() if keep}


def _label_points(
    condensed: list[tuple[int, int, float, int]],
    selected: set[int],
    n: int,
) -> np.ndarray:
    """Assign each point to its lowest selected ancestor cluster, else noise."""
    up: dict[int, int] = {}
    for parent, child, _lam, _size in condensed:
        if child >= n and child not in selected:
            up[child] = parent

    def find(c: int) -> int:
        while c in up:
            c = up[c]
        return c

    labels = np.full(n, -1, dtype=np.int64)
    for parent, child, _lam, _size in condensed:
        if child < n:
            anchor = find(parent)
            if anchor in selected:
                labels[child] = anchor
    return labels


def cluster_density(points: PointSet, min_cluster_size: int = 5) -> ClusterAssignment:
    """HDBSCAN-style density clustering with excess-of-mass extraction."""
    if min_cluster_size < 2:
        raise ClusteringError("min_cluster_size must be >= 2")
    n = len(points)
    if n == 0:
        return ClusterAssignment(
            labels=np.empty(0, dtype=np.int64), membership=(), centroids={}
        )
    if n < min_cluster_size:
        logger.warning(
            "only %d points for min_cluster_size %d; everything is noise",
            n,
            min_cluster_size,
        )
        return ClusterAssignment(
            labels=np.full(n, -1, dtype=np.int64),
            membership=tuple(NOISE for _ in range(n)),
            centroids={},
        )
    X = points.vectors
    D = pairwise_distances(X)
    core = np.sort(D, axis=1)[:, min_cluster_size - 1]
    mreach = np.maximum(D, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, 0.0)
    edges = _prim_mst(mreach)
    linkage = _single_linkage(edges, n)
    condensed = _condense_tree(linkage, n, min_cluster_size)
    stability = _stabilities(condensed, n)
    selected = _excess_of_mass(condensed, stability, n)
    has_real_clusters = any(child >= n for (_p, child, _l, _s) in condensed)
    if not selected and not has_real_clusters:
        # Degenerate hierarchy (no split ever reaches two viable sides, e.g.
        # all-identical inputs): treat the root as one cluster rather than
        # calling every point noise.
        selected = {n}
    raw_labels = _label_points(condensed, selected, n)
    return _finalize_assignment(X, raw_labels)


def _finalize_assignment(X: np.ndarray, raw_labels: np.ndarray) -> ClusterAssignment:
    """Renumber clusters by decreasing size and compute centroids."""
    ids, counts = np.unique(raw_labels[raw_labels >= 0], return_counts=True)
    order = sorted(zip(ids, counts), key=lambda ic: (-ic[1], ic[0]))
    remap = {int(old): new for new, (old, _c) in enumerate(order)}
    labels = np.array(
        [remap[int(l)] if l >= 0 else -1 for l in raw_labels], dtype=np.int64
    )
    membership = tuple(CORE if l >= 0 else NOISE for l in labels)
    centroids = {
        c: X[labels == c].mean(axis=0) for c in range(len(remap))
    }
    return ClusterAssignment(labels=labels, membership=membership, centroids=centroids)


def soft_assign(points: PointSet, assignment: ClusterAssignment) -> ClusterAssignment:
    """Give each noise point the label of its nearest cluster centroid.

    Core members and centroids are unchanged; reassigned points get
    membership ``soft``.  With no clusters present this is a no-op with a
    warning.  Nearest-centroid ties resolve to the lowest cluster id.
    """
    if assignment.n_clusters == 0:
        logger.warning("soft_assign: no clusters available; assignment unchanged")
        return assignment
    noise_idx = np.flatnonzero(assignment.labels == -1)
    if noise_idx.size == 0:
        return assignment
    cluster_ids = sorted(assignment.centroids)
    centroid_matrix = np.vstack([assignment.centroids[c] for c in cluster_ids])
    labels = assignment.labels.copy()
    membership = list(assignment.membership)
    vectors = points.vectors[noise_idx]
    # distances: |noise| x |clusters|; argmin returns the first (= lowest id)
    d2 = (
        np.sum(vectors * vectors, axis=1)[:, None]
        + np.sum(centroid_matrix * centroid_matrix, axis=1)[None, :]
        - 2.0 * vectors @ centroid_matrix.T
    )
    nearest = np.argmin(d2, axis=1)
    for pos, idx in enumerate(noise_idx):
        labels[idx] = cluster_ids[int(nearest[pos])]
        membership[idx] = SOFT
    return ClusterAssignment(
        labels=labels, membership=tuple(membership), centroids=assignment.centroids
    )
