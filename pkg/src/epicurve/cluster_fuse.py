"""Feature fusion via K-means and Ward.D2 hierarchical clustering.

Fusion collapses a block of serially dependent numeric features (e.g.
left30..left70) into one categorical feature: each complete row is
assigned the index of its K-means cluster, rows with any NA get label 0.
Columns are standardized first so no single span dominates the distance.

Hierarchical clustering uses plain Euclidean distances between rows and
the Lance-Williams Ward.D2 update. The resulting binary merge tree gets
a deterministic 0/1 coding: at every internal node the child containing
the smaller original leaf index is the left (0) child, and a leaf's code
is its root-to-leaf path. The shared-prefix length of two codes is the
tree-distance similarity.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ComputationError


@dataclass(frozen=True)
class FusedFeature:
    """K-means labels of a feature block, plus the fit that produced them."""

    name: str
    source_columns: tuple[str, ...]
    k: int
    labels: np.ndarray  # per-row label in 0..k, 0 = row had NA
    centroids: np.ndarray  # (k, d) in standardized source space
    seed: int
    inertia: float


@dataclass(frozen=True)
class HCTree:
    """Binary merge tree; leaves 0..n-1, internal nodes n..2n-2.

    ``merges[m]`` = (node_id, left, right, height); child order already
    follows the smaller-min-leaf-goes-left rule.
    """

    leaf_labels: tuple[str, ...]
    merges: tuple[tuple[int, int, int, float], ...]

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_labels)

    @property
    def root(self) -> int:
        return self.merges[-1][0]

    def children(self) -> dict[int, tuple[int, int]]:
        return {node: (left, right) for node, left, right, _ in self.merges}


@dataclass(frozen=True)
class LeafCodes:
    """Per-leaf binary path codes and the common-prefix similarity matrix."""

    leaf_labels: tuple[str, ...]
    codes: tuple[str, ...]
    similarity: np.ndarray  # (n, n) ints
    leaf_order: tuple[int, ...]  # left-to-right traversal order


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[i] = x[rng.integers(n)]
        else:
            centroids[i] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int = 300):
    k = centroids.shape[0]
    labels = np.full(x.shape[0], -1)
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            mask = labels == c
            if mask.any():
                centroids[c] = x[mask].mean(axis=0)
            else:
                # re-seed an empty cluster at the point worst served so far
                worst = int(np.argmax(d2[np.arange(len(labels)), labels]))
                centroids[c] = x[worst]
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(labels)), labels].sum())
    return labels, centroids, inertia


def kmeans_fuse(
    matrix: np.ndarray,
    column_names: Sequence[str],
    name: str,
    k: int = 4,
    seed: int = 0,
    restarts: int = 100,
) -> FusedFeature:
    """Fuse the columns of ``matrix`` (rows = units, NaN = NA) into one
    k-category feature via repeated seeded k-means++ / Lloyd runs.

    The best restart by within-cluster sum of squares wins (ties to the
    lower restart index); labels are renumbered 1..k by ascending
    first-occurrence row index, NA rows get 0.
    """
    matrix = np.asarray(matrix, dtype=float)
    complete = ~np.isnan(matrix).any(axis=1)
    x = matrix[complete]
    if x.shape[0] < k:
        raise ComputationError(
            f"{name}: only {x.shape[0]} complete rows for k={k}"
        )
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    xs = (x - mean) / sd

    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        centroids = _kmeans_pp_init(xs, k, rng)
        labels, centroids, inertia = _lloyd(xs, centroids)
        if best is None or inertia < best[2] - 1e-12:
            best = (labels, centroids, inertia)
    labels, centroids, inertia = best

    # renumber clusters by first appearance so the labeling is canonical
    remap: dict[int, int] = {}
    for lab in labels:
        if int(lab) not in remap:
            remap[int(lab)] = len(remap) + 1
    for c in range(k):
        if c not in remap:
            remap[c] = len(remap) + 1
    new_labels = np.array([remap[int(l)] for l in labels])
    order = sorted(range(k), key=lambda c: remap[c])
    centroids = centroids[order]

    full = np.zeros(matrix.shape[0], dtype=int)
    full[complete] = new_labels
    return FusedFeature(
        name=name,
        source_columns=tuple(column_names),
        k=k,
        labels=full,
        centroids=centroids,
        seed=seed,
        inertia=inertia,
    )


def hcluster_ward(
    matrix: np.ndarray, leaf_labels: Sequence[str]
) -> tuple[HCTree, list[str]]:
    """Agglomerative Ward.D2 tree over the rows of ``matrix``.

    Initial dissimilarities are Euclidean distances; cluster distances
    follow the Lance-Williams Ward.D2 update on squared distances, and
    merge heights are the (unsquared) distances at which clusters join.
    Rows containing NaN are excluded and returned as the second element.
    Merge ties break on the smallest minimum original leaf index.
    """
    matrix = np.asarray(matrix, dtype=float)
    labels = list(leaf_labels)
    complete = ~np.isnan(matrix).any(axis=1)
    excluded = [labels[i] for i in range(len(labels)) if not complete[i]]
    x = matrix[complete]
    kept = [labels[i] for i in range(len(labels)) if complete[i]]
    n = x.shape[0]
    if n < 2:
        raise ComputationError(f"need at least 2 complete rows, got {n}")

    # squared Euclidean distances between active clusters, keyed by node id
    diff = x[:, None, :] - x[None, :, :]
    d2_init = (diff ** 2).sum(axis=2)
    d2: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            d2[(i, j)] = float(d2_init[i, j])

    size = {i: 1 for i in range(n)}
    min_leaf = {i: i for i in range(n)}
    active = set(range(n))
    merges = []
    prev_height = 0.0
    for step in range(n - 1):
        node = n + step
        best_key = None
        best = None
        for (i, j), v in d2.items():
            a, b = sorted((min_leaf[i], min_leaf[j]))
            key = (v, a, b)
            if best_key is None or key < best_key:
                best_key, best = key, (i, j)
        i, j = best
        height = float(np.sqrt(d2[(i, j)]))
        if height < prev_height - 1e-9:
            warnings.warn(
                f"Ward.D2 height inversion at merge {step}: "
                f"{height:.6g} < {prev_height:.6g}"
            )
        prev_height = max(prev_height, height)

        left, right = (i, j) if min_leaf[i] <= min_leaf[j] else (j, i)
        merges.append((node, left, right, height))

        dij = d2.pop((i, j))
        ni, nj = size[i], size[j]
        for kx in list(active - {i, j}):
            nk = size[kx]
            dik = d2.pop(tuple(sorted((i, kx))))
            djk = d2.pop(tuple(sorted((j, kx))))
            dnew = ((ni + nk) * dik + (nj + nk) * djk - nk * dij) / (ni + nj + nk)
            d2[tuple(sorted((kx, node)))] = dnew
        active -= {i, j}
        active.add(node)
        size[node] = ni + nj
        min_leaf[node] = min(min_leaf[i], min_leaf[j])

    return HCTree(leaf_labels=tuple(kept), merges=tuple(merges)), excluded


def leaf_codes(tree: HCTree) -> LeafCodes:
    """Binary path codes (left=0, right=1) and common-prefix similarity."""
    children = tree.children()
    codes: dict[int, str] = {}
    order: list[int] = []

    stack = [(tree.root, "")]
    while stack:
        node, prefix = stack.pop()
        if node in children:
            left, right = children[node]
            # push right first so left is visited first
            stack.append((right, prefix + "1"))
            stack.append((left, prefix + "0"))
        else:
            codes[node] = prefix
            order.append(node)

    n = tree.n_leaves
    code_list = tuple(codes[i] for i in range(n))
    sim = np.zeros((n, n), dtype=int)
    for u in range(n):
        sim[u, u] = len(code_list[u])
        for v in range(u + 1, n):
            a, b = code_list[u], code_list[v]
            m = 0
            for ca, cb in zip(a, b):
                if ca != cb:
                    break
                m += 1
            sim[u, v] = sim[v, u] = m
    return LeafCodes(
        leaf_labels=tree.leaf_labels,
        codes=code_list,
        similarity=sim,
        leaf_order=tuple(order),
    )


def similarity_csv(codes: LeafCodes) -> str:
    """Similarity matrix as CSV, rows/columns in tree leaf order."""
    order = codes.leaf_order
    names = [codes.leaf_labels[i] for i in order]
    lines = ["unit," + ",".join(names)]
    for i in order:
        row = [str(int(codes.similarity[i, j])) for j in order]
        lines.append(codes.leaf_labels[i] + "," + ",".join(row))
    return "\n".join(lines) + "\n"


def similarity_svg(codes: LeafCodes, cell: int = 12, label_space: int = 70) -> str:
    """Deterministic grayscale heatmap SVG in tree leaf order."""
    order = codes.leaf_order
    n = len(order)
    max_sim = max(1, int(codes.similarity.max()))
    width = label_space + n * cell + 10
    height = label_space + n * cell + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        '<style>text { font-family: monospace; font-size: 8px; }</style>',
    ]
    for r, i in enumerate(order):
        for c, j in enumerate(order):
            s = int(codes.similarity[i, j]) / max_sim
            shade = int(round(255 * (1.0 - s)))
            x = label_space + c * cell
            y = label_space + r * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{shade},{shade})"/>'
            )
    for r, i in enumerate(order):
        y = label_space + r * cell + cell - 2
        parts.append(
            f'<text x="2" y="{y}">{codes.leaf_labels[i]}</text>'
        )
        x = label_space + r * cell + 2
        parts.append(
            f'<text x="{x}" y="{label_space - 4}" '
            f'transform="rotate(-90 {x} {label_space - 4})">{codes.leaf_labels[i]}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def tree_csv(tree: HCTree) -> str:
    """Merge records as ``node_id,left_child,right_child,height`` lines."""
    lines = ["node_id,left_child,right_child,height"]
    for node, left, right, height in tree.merges:
        lines.append(f"{node},{left},{right},{height:.9f}")
    return "\n".join(lines) + "\n"


def root_partition(tree: HCTree) -> tuple[set[int], set[int]]:
    """Leaf index sets of the two subtrees under the root."""
    children = tree.children()

    def leaves(node: int) -> set[int]:
        if node not in children:
            return {node}
        l, r = children[node]
        return leaves(l) | leaves(r)

    left, right = children[tree.root]
    return leaves(left), leaves(right)
