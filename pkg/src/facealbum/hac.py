"""Hierarchical agglomerative clustering over condensed distance matrices.

Five linkage strategies (single, average, complete, weighted, median) are
implemented with Lance-Williams updates on a stored distance matrix, with
nearest-neighbor caching so typical albums cluster in roughly quadratic
time.  Median linkage operates on squared distances and reports square
roots; its dendrograms may contain inversions, which cut() tolerates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .records import Dataset, Partition

LINKAGE_KINDS = ("single", "average", "complete", "weighted", "median")

# Lance-Williams coefficients (alpha_i, alpha_j, beta, gamma) for the kinds
# whose alphas are constant; average depends on cluster sizes and is handled
# inline.
_LW_FIXED = {
    "single": (0.5, 0.5, 0.0, -0.5),
    "complete": (0.5, 0.5, 0.0, 0.5),
    "weighted": (0.5, 0.5, 0.0, 0.0),
    "median": (0.5, 0.5, -0.25, 0.0),
}


@dataclass(frozen=True)
class CondensedDistanceMatrix:
    """Upper-triangular pairwise distances in row-major condensed order."""

    n: int
    values: np.ndarray
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        expected = self.n * (self.n - 1) // 2
        if values.shape != (expected,):
            raise ValueError(
                f"condensed matrix for n={self.n} needs {expected} values, got {values.shape}"
            )
        if expected and not np.all(np.isfinite(values)):
            raise ValueError("distances must be finite")
        if expected and values.min() < 0:
            raise ValueError("distances must be nonnegative")
        if self.ids is not None:
            ids = tuple(self.ids)
            if len(ids) != self.n:
                raise ValueError(f"ids length {len(ids)} != n {self.n}")
            object.__setattr__(self, "ids", ids)

    def square(self) -> np.ndarray:
        return squareform(self.values) if self.n > 1 else np.zeros((self.n, self.n))


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Full merge history: leaves 0..n-1, internal nodes n..2n-2 in merge order."""

    n_leaves: int
    merges: tuple[Merge, ...]
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        merges = tuple(self.merges)
        object.__setattr__(self, "merges", merges)
        if len(merges) != self.n_leaves - 1:
            raise ValueError(f"{self.n_leaves} leaves need {self.n_leaves - 1} merges")
        sizes = {i: 1 for i in range(self.n_leaves)}
        used: set[int] = set()
        for step, m in enumerate(merges):
            node = self.n_leaves + step
            for child in (m.left, m.right):
                if child not in sizes:
                    raise ValueError(f"merge {step} references unknown node {child}")
                if child in used:
                    raise ValueError(f"node {child} merged twice")
                used.add(child)
            if m.height < 0:
                raise ValueError(f"merge {step} has negative height {m.height}")
            if m.size != sizes[m.left] + sizes[m.right]:
                raise ValueError(f"merge {step} size {m.size} inconsistent with children")
            sizes[node] = m.size

    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def to_json(self) -> str:
        return json.dumps(
            {"merges": [[m.left, m.right, m.height, m.size] for m in self.merges]}
        )


def pairwise_distances(
    dataset: Dataset,
    born_year_weight: float = 0.0,
    born_years: dict[str, float] | None = None,
) -> CondensedDistanceMatrix:
    """Euclidean distances between embeddings, optionally augmented with a
    born-year feature: entry(i,j) = sqrt(|x_i - x_j|^2 + w^2 (y_i - y_j)^2)
    with years scaled by 1/100 so the feature is commensurate with unit-norm
    embeddings.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if born_year_weight < 0:
        raise ValueError("born_year_weight must be nonnegative")
    ids = dataset.face_ids
    if len(dataset) == 1:
        return CondensedDistanceMatrix(n=1, values=np.zeros(0), ids=ids)
    sq = pdist(dataset.embedding_matrix(), "sqeuclidean")
    if born_year_weight > 0:
        if born_years is None:
            raise ValueError("born_year_weight > 0 requires born_years")
        missing = [fid for fid in ids if fid not in born_years]
        if missing:
            raise ValueError(f"born year missing for face {missing[0]!r}")
        years = np.array([[born_years[fid] / 100.0] for fid in ids])
        sq = sq + born_year_weight**2 * pdist(years, "sqeuclidean")
    return CondensedDistanceMatrix(n=len(dataset), values=np.sqrt(sq), ids=ids)


class _NNCache:
    """Per-cluster nearest-neighbor distance cache over the stored matrix."""

    __slots__ = ("dist", "partner")

    def __init__(self, n):
        self.dist = np.full(n, np.inf)
        self.partner = np.full(n, -1, dtype=np.int64)


def linkage(dist: CondensedDistanceMatrix, kind: str) -> Dendrogram:
    """Agglomerative merge sequence for the requested linkage kind.

    At every step the globally minimal pair of cluster distances is merged;
    exact ties go to the pair whose (min node id, max node id) is smallest.
    """
    if kind not in LINKAGE_KINDS:
        raise ValueError(f"unknown linkage kind {kind!r}")
    n = dist.n
    if n < 2:
        raise ValueError("linkage needs at least 2 items")

    D = dist.square()
    if kind == "median":
        D = D * D
    np.fill_diagonal(D, np.inf)

    node_of = np.arange(n)  # slot -> current node id
    sizes = np.ones(2 * n - 1, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    cache = _NNCache(n)
    slots = np.arange(n)
    for s in range(n):
        others = slots[slots != s]
        row = D[s, others]
        k = int(np.argmin(row))
        cache.dist[s] = row[k]
        cache.partner[s] = others[k]

    merges: list[Merge] = []
    for step in range(n - 1):
        act = np.flatnonzero(active)
        dmin = cache.dist[act].min()

        # All slots participating in a minimal pair have cached dist == dmin;
        # collect every such pair and apply the node-id tie-break.
        best = None
        best_slots = None
        for s in act[cache.dist[act] == dmin]:
            row = D[s, act]
            for t in act[row == dmin]:
                if t == s:
                    continue
                ia, ib = int(node_of[s]), int(node_of[t])
                key = (min(ia, ib), max(ia, ib))
                if best is None or key < best:
                    best = key
                    best_slots = (s, t) if ia < ib else (t, s)
        sa, sb = best_slots
        left, right = best

        new_id = n + step
        height = math.sqrt(max(dmin, 0.0)) if kind == "median" else dmin
        size = int(sizes[node_of[sa]] + sizes[node_of[sb]])
        merges.append(Merge(left=left, right=right, height=height, size=size))

        # Lance-Williams update into slot sa; slot sb retires.
        others = act[(act != sa) & (act != sb)]
        row_a = D[sa, others]
        row_b = D[sb, others]
        if kind == "average":
            ni, nj = float(sizes[node_of[sa]]), float(sizes[node_of[sb]])
            new_row = (ni * row_a + nj * row_b) / (ni + nj)
        elif kind == "single":
            # exact form of (1/2, 1/2, 0, -1/2): keeps ties bit-identical
            new_row = np.minimum(row_a, row_b)
        elif kind == "complete":
            new_row = np.maximum(row_a, row_b)
        else:
            ai, aj, beta, gamma = _LW_FIXED[kind]
            new_row = ai * row_a + aj * row_b + beta * dmin
            if gamma:
                new_row = new_row + gamma * np.abs(row_a - row_b)
            if kind == "median":
                # true value is a squared midpoint distance, nonnegative
                new_row = np.maximum(new_row, 0.0)
        D[sa, others] = new_row
        D[others, sa] = new_row
        active[sb] = False
        node_of[sa] = new_id
        sizes[new_id] = size

        if len(others) == 0:
            break
        # refresh caches: sa from scratch; others only if their cached
        # partner vanished or the fresh distance beats the cached one
        k = int(np.argmin(new_row))
        cache.dist[sa] = new_row[k]
        cache.partner[sa] = others[k]
        stale = others[
            (cache.partner[others] == sa) | (cache.partner[others] == sb)
        ]
        for s in stale:
            rest = others[others != s]
            if len(rest) == 0:
                cache.dist[s] = D[s, sa]
                cache.partner[s] = sa
                continue
            row = D[s, rest]
            k = int(np.argmin(row))
            if row[k] <= D[s, sa]:
                cache.dist[s] = row[k]
                cache.partner[s] = rest[k]
            else:
                cache.dist[s] = D[s, sa]
                cache.partner[s] = sa
        beat = new_row < cache.dist[others]
        cache.dist[others[beat]] = new_row[beat]
        cache.partner[others[beat]] = sa

    return Dendrogram(n_leaves=n, merges=tuple(merges), ids=dist.ids)


def cut(dendrogram: Dendrogram, threshold: float) -> Partition:
    """Flat clusters by severing every merge with height > threshold.

    Kept merges connect their node ids; leaves sharing a connected component
    share a cluster.  This remains well defined on median-linkage inversions
    (a kept merge above an unkept one contributes no spurious joins).  Labels
    are contiguous, ordered by each cluster's first leaf.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    n = dendrogram.n_leaves
    parent = list(range(2 * n - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, m in enumerate(dendrogram.merges):
        if m.height <= threshold:
            node = n + step
            for child in (m.left, m.right):
                ra, rb = find(child), find(node)
                if ra != rb:
                    parent[ra] = rb

    labels: dict[int, int] = {}
    out = []
    for leaf in range(n):
        root = find(leaf)
        if root not in labels:
            labels[root] = len(labels)
        out.append(labels[root])

    ids = dendrogram.ids if dendrogram.ids is not None else tuple(str(i) for i in range(n))
    return Partition.from_labels(ids, out)
