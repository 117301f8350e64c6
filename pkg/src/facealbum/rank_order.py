"""Rank-order distance clustering.

The rank-order distance between two faces is computed from the positions
each face's neighbors occupy in the other's exact nearest-neighbor list.
Clusters are grown by repeatedly merging every pair that is close both in
rank-order distance and in locally normalized Euclidean distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .records import Dataset, Partition

DEFAULT_K_NEIGHBORS = 9


@dataclass(frozen=True)
class NeighborTable:
    """Exact neighbor orderings for a set of points.

    order[a] lists the other n-1 ids sorted by ascending Euclidean distance
    to a (ties by ascending id); rank[a][b] is b's 1-based position in that
    list, with rank[a][a] = 0 (every item is its own zeroth neighbor).
    """

    order: np.ndarray
    rank: np.ndarray
    euclid: np.ndarray

    def __post_init__(self):
        for name in ("order", "rank", "euclid"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.rank.shape[0]


def build_neighbor_table(points: np.ndarray) -> NeighborTable:
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    euclid = squareform(np.sqrt(pdist(points, "sqeuclidean"))) if n > 1 else np.zeros((n, n))
    ids = np.arange(n)
    order = np.empty((n, max(n - 1, 0)), dtype=np.int64)
    rank = np.zeros((n, n), dtype=np.int64)
    for a in range(n):
        others = ids[ids != a]
        # lexsort: primary key distance, secondary ascending id
        perm = np.lexsort((others, euclid[a, others]))
        order[a] = others[perm]
        rank[a, order[a]] = np.arange(1, n)
    return NeighborTable(order=order, rank=rank, euclid=euclid)


def rank_order_distance(a: int, b: int, table: NeighborTable) -> float:
    """D(a,b) = (d(a,b) + d(b,a)) / min(O_a(b), O_b(a)) where d(a,b) sums,
    over a itself and a's neighbors out to b, each one's rank in b's list."""
    if a == b:
        raise ValueError("rank-order distance requires two distinct items")
    rank, order = table.rank, table.order

    def asym(x, y):
        return int(rank[y, x]) + int(rank[y, order[x, : rank[x, y]]].sum())

    return (asym(a, b) + asym(b, a)) / min(int(rank[a, b]), int(rank[b, a]))


def rank_order_matrix(table: NeighborTable) -> np.ndarray:
    """All pairwise rank-order distances, one cumulative-sum pass per row."""
    n = table.n
    rank, order = table.rank, table.order
    asym = np.zeros((n, n))
    rows = np.arange(n)
    for a in range(n):
        # csum[b, r] = sum of the first r+1 of a's neighbors' ranks in b's list
        csum = np.cumsum(rank[:, order[a]], axis=1)
        idx = rank[a] - 1
        asym[a] = rank[:, a] + csum[rows, idx]
        asym[a, a] = 0.0
    sym = asym + asym.T
    denom = np.minimum(rank, rank.T).astype(np.float64)
    np.fill_diagonal(denom, 1.0)
    out = sym / denom
    np.fill_diagonal(out, 0.0)
    return out


def rank_order_cluster(
    dataset: Dataset,
    rank_threshold: float,
    norm_dist_threshold: float,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
) -> Partition:
    """Merge-until-stable clustering under dual thresholds.

    Starting from singletons, every cluster pair whose minimum cross-pair
    rank-order distance is below rank_threshold and whose minimum cross-pair
    Euclidean distance, normalized by the mean K-nearest-neighbor distance
    over the union, is below norm_dist_threshold gets merged; rounds repeat
    until nothing qualifies.
    """
    n = len(dataset)
    if n < 2:
        raise ValueError("rank-order clustering needs at least 2 faces")
    if rank_threshold <= 0 or norm_dist_threshold <= 0:
        raise ValueError("thresholds must be positive")
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be positive")

    table = build_neighbor_table(dataset.embedding_matrix())
    ro = rank_order_matrix(table)
    euclid = table.euclid
    k = min(k_neighbors, n - 1)
    knn_mean = euclid[np.arange(n)[:, None], table.order[:, :k]].mean(axis=1)

    clusters = [[i] for i in range(n)]
    while True:
        qualifying = []
        for x in range(len(clusters)):
            cx = clusters[x]
            for y in range(x + 1, len(clusters)):
                cy = clusters[y]
                block_ro = ro[np.ix_(cx, cy)].min()
                if block_ro >= rank_threshold:
                    continue
                min_euclid = euclid[np.ix_(cx, cy)].min()
                union = cx + cy
                phi = knn_mean[union].mean()
                norm_dist = 0.0 if phi == 0.0 else min_euclid / phi
                if norm_dist < norm_dist_threshold:
                    qualifying.append((x, y))
        if not qualifying:
            break
        root = list(range(len(clusters)))

        def find(i):
            while root[i] != i:
                root[i] = root[root[i]]
                i = root[i]
            return i

        for x, y in qualifying:
            rx, ry = find(x), find(y)
            if rx != ry:
                root[max(rx, ry)] = min(rx, ry)
        regrouped: dict[int, list[int]] = {}
        for i, members in enumerate(clusters):
            regrouped.setdefault(find(i), []).extend(members)
        clusters = [sorted(regrouped[key]) for key in sorted(regrouped)]

    clusters.sort(key=min)
    labels = [0] * n
    for lab, members in enumerate(clusters):
        for m in members:
            labels[m] = lab
    return Partition.from_labels(dataset.face_ids, labels)
