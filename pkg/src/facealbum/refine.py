"""Album-specific cluster refinement.

Three post-clustering passes: same-photo separation (two faces in one photo
cannot be the same person), minimum cluster size, and minimum date span.
The size and span filters never move faces between clusters; they only mark
whole clusters unassigned (label -1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .hac import CondensedDistanceMatrix, cut, linkage
from .records import Dataset, FaceObservation, Partition

DEFAULT_SAME_PHOTO_PENALTY = 1e6


@dataclass(frozen=True)
class RefineConfig:
    min_cluster_size: int = 4
    min_span_days: int = 0
    same_photo_penalty: float = DEFAULT_SAME_PHOTO_PENALTY

    def __post_init__(self):
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be a positive integer")
        if self.min_span_days < 0:
            raise ValueError("min_span_days must be nonnegative")
        if self.same_photo_penalty <= 0:
            raise ValueError("same_photo_penalty must be positive")


def _observation_index(dataset: Dataset) -> dict[str, tuple[int, FaceObservation]]:
    return {obs.face_id: (i, obs) for i, obs in enumerate(dataset.observations)}


def _ordered_clusters(partition: Partition, dataset: Dataset) -> dict[int, list[str]]:
    """Cluster label -> members in dataset order, labels ascending."""
    index = {obs.face_id: i for i, obs in enumerate(dataset.observations)}
    members: dict[int, list[str]] = {}
    for fid, lab in partition.labels.items():
        members.setdefault(lab, []).append(fid)
    for fids in members.values():
        fids.sort(key=lambda f: index[f])
    return {lab: members[lab] for lab in sorted(members)}


def split_same_photo(
    partition: Partition,
    dataset: Dataset,
    cut_threshold: float,
    penalty: float = DEFAULT_SAME_PHOTO_PENALTY,
    distances: CondensedDistanceMatrix | None = None,
) -> Partition:
    """Re-cluster every cluster with complete linkage after forcing faces
    that share a photo apart.

    Distances between two photo faces with the same media_id are replaced by
    the penalty; since complete linkage merges at the maximum pairwise
    distance, no cluster cut below the penalty can retain such a pair.
    Faces from the same video clip are exempt: distinct frames of one clip
    legitimately show one person.  Pass the gallery's precomputed distance
    matrix to re-cluster under the same geometry the clustering stage used.
    """
    if penalty <= cut_threshold:
        raise ValueError(
            f"penalty {penalty} must exceed cut threshold {cut_threshold}"
        )
    index = _observation_index(dataset)
    for fid in partition.labels:
        if fid not in index:
            raise ValueError(f"partition references unknown face {fid!r}")

    full = None
    if distances is not None:
        if distances.ids is None:
            raise ValueError("distance matrix must carry face ids")
        full = squareform(distances.values) if distances.n > 1 else np.zeros((1, 1))
        dist_pos = {fid: i for i, fid in enumerate(distances.ids)}
        unknown = [
            fid
            for fid, lab in partition.labels.items()
            if lab != -1 and fid not in dist_pos
        ]
        if unknown:
            raise ValueError(f"distance matrix lacks face {unknown[0]!r}")

    new_labels: dict[str, int] = {
        fid: -1 for fid, lab in partition.labels.items() if lab == -1
    }
    next_label = 0
    for _, members in _ordered_clusters(partition, dataset).items():
        if members and partition.labels[members[0]] == -1:
            continue
        if len(members) == 1:
            new_labels[members[0]] = next_label
            next_label += 1
            continue
        obs = [index[fid][1] for fid in members]
        if full is not None:
            rows = [dist_pos[fid] for fid in members]
            sub = full[np.ix_(rows, rows)].copy()
        else:
            sub = squareform(pdist(np.stack([o.embedding for o in obs])))
        for i in range(len(obs)):
            for j in range(i + 1, len(obs)):
                if (
                    obs[i].media_kind == "photo"
                    and obs[j].media_kind == "photo"
                    and obs[i].media_id == obs[j].media_id
                ):
                    sub[i, j] = sub[j, i] = penalty
        condensed = CondensedDistanceMatrix(n=len(obs), values=squareform(sub, checks=False))
        pieces = cut(linkage(condensed, "complete"), cut_threshold)
        sub_labels = [pieces.labels[str(i)] for i in range(len(obs))]
        for sub_lab in range(max(sub_labels) + 1):
            for fid, lab in zip(members, sub_labels):
                if lab == sub_lab:
                    new_labels[fid] = next_label
            next_label += 1
    return Partition(labels=new_labels)


def _relabel_keeping(partition: Partition, keep: set[int]) -> Partition:
    mapping = {lab: i for i, lab in enumerate(sorted(keep))}
    return Partition(
        labels={
            fid: mapping.get(lab, -1) if lab != -1 else -1
            for fid, lab in partition.labels.items()
        }
    )


def filter_small(partition: Partition, min_size: int) -> Partition:
    """Unassign every cluster with fewer than min_size members."""
    if min_size < 1:
        raise ValueError("min_size must be a positive integer")
    sizes: dict[int, int] = {}
    for lab in partition.labels.values():
        if lab != -1:
            sizes[lab] = sizes.get(lab, 0) + 1
    keep = {lab for lab, size in sizes.items() if size >= min_size}
    return _relabel_keeping(partition, keep)


def filter_date_span(
    partition: Partition, dataset: Dataset, min_span_days: int
) -> Partition:
    """Unassign clusters whose dates span fewer than min_span_days days,
    pruning incidental faces that only ever appear within a short burst."""
    if min_span_days < 0:
        raise ValueError("min_span_days must be nonnegative")
    index = _observation_index(dataset)
    dates: dict[int, list] = {}
    for fid, lab in partition.labels.items():
        if lab == -1:
            continue
        if fid not in index:
            raise ValueError(f"partition references unknown face {fid!r}")
        dates.setdefault(lab, []).append(index[fid][1].created_at)
    keep = {
        lab
        for lab, ds in dates.items()
        if (max(ds) - min(ds)).days >= min_span_days
    }
    return _relabel_keeping(partition, keep)


def refine(
    partition: Partition,
    dataset: Dataset,
    config: RefineConfig,
    cut_threshold: float,
    distances: CondensedDistanceMatrix | None = None,
    same_photo: bool = True,
) -> Partition:
    """Full refinement pass: same-photo split, then size, then span filter."""
    out = partition
    if same_photo:
        out = split_same_photo(
            out, dataset, cut_threshold, config.same_photo_penalty, distances
        )
    out = filter_small(out, config.min_cluster_size)
    out = filter_date_span(out, dataset, config.min_span_days)
    return out
