"""Shared builders for test fixtures.

Embeddings must be unit length, so geometric tests use points on the unit
circle: the chord length 2*sin(delta/2) grows monotonically with the angular
gap up to pi, which gives precise control over pairwise distances.
"""

from __future__ import annotations

import math
from datetime import date

import numpy as np

from facealbum.records import Dataset, FaceObservation

DEFAULT_DAY = date(2020, 1, 1)


def unit(values):
    vec = np.asarray(values, dtype=float)
    return vec / np.linalg.norm(vec)


def circle(theta):
    return np.array([math.cos(theta), math.sin(theta)])


def chord(delta):
    """Euclidean distance between unit-circle points separated by delta."""
    return 2.0 * math.sin(abs(delta) / 2.0)


def peaked(index, length=100, mass=0.9):
    p = np.full(length, (1.0 - mass) / (length - 1))
    p[index] = mass
    return p


def obs(
    face_id,
    embedding,
    media_id=None,
    media_kind="photo",
    frame_index=0,
    created_at=DEFAULT_DAY,
    age_posterior=None,
    gender_posterior=None,
    bbox=None,
):
    return FaceObservation(
        face_id=face_id,
        media_id=media_id if media_id is not None else f"img-{face_id}",
        media_kind=media_kind,
        frame_index=frame_index,
        created_at=created_at,
        embedding=unit(embedding),
        age_posterior=None if age_posterior is None else np.asarray(age_posterior, dtype=float),
        gender_posterior=None if gender_posterior is None else np.asarray(gender_posterior, dtype=float),
        bbox=bbox,
    )


def circle_dataset(thetas, prefix="f", **kwargs):
    return Dataset(
        tuple(obs(f"{prefix}{i}", circle(t), **kwargs) for i, t in enumerate(thetas))
    )


def day(year, month, dom):
    return date(year, month, dom)


def random_unit_rows(rng, n, dim):
    mat = rng.normal(size=(n, dim))
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def random_dataset(rng, n, dim=8, prefix="r"):
    rows = random_unit_rows(rng, n, dim)
    return Dataset(tuple(obs(f"{prefix}{i}", rows[i]) for i in range(n)))


def labels_of(partition, ids):
    return [partition.labels[i] for i in ids]


def as_sets(partition):
    """Cluster memberships as a set of frozensets, ignoring label values."""
    groups = {}
    for face_id, label in partition.labels.items():
        if label < 0:
            continue
        groups.setdefault(label, set()).add(face_id)
    return {frozenset(g) for g in groups.values()}


def unassigned_of(partition):
    return {i for i, lab in partition.labels.items() if lab < 0}


def only_unassigns(before, after):
    """True iff `after` only removed whole clusters, never moved or merged."""
    image = {}
    for fid, lab in before.labels.items():
        new = after.labels[fid]
        if lab == -1:
            if new != -1:
                return False
            continue
        if lab in image:
            if image[lab] != new:
                return False
        else:
            image[lab] = new
    assigned = [lab for lab in image.values() if lab != -1]
    return len(assigned) == len(set(assigned))


def gap_thresholds(heights):
    """Cut thresholds that avoid landing on a merge height.

    Comparing two linkage implementations at a threshold equal to a height is
    ill-posed: a last-ulp difference flips the cut.  Midpoints between
    distinct heights, plus points below and above the range, are safe.
    """
    hs = sorted(set(float(h) for h in heights))
    out = []
    if hs and hs[0] > 0:
        out.append(hs[0] / 2.0)
    for lo, hi in zip(hs, hs[1:]):
        if hi > lo:
            out.append((lo + hi) / 2.0)
    if hs:
        out.append(hs[-1] * 1.1 + 1e-6)
    else:
        out.append(1.0)
    return out
