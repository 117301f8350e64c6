"""Video clip handling: frame sampling, within-clip clustering, and track
collapsing.

Faces detected across the frames of one clip are clustered inside that clip
first; each within-clip cluster becomes a single track whose embedding is
the renormalized mean of its members.  Tracks then enter the photo gallery
as ordinary observations, so a person appearing in a video costs one gallery
slot instead of hundreds.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .hac import CondensedDistanceMatrix, cut, linkage
from .records import Dataset, FaceObservation

# Skip renormalization when the mean is already unit length to this
# precision, so collapsing an existing track is byte-stable.
_NORM_SKIP_TOL = 1e-9


@dataclass(frozen=True)
class TrackRecord:
    """One within-clip cluster collapsed to a single synthetic face."""

    face_id: str
    media_id: str
    member_face_ids: tuple[str, ...]
    embedding: np.ndarray
    created_at: date
    age_posterior: np.ndarray | None = None
    gender_posterior: np.ndarray | None = None

    def __post_init__(self):
        members = tuple(self.member_face_ids)
        if not members:
            raise ValueError("track needs at least one member frame")
        object.__setattr__(self, "member_face_ids", members)
        emb = np.asarray(self.embedding, dtype=np.float64)
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)
        norm = float(np.linalg.norm(emb))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"track embedding not unit norm (norm {norm:.8f})")
        for name in ("age_posterior", "gender_posterior"):
            p = getattr(self, name)
            if p is not None:
                p = np.asarray(p, dtype=np.float64)
                p.setflags(write=False)
                if abs(float(p.sum()) - 1.0) > 1e-6 or np.any(p < 0):
                    raise ValueError(f"track {name} is not a probability vector")
                object.__setattr__(self, name, p)

    @property
    def frame_count(self) -> int:
        return len(self.member_face_ids)

    def to_observation(self) -> FaceObservation:
        return FaceObservation(
            face_id=self.face_id,
            media_id=self.media_id,
            media_kind="video",
            frame_index=0,
            created_at=self.created_at,
            embedding=self.embedding,
            age_posterior=self.age_posterior,
            gender_posterior=self.gender_posterior,
        )


def sample_frames(
    observations: Sequence[FaceObservation], stride: int
) -> list[FaceObservation]:
    """Keep only faces whose frame_index is a multiple of the stride."""
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    media_ids = {o.media_id for o in observations}
    if len(media_ids) > 1:
        raise ValueError(f"mixed media_ids in one clip: {sorted(media_ids)}")
    return [o for o in observations if o.frame_index % stride == 0]


def _mean_posterior(members: Sequence[FaceObservation], attr: str) -> np.ndarray | None:
    present = [getattr(o, attr) for o in members if getattr(o, attr) is not None]
    if not present:
        return None
    mean = np.mean(np.stack(present), axis=0)
    return mean / mean.sum()


def cluster_clip(
    observations: Sequence[FaceObservation], threshold: float
) -> list[TrackRecord]:
    """Average-linkage clustering of one clip's faces, collapsed to tracks.

    Observations are canonicalized by (frame_index, face_id) first, so the
    result is identical under any input permutation.
    """
    if not observations:
        raise ValueError("clip has no faces")
    media_ids = {o.media_id for o in observations}
    if len(media_ids) > 1:
        raise ValueError(f"mixed media_ids in one clip: {sorted(media_ids)}")
    media_id = observations[0].media_id

    ordered = sorted(observations, key=lambda o: (o.frame_index, o.face_id))
    if len(ordered) == 1:
        labels = [0]
    else:
        dist = CondensedDistanceMatrix(
            n=len(ordered),
            values=pdist(np.stack([o.embedding for o in ordered])),
        )
        flat = cut(linkage(dist, "average"), threshold)
        labels = [flat.labels[str(i)] for i in range(len(ordered))]

    tracks = []
    for lab in range(max(labels) + 1):
        members = [o for o, l in zip(ordered, labels) if l == lab]
        mean = np.mean(np.stack([o.embedding for o in members]), axis=0)
        norm = float(np.linalg.norm(mean))
        if norm == 0.0:
            raise ValueError(
                f"clip {media_id!r}: track mean embedding degenerates to zero"
            )
        if abs(norm - 1.0) > _NORM_SKIP_TOL:
            mean = mean / norm
        tracks.append(
            TrackRecord(
                face_id=f"{media_id}/track{lab}",
                media_id=media_id,
                member_face_ids=tuple(o.face_id for o in members),
                embedding=mean,
                created_at=min(o.created_at for o in members),
                age_posterior=_mean_posterior(members, "age_posterior"),
                gender_posterior=_mean_posterior(members, "gender_posterior"),
            )
        )
    return tracks


def merge_into_gallery(
    photos: Sequence[FaceObservation], tracks: Sequence[TrackRecord]
) -> Dataset:
    """Unified dataset of photo faces plus collapsed video tracks.

    Track member frames do not enter the gallery; only the collapsed record
    does.  Tracks are appended in (media_id, face_id) order so the gallery
    is deterministic regardless of clip processing order.
    """
    for obs in photos:
        if obs.media_kind != "photo":
            raise ValueError(f"non-photo face {obs.face_id!r} in photo list")
    ordered = sorted(tracks, key=lambda t: (t.media_id, t.face_id))
    return Dataset(
        observations=tuple(photos) + tuple(t.to_observation() for t in ordered)
    )
