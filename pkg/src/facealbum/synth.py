"""Synthetic albums with known identity labels.

Subjects are random nonnegative unit vectors; their faces are noisy copies
clipped back to the nonnegative orthant and renormalized, mimicking the
nonnegative unit-norm geometry of real embedding models.  Ages and genders
follow from a per-subject born year and gender, rendered as peaked
posteriors, so fusion and born-year code paths can be exercised end to end.
"""

from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .records import Dataset, FaceObservation, Partition

_AGE_CLASSES = np.arange(100, dtype=np.float64)


def _peaked_age_posterior(true_age: int, sharpness: float = 2.5) -> np.ndarray:
    w = np.exp(-0.5 * ((_AGE_CLASSES - true_age) / sharpness) ** 2)
    return w / w.sum()


def _noisy_member(centroid: np.ndarray, sigma: float, rng) -> np.ndarray:
    if sigma == 0.0:
        return centroid.copy()
    v = np.clip(centroid + rng.normal(0.0, sigma, centroid.shape), 0.0, None)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return centroid.copy()
    return v / norm


def generate_synthetic_album(
    num_subjects: int,
    faces_per_subject: int,
    dim: int = 64,
    noise_sigma: float = 0.05,
    seed: int = 0,
    video_clips: int = 0,
    frames_per_clip: int = 6,
    date_start: date = date(2015, 1, 1),
    span_days: int = 730,
    with_posteriors: bool = True,
) -> tuple[Dataset, Partition]:
    """Deterministic synthetic album plus its ground-truth partition.

    Photo faces get unique media ids; each optional video clip picks one
    subject and contributes frames_per_clip frame faces sharing a media id.
    The truth partition labels every face (photo and frame alike) with its
    subject index.
    """
    if num_subjects < 1 or faces_per_subject < 1 or dim < 1:
        raise ValueError("num_subjects, faces_per_subject, and dim must be positive")
    if noise_sigma < 0 or span_days < 0 or video_clips < 0 or frames_per_clip < 1:
        raise ValueError("invalid generator parameter")

    rng = np.random.default_rng(seed)
    centroids = np.abs(rng.standard_normal((num_subjects, dim)))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    born_years = rng.integers(1950, 2011, size=num_subjects)
    genders = rng.integers(0, 2, size=num_subjects)

    observations: list[FaceObservation] = []
    labels: list[int] = []

    def make_face(face_id, media_id, media_kind, frame_index, subject, created=None):
        if created is None:
            created = date_start + timedelta(days=int(rng.integers(0, span_days + 1)))
        age = int(np.clip(created.year - born_years[subject], 0, 99))
        age_post = gender_post = None
        if with_posteriors:
            age_post = _peaked_age_posterior(age)
            peak = 0.7 + 0.25 * rng.random()
            gender_post = (
                np.array([peak, 1.0 - peak])
                if genders[subject] == 0
                else np.array([1.0 - peak, peak])
            )
        return FaceObservation(
            face_id=face_id,
            media_id=media_id,
            media_kind=media_kind,
            frame_index=frame_index,
            created_at=created,
            embedding=_noisy_member(centroids[subject], noise_sigma, rng),
            age_posterior=age_post,
            gender_posterior=gender_post,
        )

    photo_counter = 0
    for subject in range(num_subjects):
        for _ in range(faces_per_subject):
            observations.append(
                make_face(
                    f"face{photo_counter:05d}",
                    f"img{photo_counter:05d}",
                    "photo",
                    0,
                    subject,
                )
            )
            labels.append(subject)
            photo_counter += 1

    for clip in range(video_clips):
        subject = int(rng.integers(0, num_subjects))
        media_id = f"clip{clip:04d}"
        clip_date = date_start + timedelta(days=int(rng.integers(0, span_days + 1)))
        for frame in range(frames_per_clip):
            # all frames of one clip share the clip's date
            observations.append(
                make_face(
                    f"{media_id}f{frame:03d}",
                    media_id,
                    "video",
                    frame,
                    subject,
                    created=clip_date,
                )
            )
            labels.append(subject)

    dataset = Dataset(observations=tuple(observations))
    truth = Partition.from_labels(dataset.face_ids, labels)
    return dataset, truth
