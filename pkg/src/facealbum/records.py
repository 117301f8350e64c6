"""Core face-record types and dataset/partition serialization.

Every other part of the package works on these types: a face observation
(one detected face with its identity embedding and optional age/gender
posteriors), an immutable dataset of observations, and a flat partition
mapping face ids to cluster labels.  Datasets travel as JSONL, one face
per line; partitions as a single JSON object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

NUM_AGE_CLASSES = 100
NUM_GENDER_CLASSES = 2

# Embeddings must be unit length.  Norms within EMBEDDING_NORM_TOL are
# accepted as-is; deviations up to EMBEDDING_RENORM_TOL are treated as
# float serialization loss and silently renormalized; anything larger is
# rejected as genuinely unnormalized input.
EMBEDDING_NORM_TOL = 1e-6
EMBEDDING_RENORM_TOL = 1e-3
POSTERIOR_SUM_TOL = 1e-6

UNASSIGNED = -1

MEDIA_KINDS = ("photo", "video")


class DatasetError(ValueError):
    """Invalid face record, dataset file, or partition file."""


def _as_readonly(values: Iterable[float], dtype=np.float64) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _check_posterior(p: np.ndarray, expected_len: int, what: str) -> None:
    if p.ndim != 1 or p.shape[0] != expected_len:
        raise DatasetError(f"{what} must have length {expected_len}, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DatasetError(f"{what} contains non-finite values")
    if np.any(p < 0):
        raise DatasetError(f"{what} has negative entries")
    total = float(p.sum())
    if abs(total - 1.0) > POSTERIOR_SUM_TOL:
        raise DatasetError(f"{what} sums to {total:.8f}, expected 1 within {POSTERIOR_SUM_TOL}")


@dataclass(frozen=True, eq=False)
class FaceObservation:
    """One detected face: identity embedding plus provenance and attributes.

    The embedding must be unit Euclidean norm within 1e-6.  Posteriors are
    optional; when present they are probability vectors (nonnegative,
    summing to 1 within 1e-6) over 100 age classes or 2 gender classes
    (index 0 = female, index 1 = male).
    """

    face_id: str
    media_id: str
    media_kind: str
    frame_index: int
    created_at: date
    embedding: np.ndarray
    age_posterior: np.ndarray | None = None
    gender_posterior: np.ndarray | None = None
    bbox: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        if not self.face_id:
            raise DatasetError("face_id must be a non-empty string")
        if self.media_kind not in MEDIA_KINDS:
            raise DatasetError(f"media_kind must be one of {MEDIA_KINDS}, got {self.media_kind!r}")
        if self.frame_index < 0:
            raise DatasetError(f"frame_index must be nonnegative, got {self.frame_index}")
        if self.media_kind == "photo" and self.frame_index != 0:
            raise DatasetError(f"photo face {self.face_id!r} must have frame_index 0")
        object.__setattr__(self, "embedding", _as_readonly(self.embedding))
        if self.embedding.ndim != 1 or self.embedding.shape[0] == 0:
            raise DatasetError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(self.embedding)):
            raise DatasetError("embedding contains non-finite values")
        norm = float(np.linalg.norm(self.embedding))
        if abs(norm - 1.0) > EMBEDDING_NORM_TOL:
            raise DatasetError(f"embedding not normalized (norm {norm:.8f})")
        if self.age_posterior is not None:
            p = _as_readonly(self.age_posterior)
            _check_posterior(p, NUM_AGE_CLASSES, "age posterior")
            object.__setattr__(self, "age_posterior", p)
        if self.gender_posterior is not None:
            p = _as_readonly(self.gender_posterior)
            _check_posterior(p, NUM_GENDER_CLASSES, "gender posterior")
            object.__setattr__(self, "gender_posterior", p)
        if self.bbox is not None:
            bbox = tuple(int(v) for v in self.bbox)
            if len(bbox) != 4:
                raise DatasetError(f"bbox must have 4 entries, got {len(bbox)}")
            object.__setattr__(self, "bbox", bbox)

    @property
    def dim(self) -> int:
        return int(self.embedding.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, FaceObservation):
            return NotImplemented
        def _opt_eq(a, b):
            if a is None or b is None:
                return a is b
            return np.array_equal(a, b)
        return (
            self.face_id == other.face_id
            and self.media_id == other.media_id
            and self.media_kind == other.media_kind
            and self.frame_index == other.frame_index
            and self.created_at == other.created_at
            and np.array_equal(self.embedding, other.embedding)
            and _opt_eq(self.age_posterior, other.age_posterior)
            and _opt_eq(self.gender_posterior, other.gender_posterior)
            and self.bbox == other.bbox
        )

    def __hash__(self):
        return hash(self.face_id)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered, validated collection of face observations."""

    observations: tuple[FaceObservation, ...]
    dim: int | None = None

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        seen: set[str] = set()
        for o in obs:
            if o.face_id in seen:
                raise DatasetError(f"duplicate face_id {o.face_id!r}")
            seen.add(o.face_id)
        dims = {o.dim for o in obs}
        if len(dims) > 1:
            raise DatasetError(f"inconsistent embedding dimensions: {sorted(dims)}")
        if obs:
            actual = obs[0].dim
            if self.dim is not None and self.dim != actual:
                raise DatasetError(f"declared dim {self.dim} != actual dim {actual}")
            object.__setattr__(self, "dim", actual)

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.observations == other.observations

    @property
    def face_ids(self) -> tuple[str, ...]:
        return tuple(o.face_id for o in self.observations)

    def embedding_matrix(self) -> np.ndarray:
        """All embeddings stacked into an (n, D) array."""
        if not self.observations:
            return np.zeros((0, 0))
        return np.stack([o.embedding for o in self.observations])

    def get(self, face_id: str) -> FaceObservation:
        for o in self.observations:
            if o.face_id == face_id:
                return o
        raise KeyError(face_id)


@dataclass(frozen=True, eq=False)
class Partition:
    """Flat assignment of face ids to cluster labels.

    Non-negative labels must be contiguous integers starting at 0; the
    label -1 marks unassigned ("noise") faces and is excluded from
    num_clusters.
    """

    labels: Mapping[str, int]
    num_clusters: int = field(default=-1)

    def __post_init__(self):
        labels = dict(self.labels)
        object.__setattr__(self, "labels", labels)
        assigned = sorted({v for v in labels.values() if v != UNASSIGNED})
        if any(v < 0 for v in assigned):
            raise DatasetError("cluster labels must be >= 0 or the unassigned sentinel -1")
        if assigned != list(range(len(assigned))):
            raise DatasetError(f"cluster labels not contiguous from 0: {assigned}")
        k = len(assigned)
        if self.num_clusters not in (-1, k):
            raise DatasetError(f"declared num_clusters {self.num_clusters} != actual {k}")
        object.__setattr__(self, "num_clusters", k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return dict(self.labels) == dict(other.labels)

    def __len__(self) -> int:
        return len(self.labels)

    @staticmethod
    def from_labels(face_ids: Iterable[str], labels: Iterable[int]) -> "Partition":
        return Partition(labels=dict(zip(face_ids, (int(v) for v in labels))))

    def members(self) -> dict[int, list[str]]:
        """Cluster label -> member face ids, in insertion order."""
        out: dict[int, list[str]] = {}
        for fid, lab in self.labels.items():
            out.setdefault(lab, []).append(fid)
        return out


def _parse_record(obj: dict, line_no: int) -> FaceObservation:
    def _get(key, required=True):
        if key not in obj:
            if required:
                raise DatasetError(f"line {line_no}: missing field {key!r}")
            return None
        return obj[key]

    raw_embedding = _get("embedding")
    if not isinstance(raw_embedding, list) or not raw_embedding:
        raise DatasetError(f"line {line_no}: embedding must be a non-empty array")
    embedding = np.asarray(raw_embedding, dtype=np.float64)
    norm = float(np.linalg.norm(embedding))
    deviation = abs(norm - 1.0)
    if deviation > EMBEDDING_RENORM_TOL:
        raise DatasetError(f"line {line_no}: embedding not normalized (norm {norm:.8f})")
    if deviation > EMBEDDING_NORM_TOL:
        embedding = embedding / norm

    created_raw = _get("created_at")
    try:
        created = date.fromisoformat(created_raw)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"line {line_no}: bad created_at {created_raw!r}: {exc}") from None

    age_probs = obj.get("age_probs")
    gender_probs = obj.get("gender_probs")
    bbox = obj.get("bbox")
    try:
        return FaceObservation(
            face_id=str(_get("face_id")),
            media_id=str(_get("media_id")),
            media_kind=_get("media_kind"),
            frame_index=int(_get("frame_index")),
            created_at=created,
            embedding=embedding,
            age_posterior=None if age_probs is None else np.asarray(age_probs, dtype=np.float64),
            gender_posterior=None if gender_probs is None else np.asarray(gender_probs, dtype=np.float64),
            bbox=None if bbox is None else tuple(bbox),
        )
    except DatasetError as exc:
        raise DatasetError(f"line {line_no}: {exc}") from None


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate a JSONL face dataset.

    Any malformed line raises DatasetError naming the 1-based line number;
    no partially constructed dataset ever escapes.  An empty file yields
    an empty dataset with undefined dimension.
    """
    path = Path(path)
    observations: list[FaceObservation] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: malformed JSON: {exc}") from None
            if not isinstance(obj, dict):
                raise DatasetError(f"line {line_no}: expected a JSON object")
            observations.append(_parse_record(obj, line_no))
    return Dataset(observations=tuple(observations))


def observation_to_json(obs: FaceObservation) -> dict:
    return {
        "face_id": obs.face_id,
        "media_id": obs.media_id,
        "media_kind": obs.media_kind,
        "frame_index": obs.frame_index,
        "created_at": obs.created_at.isoformat(),
        "embedding": [float(v) for v in obs.embedding],
        "age_probs": None if obs.age_posterior is None else [float(v) for v in obs.age_posterior],
        "gender_probs": None if obs.gender_posterior is None else [float(v) for v in obs.gender_posterior],
        "bbox": None if obs.bbox is None else list(obs.bbox),
    }


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write a dataset as JSONL; load_dataset(save_dataset(x)) == x."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for obs in dataset.observations:
            fh.write(json.dumps(observation_to_json(obs)) + "\n")


def save_partition(partition: Partition, path: str | Path) -> None:
    path = Path(path)
    doc = {"num_clusters": partition.num_clusters, "labels": dict(partition.labels)}
    with path.open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_partition(path: str | Path) -> Partition:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: malformed partition JSON: {exc}") from None
    if not isinstance(doc, dict) or "labels" not in doc:
        raise DatasetError(f"{path}: partition file must be an object with a 'labels' field")
    labels = {str(k): int(v) for k, v in doc["labels"].items()}
    partition = Partition(labels=labels)
    declared = doc.get("num_clusters")
    if declared is not None and int(declared) != partition.num_clusters:
        raise DatasetError(
            f"{path}: declared num_clusters {declared} != actual {partition.num_clusters}"
        )
    return partition
