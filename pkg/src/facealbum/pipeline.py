"""End-to-end album organization: videos to tracks, tracks plus photos to a
gallery, gallery to clusters, clusters through refinement to tagged
identities.

Every stage is pure; this module owns ordering, configuration, and the
report format.  Reports serialize deterministically (timings are kept
in-memory and only written on request) so identical inputs and config yield
byte-identical output.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .fusion import (
    EXPECTED_VALUE,
    FUSION_KINDS,
    GENDER_NAMES,
    PRODUCT_RULE,
    SIMPLE_VOTING,
    FusionStrategy,
    expected_age,
    fuse_age,
    fuse_born_year,
    fuse_class_product,
    fuse_class_voting,
)
from .hac import LINKAGE_KINDS, cut, pairwise_distances
from .hac import linkage as hac_linkage
from .metrics import UNASSIGNED_POLICIES, bcubed
from .rank_order import rank_order_cluster
from .records import Dataset, FaceObservation, Partition, load_dataset
from .refine import RefineConfig, refine
from .tracks import cluster_clip, merge_into_gallery, sample_frames

METHODS = ("hac", "rank_order")


class PipelineError(ValueError):
    """Module error annotated with the pipeline stage it occurred in."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineConfig:
    method: str = "hac"
    linkage: str = "average"
    cut_threshold: float = 1.0
    frame_stride: int = 3
    clip_threshold: float | None = None
    refine: RefineConfig = field(default_factory=RefineConfig)
    same_photo_split: bool = True
    gender_fusion: str = PRODUCT_RULE
    age_fusion: str = EXPECTED_VALUE
    top_l: int = 3
    born_year_weight: float = 0.0
    age_offset: int = 0
    unassigned_policy: str = "exclude"
    rank_threshold: float = 12.0
    norm_dist_threshold: float = 1.1
    k_neighbors: int = 9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.linkage not in LINKAGE_KINDS:
            raise ValueError(f"unknown linkage {self.linkage!r}")
        if self.cut_threshold <= 0:
            raise ValueError("cut_threshold must be positive")
        if self.frame_stride < 1:
            raise ValueError("frame_stride must be a positive integer")
        if self.clip_threshold is not None and self.clip_threshold <= 0:
            raise ValueError("clip_threshold must be positive")
        if self.gender_fusion not in (PRODUCT_RULE, SIMPLE_VOTING):
            raise ValueError(f"gender_fusion must be vote or product, got {self.gender_fusion!r}")
        if self.age_fusion not in FUSION_KINDS:
            raise ValueError(f"unknown age_fusion {self.age_fusion!r}")
        if not 1 <= self.top_l <= 100:
            raise ValueError("top_l must be in 1..100")
        if self.born_year_weight < 0:
            raise ValueError("born_year_weight must be nonnegative")
        if self.unassigned_policy not in UNASSIGNED_POLICIES:
            raise ValueError(f"unknown unassigned policy {self.unassigned_policy!r}")
        if self.rank_threshold <= 0 or self.norm_dist_threshold <= 0:
            raise ValueError("rank-order thresholds must be positive")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be a positive integer")

    def to_flat_dict(self) -> dict:
        """Flat, serializable key/value view; round-trips via from_flat_dict."""
        return {
            "method": self.method,
            "linkage": self.linkage,
            "cut_threshold": self.cut_threshold,
            "frame_stride": self.frame_stride,
            "clip_threshold": self.clip_threshold,
            "min_cluster_size": self.refine.min_cluster_size,
            "min_span_days": self.refine.min_span_days,
            "same_photo_penalty": self.refine.same_photo_penalty,
            "same_photo_split": self.same_photo_split,
            "gender_fusion": self.gender_fusion,
            "age_fusion": self.age_fusion,
            "top_l": self.top_l,
            "born_year_weight": self.born_year_weight,
            "age_offset": self.age_offset,
            "unassigned_policy": self.unassigned_policy,
            "rank_threshold": self.rank_threshold,
            "norm_dist_threshold": self.norm_dist_threshold,
            "k_neighbors": self.k_neighbors,
        }

    @staticmethod
    def from_flat_dict(values: dict) -> "PipelineConfig":
        values = dict(values)
        base = PipelineConfig()
        refine_cfg = RefineConfig(
            min_cluster_size=int(
                values.pop("min_cluster_size", base.refine.min_cluster_size)
            ),
            min_span_days=int(values.pop("min_span_days", base.refine.min_span_days)),
            same_photo_penalty=float(
                values.pop("same_photo_penalty", base.refine.same_photo_penalty)
            ),
        )
        known = {
            "method": str,
            "linkage": str,
            "cut_threshold": float,
            "frame_stride": int,
            "clip_threshold": lambda v: None if v is None else float(v),
            "same_photo_split": bool,
            "gender_fusion": str,
            "age_fusion": str,
            "top_l": int,
            "born_year_weight": float,
            "age_offset": int,
            "unassigned_policy": str,
            "rank_threshold": float,
            "norm_dist_threshold": float,
            "k_neighbors": int,
        }
        kwargs = {}
        for key, conv in known.items():
            if key in values:
                kwargs[key] = conv(values.pop(key))
        if values:
            raise ValueError(f"unknown config keys: {sorted(values)}")
        return PipelineConfig(refine=refine_cfg, **kwargs)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_flat_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


_BOOL_STRINGS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def load_config_file(path: str | Path) -> dict:
    """Read `key = value` pairs from the [pipeline] section of an INI file."""
    parser = configparser.ConfigParser()
    with Path(path).open("r", encoding="utf-8") as fh:
        parser.read_file(fh)
    if not parser.has_section("pipeline"):
        raise ValueError(f"{path}: config file needs a [pipeline] section")
    out: dict = {}
    for key, raw in parser.items("pipeline"):
        value = raw.strip()
        if value.lower() in _BOOL_STRINGS:
            out[key] = _BOOL_STRINGS[value.lower()]
        elif value.lower() in ("none", ""):
            out[key] = None
        else:
            try:
                out[key] = int(value)
            except ValueError:
                try:
                    out[key] = float(value)
                except ValueError:
                    out[key] = value
    return out


def save_config_file(config: PipelineConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    parser.add_section("pipeline")
    for key, value in config.to_flat_dict().items():
        parser.set("pipeline", key, "none" if value is None else str(value))
    with Path(path).open("w", encoding="utf-8") as fh:
        parser.write(fh)


@dataclass(frozen=True)
class ClusterAttributes:
    """Fused per-identity attributes; fields are None when no member carries
    the relevant posterior."""

    gender: str | None
    gender_confidence: float | None
    age_years: float | None
    born_year: int | None
    span_days: int
    member_count: int


@dataclass(frozen=True)
class IdentityCluster:
    cluster_id: int
    members: tuple[str, ...]
    attributes: ClusterAttributes


@dataclass(frozen=True)
class AlbumReport:
    clusters: tuple[IdentityCluster, ...]
    unassigned: tuple[str, ...]
    config: dict
    config_hash: str
    counts: dict
    timings: dict


def report_to_dict(report: AlbumReport, include_timings: bool = False) -> dict:
    doc = {
        "config": report.config,
        "config_hash": report.config_hash,
        "counts": report.counts,
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "members": list(c.members),
                "attributes": {
                    "gender": c.attributes.gender,
                    "gender_confidence": c.attributes.gender_confidence,
                    "age_years": c.attributes.age_years,
                    "born_year": c.attributes.born_year,
                    "span_days": c.attributes.span_days,
                    "member_count": c.attributes.member_count,
                },
            }
            for c in report.clusters
        ],
        "unassigned": list(report.unassigned),
    }
    if include_timings:
        doc["timings"] = report.timings
    return doc


def report_to_json(report: AlbumReport, include_timings: bool = False) -> str:
    return json.dumps(report_to_dict(report, include_timings), indent=2, sort_keys=True)


def collapse_videos(dataset: Dataset, config: PipelineConfig):
    """Photos pass through; video faces are stride-sampled and collapsed to
    tracks per clip.  Returns (gallery, dropped frame ids, track membership)."""
    photos = [o for o in dataset.observations if o.media_kind == "photo"]
    clips: dict[str, list[FaceObservation]] = {}
    for obs in dataset.observations:
        if obs.media_kind == "video":
            clips.setdefault(obs.media_id, []).append(obs)

    tracks = []
    dropped: list[str] = []
    threshold = config.clip_threshold or config.cut_threshold
    for media_id in sorted(clips):
        members = clips[media_id]
        sampled = sample_frames(members, config.frame_stride)
        kept = {o.face_id for o in sampled}
        dropped.extend(o.face_id for o in members if o.face_id not in kept)
        if sampled:
            tracks.extend(cluster_clip(sampled, threshold))
    gallery = merge_into_gallery(photos, tracks)
    track_members = {t.face_id: t.member_face_ids for t in tracks}
    return gallery, dropped, track_members


def cluster_gallery(gallery: Dataset, config: PipelineConfig):
    """Distance computation plus flat clustering of the merged gallery.

    Returns (partition, distances).  With born_year_weight > 0 a preliminary
    expected-age pass turns every face's creation date into a born year used
    as an extra distance feature, which requires age posteriors throughout.
    """
    born_years = None
    if config.born_year_weight > 0:
        born_years = {}
        for obs in gallery.observations:
            if obs.age_posterior is None:
                raise PipelineError(
                    "distances",
                    f"born-year feature requires an age posterior on every face; "
                    f"{obs.face_id!r} has none",
                )
            age = expected_age(obs.age_posterior, config.top_l, config.age_offset)
            born_years[obs.face_id] = obs.created_at.year - age
    distances = pairwise_distances(gallery, config.born_year_weight, born_years)

    if len(gallery) == 1:
        return Partition(labels={gallery.observations[0].face_id: 0}), distances
    if config.method == "hac":
        partition = cut(hac_linkage(distances, config.linkage), config.cut_threshold)
    else:
        partition = rank_order_cluster(
            gallery,
            config.rank_threshold,
            config.norm_dist_threshold,
            config.k_neighbors,
        )
    return partition, distances


def fuse_cluster_attributes(
    members: list[FaceObservation],
    config: PipelineConfig,
    member_count: int | None = None,
) -> ClusterAttributes:
    """Fused gender, age, and born year for one cluster's observations."""
    gender = gender_confidence = None
    gender_posts = [o.gender_posterior for o in members if o.gender_posterior is not None]
    if gender_posts:
        if config.gender_fusion == PRODUCT_RULE:
            idx, gender_confidence = fuse_class_product(gender_posts)
        else:
            idx, gender_confidence = fuse_class_voting(gender_posts)
        gender = GENDER_NAMES[idx]

    age_years = born_year = None
    with_age = [o for o in members if o.age_posterior is not None]
    if with_age:
        strategy = FusionStrategy(kind=config.age_fusion, top_l=config.top_l)
        age_years = fuse_age(members, strategy, config.age_offset)
        per_obs = {
            o.face_id: fuse_age([o], strategy, config.age_offset) for o in with_age
        }
        born_year = fuse_born_year(with_age, per_obs)

    dates = [o.created_at for o in members]
    return ClusterAttributes(
        gender=gender,
        gender_confidence=gender_confidence,
        age_years=age_years,
        born_year=born_year,
        span_days=(max(dates) - min(dates)).days,
        member_count=member_count if member_count is not None else len(members),
    )


def run_pipeline(source, config: PipelineConfig | None = None) -> AlbumReport:
    """Full album run: load, collapse videos, cluster, refine, tag.

    source is a Dataset or a path to a JSONL dataset.  Module errors are
    re-raised as PipelineError with the failing stage named.
    """
    config = config or PipelineConfig()
    timings: dict[str, float] = {}

    def staged(stage, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except PipelineError:
            raise
        except ValueError as exc:
            raise PipelineError(stage, str(exc)) from exc
        timings[stage] = time.perf_counter() - start
        return result

    if isinstance(source, Dataset):
        dataset = source
    else:
        dataset = staged("load", load_dataset, source)

    gallery, dropped, track_members = staged("tracks", collapse_videos, dataset, config)

    def expand(fid: str):
        return track_members.get(fid, (fid,))

    if len(gallery) == 0:
        return AlbumReport(
            clusters=(),
            unassigned=tuple(dropped),
            config=config.to_flat_dict(),
            config_hash=config.config_hash(),
            counts={
                "input_faces": len(dataset),
                "gallery_items": 0,
                "clusters": 0,
                "unassigned_faces": len(dropped),
            },
            timings=timings,
        )

    raw, distances = staged("cluster", cluster_gallery, gallery, config)
    refined = staged(
        "refine",
        refine,
        raw,
        gallery,
        config.refine,
        config.cut_threshold,
        distances,
        config.same_photo_split,
    )

    start = time.perf_counter()
    by_label: dict[int, list[FaceObservation]] = {}
    for obs in gallery.observations:
        by_label.setdefault(refined.labels[obs.face_id], []).append(obs)

    clusters = []
    for lab in range(refined.num_clusters):
        members = by_label[lab]
        expanded: list[str] = []
        for obs in members:
            expanded.extend(expand(obs.face_id))
        try:
            attributes = fuse_cluster_attributes(members, config, len(expanded))
        except ValueError as exc:
            raise PipelineError("fusion", str(exc)) from exc
        clusters.append(
            IdentityCluster(
                cluster_id=lab, members=tuple(expanded), attributes=attributes
            )
        )

    unassigned = list(dropped)
    for obs in gallery.observations:
        if refined.labels[obs.face_id] == -1:
            unassigned.extend(expand(obs.face_id))
    timings["fusion"] = time.perf_counter() - start

    return AlbumReport(
        clusters=tuple(clusters),
        unassigned=tuple(unassigned),
        config=config.to_flat_dict(),
        config_hash=config.config_hash(),
        counts={
            "input_faces": len(dataset),
            "gallery_items": len(gallery),
            "clusters": refined.num_clusters,
            "unassigned_faces": len(unassigned),
        },
        timings=timings,
    )


def expanded_partition(report: AlbumReport) -> Partition:
    """The report's cluster assignment as a flat partition over input faces."""
    labels: dict[str, int] = {}
    for cluster in report.clusters:
        for fid in cluster.members:
            labels[fid] = cluster.cluster_id
    for fid in report.unassigned:
        labels[fid] = -1
    return Partition(labels=labels)


def tune_cut_threshold(
    dataset: Dataset,
    truth: Partition,
    linkage_kind: str = "average",
    tune_fraction: float = 0.1,
) -> float:
    """Pick a cut threshold on a held-out share of subjects.

    Whole subjects (not individual faces) are held out so the tuning split
    contains complete clusters; candidate thresholds are the midpoints
    between consecutive dendrogram heights on the split, scored by BCubed F
    against the split's ground truth.  Of equally good candidates the middle
    one is returned.
    """
    if not 0 < tune_fraction <= 1:
        raise ValueError("tune_fraction must be in (0, 1]")
    subjects = sorted({lab for lab in truth.labels.values() if lab != -1})
    if not subjects:
        raise ValueError("ground truth has no clusters")
    n_pick = max(1, round(tune_fraction * len(subjects)))
    chosen = set(subjects[:n_pick])

    sub_obs = [o for o in dataset.observations if truth.labels[o.face_id] in chosen]
    if len(sub_obs) < 2:
        raise ValueError("tuning split has fewer than 2 faces")
    sub_dataset = Dataset(observations=tuple(sub_obs))
    relabel = {lab: i for i, lab in enumerate(sorted(chosen))}
    sub_truth = Partition(
        labels={o.face_id: relabel[truth.labels[o.face_id]] for o in sub_obs}
    )

    dend = hac_linkage(pairwise_distances(sub_dataset), linkage_kind)
    heights = sorted(set(float(m.height) for m in dend.merges))
    candidates = []
    if heights[0] > 0:
        candidates.append(heights[0] / 2)
    for lo, hi in zip(heights, heights[1:]):
        mid = (lo + hi) / 2
        if mid > 0:
            candidates.append(mid)
    candidates.append(heights[-1] * 1.05 if heights[-1] > 0 else 1.0)

    scored = []
    for t in candidates:
        _, _, f = bcubed(cut(dend, t), sub_truth)
        scored.append((f, t))
    best = max(f for f, _ in scored)
    plateau = [t for f, t in scored if f >= best - 1e-12]
    return plateau[len(plateau) // 2]
