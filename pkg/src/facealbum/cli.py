"""Command-line interface.

Subcommands mirror the pipeline stages: `run` executes everything, while
`cluster`, `refine`, `tag`, and `evaluate` expose individual stages for
composition, and `synth` generates labeled test albums.  Exit codes: 0 on
success, 1 on validation errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path

from .metrics import age_range_accuracy, evaluate
from .pipeline import (
    PipelineConfig,
    cluster_gallery,
    collapse_videos,
    fuse_cluster_attributes,
    load_config_file,
    report_to_json,
    run_pipeline,
)
from .records import (
    DatasetError,
    Partition,
    load_dataset,
    load_partition,
    save_dataset,
    save_partition,
)
from .refine import filter_date_span, filter_small, split_same_photo
from .synth import generate_synthetic_album

_FUSION_FLAG = {"vote": "simple_voting", "product": "product_rule", "expected": "expected_value"}
_AGE_MODE_FLAG = {"adience": "adience_bins", "within5": "within_5_years"}


def _add_config_flags(parser: argparse.ArgumentParser, clustering: bool = True) -> None:
    if clustering:
        parser.add_argument("--config", help="INI config file with a [pipeline] section")
        parser.add_argument("--method", choices=("hac", "rank-order"))
        parser.add_argument(
            "--linkage", choices=("single", "average", "complete", "weighted", "median")
        )
        parser.add_argument("--threshold", type=float, help="dendrogram cut threshold")
        parser.add_argument("--frame-stride", type=int)
        parser.add_argument("--clip-threshold", type=float)
        parser.add_argument("--rank-threshold", type=float)
        parser.add_argument("--norm-dist-threshold", type=float)
        parser.add_argument("--k-neighbors", type=int)
        parser.add_argument("--born-year-weight", type=float)
    parser.add_argument("--min-cluster-size", type=int)
    parser.add_argument("--min-span-days", type=int)
    parser.add_argument("--same-photo-penalty", type=float)
    parser.add_argument("--no-same-photo-split", action="store_true")
    parser.add_argument("--gender-fusion", choices=tuple(_FUSION_FLAG))
    parser.add_argument("--age-fusion", choices=tuple(_FUSION_FLAG))
    parser.add_argument("--top-l", type=int)
    parser.add_argument("--age-offset", type=int)


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, overridden by the config file, overridden by CLI flags."""
    overrides: dict = {}
    if getattr(args, "config", None):
        overrides.update(load_config_file(args.config))

    def put(key, value):
        if value is not None:
            overrides[key] = value

    put("method", getattr(args, "method", None) and args.method.replace("-", "_"))
    put("linkage", getattr(args, "linkage", None))
    put("cut_threshold", getattr(args, "threshold", None))
    put("frame_stride", getattr(args, "frame_stride", None))
    put("clip_threshold", getattr(args, "clip_threshold", None))
    put("rank_threshold", getattr(args, "rank_threshold", None))
    put("norm_dist_threshold", getattr(args, "norm_dist_threshold", None))
    put("k_neighbors", getattr(args, "k_neighbors", None))
    put("born_year_weight", getattr(args, "born_year_weight", None))
    put("min_cluster_size", getattr(args, "min_cluster_size", None))
    put("min_span_days", getattr(args, "min_span_days", None))
    put("same_photo_penalty", getattr(args, "same_photo_penalty", None))
    if getattr(args, "no_same_photo_split", False):
        overrides["same_photo_split"] = False
    gender = getattr(args, "gender_fusion", None)
    if gender:
        overrides["gender_fusion"] = _FUSION_FLAG[gender]
    age = getattr(args, "age_fusion", None)
    if age:
        overrides["age_fusion"] = _FUSION_FLAG[age]
    put("top_l", getattr(args, "top_l", None))
    put("age_offset", getattr(args, "age_offset", None))
    return PipelineConfig.from_flat_dict(overrides)


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).write_text(text + ("" if text.endswith("\n") else "\n"), "utf-8")


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    report = run_pipeline(args.input, config)
    _write_text(args.out, report_to_json(report, include_timings=args.include_timings))
    return 0


def _cmd_cluster(args) -> int:
    config = _config_from_args(args)
    dataset = load_dataset(args.input)
    gallery, dropped, track_members = collapse_videos(dataset, config)
    labels: dict[str, int] = {fid: -1 for fid in dropped}
    if len(gallery) > 0:
        partition, _ = cluster_gallery(gallery, config)
        for fid, lab in partition.labels.items():
            for member in track_members.get(fid, (fid,)):
                labels[member] = lab
    save_partition(Partition(labels=labels), args.out)
    return 0


def _cmd_refine(args) -> int:
    dataset = load_dataset(args.input)
    partition = load_partition(args.partition)
    base = PipelineConfig()
    if not args.no_same_photo_split:
        penalty = (
            args.same_photo_penalty
            if args.same_photo_penalty is not None
            else base.refine.same_photo_penalty
        )
        threshold = args.threshold if args.threshold is not None else base.cut_threshold
        partition = split_same_photo(partition, dataset, threshold, penalty)
    min_size = (
        args.min_cluster_size
        if args.min_cluster_size is not None
        else base.refine.min_cluster_size
    )
    partition = filter_small(partition, min_size)
    span = args.min_span_days if args.min_span_days is not None else base.refine.min_span_days
    partition = filter_date_span(partition, dataset, span)
    save_partition(partition, args.out)
    return 0


def _cmd_tag(args) -> int:
    config = _config_from_args(args)
    dataset = load_dataset(args.input)
    partition = load_partition(args.partition)
    index = {o.face_id: o for o in dataset.observations}
    missing = [fid for fid in partition.labels if fid not in index]
    if missing:
        raise DatasetError(f"partition references unknown face {missing[0]!r}")
    clusters = []
    members_of: dict[int, list] = {}
    for obs in dataset.observations:
        lab = partition.labels.get(obs.face_id, -1)
        if lab != -1:
            members_of.setdefault(lab, []).append(obs)
    for lab in sorted(members_of):
        attrs = fuse_cluster_attributes(members_of[lab], config)
        clusters.append(
            {
                "cluster_id": lab,
                "members": [o.face_id for o in members_of[lab]],
                "gender": attrs.gender,
                "gender_confidence": attrs.gender_confidence,
                "age_years": attrs.age_years,
                "born_year": attrs.born_year,
                "span_days": attrs.span_days,
                "member_count": attrs.member_count,
            }
        )
    _write_text(args.out, json.dumps({"clusters": clusters}, indent=2, sort_keys=True))
    return 0


def _cmd_evaluate(args) -> int:
    pred = load_partition(args.pred)
    truth = load_partition(args.truth)
    report = evaluate(pred, truth, unassigned=args.unassigned)
    doc = json.loads(report.to_json())
    if args.pred_ages or args.true_ages:
        if not (args.pred_ages and args.true_ages):
            raise ValueError("--pred-ages and --true-ages must be given together")
        pred_ages = json.loads(Path(args.pred_ages).read_text("utf-8"))
        true_ages = json.loads(Path(args.true_ages).read_text("utf-8"))
        doc["age_accuracy"] = age_range_accuracy(
            pred_ages, true_ages, _AGE_MODE_FLAG[args.age_mode]
        )
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_synth(args) -> int:
    dataset, truth = generate_synthetic_album(
        num_subjects=args.subjects,
        faces_per_subject=args.faces_per_subject,
        dim=args.dim,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        video_clips=args.video_clips,
        frames_per_clip=args.frames_per_clip,
        date_start=date.fromisoformat(args.date_start),
        span_days=args.span_days,
    )
    save_dataset(dataset, args.out)
    if args.truth_out:
        save_partition(truth, args.truth_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facealbum",
        description="Organize photo/video albums by face identity and tag "
        "each person with fused gender and born-year estimates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline: cluster, refine, tag")
    p_run.add_argument("--input", required=True, help="JSONL face dataset")
    p_run.add_argument("--out", help="report JSON path (default stdout)")
    p_run.add_argument("--include-timings", action="store_true")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_cluster = sub.add_parser("cluster", help="raw clustering only")
    p_cluster.add_argument("--input", required=True)
    p_cluster.add_argument("--out", required=True, help="partition JSON path")
    _add_config_flags(p_cluster)
    p_cluster.set_defaults(fn=_cmd_cluster)

    p_refine = sub.add_parser("refine", help="refine an existing partition")
    p_refine.add_argument("--input", required=True)
    p_refine.add_argument("--partition", required=True)
    p_refine.add_argument("--out", required=True)
    p_refine.add_argument("--threshold", type=float, help="re-cut threshold for the same-photo split")
    p_refine.add_argument("--min-cluster-size", type=int)
    p_refine.add_argument("--min-span-days", type=int)
    p_refine.add_argument("--same-photo-penalty", type=float)
    p_refine.add_argument("--no-same-photo-split", action="store_true")
    p_refine.set_defaults(fn=_cmd_refine)

    p_tag = sub.add_parser("tag", help="fuse attributes for clustered faces")
    p_tag.add_argument("--input", required=True)
    p_tag.add_argument("--partition", required=True)
    p_tag.add_argument("--out", help="attributes JSON path (default stdout)")
    _add_config_flags(p_tag, clustering=False)
    p_tag.set_defaults(fn=_cmd_tag)

    p_eval = sub.add_parser("evaluate", help="score a partition against ground truth")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.add_argument("--out", help="report JSON path (default stdout)")
    p_eval.add_argument("--unassigned", choices=("exclude", "singletons"), default="exclude")
    p_eval.add_argument("--pred-ages", help="JSON array of predicted ages")
    p_eval.add_argument("--true-ages", help="JSON array of true ages")
    p_eval.add_argument("--age-mode", choices=("adience", "within5"), default="adience")
    p_eval.set_defaults(fn=_cmd_evaluate)

    p_synth = sub.add_parser("synth", help="generate a labeled synthetic album")
    p_synth.add_argument("--subjects", type=int, required=True)
    p_synth.add_argument("--faces-per-subject", type=int, required=True)
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--truth-out")
    p_synth.add_argument("--dim", type=int, default=64)
    p_synth.add_argument("--noise-sigma", type=float, default=0.05)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--video-clips", type=int, default=0)
    p_synth.add_argument("--frames-per-clip", type=int, default=6)
    p_synth.add_argument("--date-start", default="2015-01-01")
    p_synth.add_argument("--span-days", type=int, default=730)
    p_synth.set_defaults(fn=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
