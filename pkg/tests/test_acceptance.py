"""Acceptance gate: the release-blocking guarantees, checked end to end.

One test per criterion.  Each prints a single ``ACCEPTANCE <name>: PASS``
or ``... FAIL`` line with measured evidence (deviations, counts, wall time)
straight to the terminal, bypassing capture, so a full run always shows one
verdict per criterion.  All checks are oracle-based: from-scratch linkage
recomputation, definitional metric counting, direct product arithmetic.

Trend checks against real labeled albums need data this repository does not
ship and live outside this synthetic gate.
"""

import random
from collections import Counter
from datetime import date, timedelta
from statistics import fmean
from time import perf_counter

import numpy as np
from scipy.spatial.distance import pdist, squareform

from facealbum.fusion import PROB_FLOOR, expected_age, fuse_class_product
from facealbum.hac import (
    LINKAGE_KINDS,
    CondensedDistanceMatrix,
    cut,
    linkage,
    pairwise_distances,
)
from facealbum.metrics import (
    adjusted_mutual_information,
    adjusted_rand_index,
    bcubed,
    homogeneity_completeness,
)
from facealbum.pipeline import (
    PipelineConfig,
    expanded_partition,
    run_pipeline,
    tune_cut_threshold,
)
from facealbum.records import Dataset, Partition
from facealbum.refine import filter_date_span, filter_small, split_same_photo
from facealbum.synth import generate_synthetic_album
from facealbum.tracks import cluster_clip

from common import obs, only_unassigns, random_unit_rows, gap_thresholds
from oracles import (
    all_partitions,
    canonical_labels,
    oracle_ami,
    oracle_ari,
    oracle_bcubed,
    oracle_cut_labels,
    oracle_homogeneity_completeness,
    recompute_linkage,
)


def _verdict(capfd, name, problems, detail):
    status = "PASS" if not problems else "FAIL"
    if problems:
        detail = f"{detail}; " + "; ".join(problems[:3])
    line = f"ACCEPTANCE {name}: {status} ({detail})"
    with capfd.disabled():
        print(line, flush=True)
    assert not problems, line


def test_linkage_matches_recompute_oracle(capfd):
    """200 random datasets, every linkage kind, against per-step recomputation.

    Heights must agree within 1e-9 and flat cuts must agree up to relabeling;
    thresholds sit in gaps between merge heights so a last-ulp difference
    cannot flip a comparison.
    """
    rng = np.random.default_rng(20240817)
    start = perf_counter()
    problems = []
    max_height_dev = 0.0
    cut_checks = 0
    for case in range(200):
        n = int(rng.integers(2, 65))
        d = int(rng.integers(1, 17))
        pts = rng.normal(size=(n, d))
        cond = pdist(pts)
        square = squareform(cond)
        for kind in LINKAGE_KINDS:
            expect = recompute_linkage(square, kind, points=pts)
            dendro = linkage(CondensedDistanceMatrix(n=n, values=cond), kind)
            got_heights = np.asarray(dendro.heights())
            want_heights = np.asarray([h for _, _, h, _ in expect])
            dev = float(np.max(np.abs(got_heights - want_heights)))
            max_height_dev = max(max_height_dev, dev)
            if dev > 1e-9:
                problems.append(f"case {case} {kind}: height dev {dev:.3e}")
            ts = gap_thresholds(dendro.heights())
            for idx in sorted({0, len(ts) // 4, len(ts) // 2, len(ts) - 1}):
                t = ts[idx]
                flat = cut(dendro, t)
                got = canonical_labels([flat.labels[str(i)] for i in range(n)])
                if got != oracle_cut_labels(expect, n, t):
                    problems.append(f"case {case} {kind}: cut at {t:.6f} differs")
                cut_checks += 1
    elapsed = perf_counter() - start
    if elapsed >= 60.0:
        problems.append(f"runtime {elapsed:.1f}s exceeds 60s")
    _verdict(
        capfd,
        "linkage-oracle",
        problems,
        f"200 datasets x {len(LINKAGE_KINDS)} kinds, max height dev "
        f"{max_height_dev:.2e}, {cut_checks} cut checks, {elapsed:.1f}s",
    )


def test_synthetic_recovery_with_tuned_threshold(capfd):
    """Average linkage recovers 20 subjects x 10 faces at noise 0.05.

    The threshold is tuned per seed on a 10% subject split; the bar is mean
    ARI and mean BCubed F of at least 0.95 across 20 seeds.
    """
    start = perf_counter()
    aris = []
    fscores = []
    for seed in range(20):
        ds, truth = generate_synthetic_album(
            20, 10, dim=64, noise_sigma=0.05, seed=seed
        )
        threshold = tune_cut_threshold(ds, truth, "average", 0.1)
        flat = cut(linkage(pairwise_distances(ds), "average"), threshold)
        aris.append(adjusted_rand_index(flat, truth))
        fscores.append(bcubed(flat, truth)[2])
    elapsed = perf_counter() - start
    problems = []
    if fmean(aris) < 0.95:
        problems.append(f"mean ARI {fmean(aris):.4f} < 0.95")
    if fmean(fscores) < 0.95:
        problems.append(f"mean BCubed F {fmean(fscores):.4f} < 0.95")
    if elapsed >= 30.0:
        problems.append(f"runtime {elapsed:.1f}s exceeds 30s")
    _verdict(
        capfd,
        "synthetic-recovery",
        problems,
        f"20 seeds, mean ARI {fmean(aris):.4f} (min {min(aris):.4f}), "
        f"mean BCubed F {fmean(fscores):.4f} (min {min(fscores):.4f}), "
        f"{elapsed:.1f}s",
    )


def _contingency_signature(a, b):
    # Every metric checked here is a function of the contingency table alone,
    # so pairs sharing a table (up to row/column order) share all values.
    joint = Counter(zip(a, b))
    rows = Counter(a)
    cols = Counter(b)
    cells = tuple(sorted((nij, rows[x], cols[y]) for (x, y), nij in joint.items()))
    return (tuple(sorted(rows.values())), tuple(sorted(cols.values())), cells)


def _check_metric_pair(a, b, pa, pb, problems, tag):
    hom, com = homogeneity_completeness(pa, pb)
    o_hom, o_com = oracle_homogeneity_completeness(a, b)
    bp, br, bf = bcubed(pa, pb)
    o_bp, o_br, o_bf = oracle_bcubed(a, b)
    checks = (
        ("ari", adjusted_rand_index(pa, pb), oracle_ari(a, b)),
        ("ami", adjusted_mutual_information(pa, pb), oracle_ami(a, b)),
        ("homogeneity", hom, o_hom),
        ("completeness", com, o_com),
        ("bcubed precision", bp, o_bp),
        ("bcubed recall", br, o_br),
        ("bcubed f", bf, o_bf),
    )
    dev = 0.0
    for name, got, want in checks:
        d = abs(got - want)
        dev = max(dev, d)
        if d > 1e-9:
            problems.append(f"{tag} {name}: {got!r} vs oracle {want!r}")
    if canonical_labels(a) == canonical_labels(b):
        for name, got, _ in checks:
            if got != 1.0:
                problems.append(f"{tag} identical partitions, {name} {got!r} != 1.0")
    return dev


def test_metrics_match_definitional_oracles(capfd):
    """Every metric equals its brute-force definition on all pairs up to n=7.

    n <= 6 is evaluated pair by pair.  At n = 7 the 877^2 pairs are
    deduplicated by contingency table first (all these metrics factor
    through it); 2000 randomly drawn pairs are then evaluated in full to
    guard against any dependence on label numbering the dedup could hide.
    """
    start = perf_counter()
    problems = []
    total_pairs = 0
    evaluated = 0
    max_dev = 0.0
    seven = None
    for n in range(2, 8):
        labellists = list(all_partitions(n))
        ids = [str(i) for i in range(n)]
        partitions = [Partition.from_labels(ids, lab) for lab in labellists]
        dedupe = n == 7
        if dedupe:
            seven = (labellists, partitions)
        seen = set()
        for i, a in enumerate(labellists):
            for j, b in enumerate(labellists):
                total_pairs += 1
                if dedupe:
                    sig = _contingency_signature(a, b)
                    if sig in seen:
                        continue
                    seen.add(sig)
                evaluated += 1
                max_dev = max(
                    max_dev,
                    _check_metric_pair(
                        a, b, partitions[i], partitions[j], problems, f"n={n}"
                    ),
                )
    labellists, partitions = seven
    rng = np.random.default_rng(7)
    for _ in range(2000):
        i = int(rng.integers(len(labellists)))
        j = int(rng.integers(len(labellists)))
        evaluated += 1
        max_dev = max(
            max_dev,
            _check_metric_pair(
                labellists[i],
                labellists[j],
                partitions[i],
                partitions[j],
                problems,
                "n=7 spot",
            ),
        )
    elapsed = perf_counter() - start
    _verdict(
        capfd,
        "metric-oracles",
        problems,
        f"{total_pairs} pairs over n<=7, {evaluated} full evaluations, "
        f"max |impl - oracle| {max_dev:.2e}, {elapsed:.1f}s",
    )


def test_product_rule_equals_log_sum_argmax(capfd):
    """Summing logs picks the same class as multiplying probabilities."""
    rng = np.random.default_rng(41)
    disagreements = 0
    for trial in range(10_000):
        m = int(rng.integers(1, 11))
        n_classes = 2 if trial % 2 == 0 else 100
        frames = rng.dirichlet(np.ones(n_classes), size=m)
        direct = int(np.argmax(np.prod(np.maximum(frames, PROB_FLOOR), axis=0)))
        winner, _ = fuse_class_product(list(frames))
        if winner != direct:
            disagreements += 1
    problems = []
    if disagreements:
        problems.append(f"{disagreements} argmax disagreements")
    _verdict(
        capfd,
        "product-vs-log-argmax",
        problems,
        "10000 posterior tuples, M<=10, N in {2,100}, "
        f"{disagreements} disagreements",
    )


def test_expected_age_reductions(capfd):
    """Top-1 expected age is the argmax age; top-100 is the full expectation.

    The worked three-class example (0.5, 0.3, 0.2 on ages 30..32) must come
    out as 30.7; the sum is evaluated at 1e-12 because that decimal has no
    exact binary representation.
    """
    rng = np.random.default_rng(52)
    problems = []
    worst_full = 0.0
    for _ in range(1000):
        p = rng.dirichlet(np.full(100, 0.35))
        top1 = expected_age(p, 1)
        argmax_age = float(np.argmax(p))
        if top1 != argmax_age:
            problems.append(f"L=1 {top1!r} != argmax {argmax_age!r}")
        full = expected_age(p, 100)
        want = float(np.arange(100.0) @ p) / float(p.sum())
        dev = abs(full - want)
        worst_full = max(worst_full, dev)
        if dev > 1e-12:
            problems.append(f"L=100 dev {dev:.3e}")
    p = np.zeros(100)
    p[30], p[31], p[32] = 0.5, 0.3, 0.2
    example = expected_age(p, 3)
    if abs(example - 30.7) > 1e-12 or round(example, 1) != 30.7:
        problems.append(f"worked example {example!r}")
    _verdict(
        capfd,
        "expected-age",
        problems,
        f"L=1 exact on 1000 draws, L=100 max dev {worst_full:.2e}, "
        f"worked example {example!r}",
    )


def test_same_photo_split_guarantee(capfd):
    """No refined cluster keeps two photo faces from the same photo."""
    rng = np.random.default_rng(63)
    problems = []
    violations = 0
    clusters_seen = 0
    for _ in range(1000):
        n = int(rng.integers(2, 33))
        rows = random_unit_rows(rng, n, 6)
        n_media = max(1, n // 3)
        observations = []
        for i in range(n):
            m = int(rng.integers(n_media))
            if rng.random() < 0.25:
                observations.append(
                    obs(
                        f"f{i}",
                        rows[i],
                        media_id=f"clip{m}.mp4",
                        media_kind="video",
                        frame_index=i,
                    )
                )
            else:
                observations.append(obs(f"f{i}", rows[i], media_id=f"m{m}.jpg"))
        ds = Dataset(tuple(observations))
        k = int(rng.integers(1, min(6, n) + 1))
        raw = [int(x) for x in rng.integers(0, k, size=n)]
        remap = {lab: idx for idx, lab in enumerate(dict.fromkeys(raw))}
        part = Partition(labels={f"f{i}": remap[raw[i]] for i in range(n)})
        out = split_same_photo(part, ds, cut_threshold=float(rng.uniform(0.3, 1.5)))
        seen = set()
        for o in ds.observations:
            lab = out.labels[o.face_id]
            if lab == -1 or o.media_kind != "photo":
                continue
            key = (lab, o.media_id)
            if key in seen:
                violations += 1
            seen.add(key)
        clusters_seen += out.num_clusters
    if violations:
        problems.append(f"{violations} same-photo violations")
    _verdict(
        capfd,
        "same-photo-guarantee",
        problems,
        f"1000 random albums, {clusters_seen} refined clusters, "
        f"{violations} violations",
    )


def test_filters_idempotent_and_only_unassign(capfd):
    """Size and date-span filters only unassign, and a second pass is a no-op."""
    rng = np.random.default_rng(74)
    problems = []
    trials = 300
    for trial in range(trials):
        n = int(rng.integers(1, 25))
        ids = [f"f{i}" for i in range(n)]
        raw = [int(x) for x in rng.integers(-1, 4, size=n)]
        assigned = [lab for lab in raw if lab != -1]
        remap = {lab: idx for idx, lab in enumerate(dict.fromkeys(assigned))}
        part = Partition(
            labels={fid: remap.get(lab, -1) for fid, lab in zip(ids, raw)}
        )
        ds = Dataset(
            tuple(
                obs(
                    fid,
                    row,
                    created_at=date(2020, 1, 1)
                    + timedelta(days=int(rng.integers(0, 45))),
                )
                for fid, row in zip(ids, random_unit_rows(rng, n, 4))
            )
        )
        min_size = int(rng.integers(1, 5))
        span = int(rng.choice([0, 1, 7, 30]))
        for name, apply in (
            ("filter_small", lambda p: filter_small(p, min_size)),
            ("filter_date_span", lambda p: filter_date_span(p, ds, span)),
        ):
            once = apply(part)
            if not only_unassigns(part, once):
                problems.append(f"trial {trial} {name} moved or merged faces")
            if apply(once).labels != once.labels:
                problems.append(f"trial {trial} {name} not idempotent")
    _verdict(
        capfd,
        "filter-semantics",
        problems,
        f"{trials} random partitions, both filters idempotent and "
        "unassign-only",
    )


def test_track_collapse_guarantees(capfd):
    """Track embeddings stay unit norm; collapsing ignores frame order."""
    rng = np.random.default_rng(85)
    problems = []
    worst_norm = 0.0
    tracks_total = 0
    for _ in range(40):
        n = int(rng.integers(2, 13))
        rows = random_unit_rows(rng, n, 8)
        clip = [
            obs(
                f"c{i}",
                rows[i],
                media_id="clip.mp4",
                media_kind="video",
                frame_index=i,
                created_at=date(2020, 3, 1) + timedelta(days=int(rng.integers(20))),
                age_posterior=rng.dirichlet(np.ones(100)),
                gender_posterior=rng.dirichlet(np.ones(2)),
            )
            for i in range(n)
        ]
        tracks = cluster_clip(clip, float(rng.uniform(0.4, 1.8)))
        tracks_total += len(tracks)
        for track in tracks:
            worst_norm = max(
                worst_norm, abs(float(np.linalg.norm(track.embedding)) - 1.0)
            )
    if worst_norm > 1e-6:
        problems.append(f"track embedding norm off by {worst_norm:.3e}")

    n = 10
    rows = random_unit_rows(rng, n, 8)
    base = [
        obs(
            f"c{i}",
            rows[i],
            media_id="clip.mp4",
            media_kind="video",
            frame_index=i,
            created_at=date(2020, 3, 1) + timedelta(days=i),
            age_posterior=rng.dirichlet(np.ones(100)),
            gender_posterior=rng.dirichlet(np.ones(2)),
        )
        for i in range(n)
    ]

    def snapshot(tracks):
        return tuple(
            (
                t.face_id,
                t.member_face_ids,
                t.embedding.tobytes(),
                t.created_at.isoformat(),
                t.age_posterior.tobytes(),
                t.gender_posterior.tobytes(),
            )
            for t in tracks
        )

    reference = snapshot(cluster_clip(base, 0.9))
    shuffler = random.Random(85)
    mismatches = 0
    order = list(base)
    for _ in range(100):
        shuffler.shuffle(order)
        if snapshot(cluster_clip(order, 0.9)) != reference:
            mismatches += 1
    if mismatches:
        problems.append(f"{mismatches}/100 shuffles changed the tracks")
    _verdict(
        capfd,
        "track-collapse",
        problems,
        f"{tracks_total} tracks unit-norm within {worst_norm:.2e}, "
        f"100 shuffles bit-identical",
    )


def test_product_fusion_beats_single_frame(capfd):
    """Fusing 9 frames by the product rule beats single-frame accuracy.

    Per-frame posteriors are Dirichlet(2, 1) around the true class, putting
    single-frame accuracy at 75% in expectation; the fused accuracy must
    exceed the single-frame mean by at least 10 percentage points.
    """
    rng = np.random.default_rng(96)
    trials = 1000
    frames_per_trial = 9
    single_hits = 0
    fused_hits = 0
    for _ in range(trials):
        p_true = rng.beta(2.0, 1.0, size=frames_per_trial)
        frames = np.stack([p_true, 1.0 - p_true], axis=1)
        single_hits += int((p_true > 0.5).sum())
        winner, _ = fuse_class_product(list(frames))
        fused_hits += int(winner == 0)
    single_acc = single_hits / (trials * frames_per_trial)
    fused_acc = fused_hits / trials
    gain = fused_acc - single_acc
    problems = []
    if not 0.70 <= single_acc <= 0.80:
        problems.append(f"single-frame accuracy {single_acc:.3f} outside 70-80%")
    if gain < 0.10:
        problems.append(f"gain {gain:+.3f} below 10 points")
    _verdict(
        capfd,
        "fusion-gain",
        problems,
        f"single-frame {single_acc:.3f}, fused M=9 {fused_acc:.3f}, "
        f"gain {gain:+.3f}, {trials} trials",
    )


def test_pipeline_scales_to_large_album(capfd):
    """Tuning plus the full pipeline finishes a 5000-face album in under 60s."""
    ds, truth = generate_synthetic_album(
        250, 18, dim=64, noise_sigma=0.05, seed=11, video_clips=50, frames_per_clip=10
    )
    problems = []
    if len(ds) != 5000:
        problems.append(f"album has {len(ds)} faces")
    start = perf_counter()
    threshold = tune_cut_threshold(ds, truth)
    report = run_pipeline(ds, PipelineConfig(cut_threshold=threshold, frame_stride=3))
    elapsed = perf_counter() - start
    assigned = sum(len(c.members) for c in report.clusters)
    if assigned + len(report.unassigned) != len(ds):
        problems.append("cluster members plus unassigned do not cover the album")
    if report.counts["input_faces"] != len(ds):
        problems.append(f"counts report {report.counts['input_faces']} input faces")
    ari = adjusted_rand_index(expanded_partition(report), truth)
    if ari < 0.95:
        problems.append(f"recovery ARI {ari:.4f} < 0.95")
    if elapsed >= 60.0:
        problems.append(f"runtime {elapsed:.1f}s exceeds 60s")
    _verdict(
        capfd,
        "pipeline-scale",
        problems,
        f"5000 faces, {report.counts['clusters']} clusters, ARI {ari:.4f}, "
        f"{elapsed:.1f}s",
    )
