"""External clustering-validation metrics and age-accuracy conventions.

All partition metrics are computed from the contingency table between the
predicted and true partitions.  ARI uses exact integer pair counts; AMI uses
the hypergeometric expected mutual information with natural logarithms and
arithmetic-mean normalization.  Unassigned faces (label -1) are excluded by
default, or optionally scored as singleton clusters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

from .records import Partition

UNASSIGNED_POLICIES = ("exclude", "singletons")

# Adience age groups; values in the gaps snap to the nearest range,
# ties to the lower one.
ADIENCE_BINS = ((0, 2), (4, 6), (8, 13), (15, 20), (25, 32), (38, 43), (48, 53), (60, math.inf))


@dataclass(frozen=True)
class EvaluationReport:
    ari: float
    ami: float
    homogeneity: float
    completeness: float
    bcubed_precision: float
    bcubed_recall: float
    bcubed_f: float
    k_over_c: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _aligned_labels(
    pred: Partition, truth: Partition, unassigned: str = "exclude"
) -> tuple[list[int], list[int]]:
    """Contingency-ready label lists over the shared face ids.

    exclude: faces unassigned in either partition are dropped.
    singletons: each unassigned face becomes its own fresh cluster.
    """
    if unassigned not in UNASSIGNED_POLICIES:
        raise ValueError(f"unknown unassigned policy {unassigned!r}")
    if set(pred.labels) != set(truth.labels):
        raise ValueError("partitions cover different face id sets")
    ids = sorted(pred.labels)
    a, b = [], []
    next_a = pred.num_clusters
    next_b = truth.num_clusters
    for fid in ids:
        la, lb = pred.labels[fid], truth.labels[fid]
        if la == -1 or lb == -1:
            if unassigned == "exclude":
                continue
            if la == -1:
                la, next_a = next_a, next_a + 1
            if lb == -1:
                lb, next_b = next_b, next_b + 1
        a.append(la)
        b.append(lb)
    return a, b


def _contingency(a: list[int], b: list[int]):
    """Joint counts plus margins, with labels compacted to dense indices."""
    amap: dict[int, int] = {}
    bmap: dict[int, int] = {}
    joint: dict[tuple[int, int], int] = {}
    for la, lb in zip(a, b):
        i = amap.setdefault(la, len(amap))
        j = bmap.setdefault(lb, len(bmap))
        joint[(i, j)] = joint.get((i, j), 0) + 1
    rows = [0] * len(amap)
    cols = [0] * len(bmap)
    for (i, j), c in joint.items():
        rows[i] += c
        cols[j] += c
    return joint, rows, cols


def _is_identical(joint, rows, cols) -> bool:
    # identical up to relabeling: the contingency table is a permutation matrix
    # scaled by cluster sizes
    return len(joint) == len(rows) == len(cols)


def adjusted_rand_index(
    pred: Partition, truth: Partition, unassigned: str = "exclude"
) -> float:
    a, b = _aligned_labels(pred, truth, unassigned)
    n = len(a)
    if n < 2:
        return 1.0
    joint, rows, cols = _contingency(a, b)
    sum_ij = sum(math.comb(c, 2) for c in joint.values())
    sum_a = sum(math.comb(c, 2) for c in rows)
    sum_b = sum(math.comb(c, 2) for c in cols)
    pairs = math.comb(n, 2)
    num = 2 * (pairs * sum_ij - sum_a * sum_b)
    den = pairs * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


def _entropy(sizes, n) -> float:
    return -sum((c / n) * math.log(c / n) for c in sizes if c)


def _mutual_information(joint, rows, cols, n) -> float:
    mi = 0.0
    for (i, j), nij in joint.items():
        mi += (nij / n) * math.log(n * nij / (rows[i] * cols[j]))
    return mi


def _expected_mutual_information(rows, cols, n) -> float:
    """E[MI] under the permutation model; log-factorials keep it stable."""
    lg = [0.0] * (n + 1)
    for k in range(2, n + 1):
        lg[k] = lg[k - 1] + math.log(k)

    total = 0.0
    for ai in rows:
        for bj in cols:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            for k in range(lo, hi + 1):
                log_prob = (
                    lg[ai]
                    + lg[bj]
                    + lg[n - ai]
                    + lg[n - bj]
                    - lg[n]
                    - lg[k]
                    - lg[ai - k]
                    - lg[bj - k]
                    - lg[n - ai - bj + k]
                )
                total += math.exp(log_prob) * (k / n) * math.log(n * k / (ai * bj))
    return total


def adjusted_mutual_information(
    pred: Partition, truth: Partition, unassigned: str = "exclude"
) -> float:
    a, b = _aligned_labels(pred, truth, unassigned)
    n = len(a)
    if n == 0:
        return 1.0
    joint, rows, cols = _contingency(a, b)
    if _is_identical(joint, rows, cols):
        return 1.0
    mi = _mutual_information(joint, rows, cols, n)
    emi = _expected_mutual_information(rows, cols, n)
    mean_h = (_entropy(rows, n) + _entropy(cols, n)) / 2.0
    denom = mean_h - emi
    if abs(denom) < 1e-15:
        return 0.0
    return (mi - emi) / denom


def homogeneity_completeness(
    pred: Partition, truth: Partition, unassigned: str = "exclude"
) -> tuple[float, float]:
    a, b = _aligned_labels(pred, truth, unassigned)
    n = len(a)
    if n == 0:
        return 1.0, 1.0
    joint, rows, cols = _contingency(a, b)
    h_pred = _entropy(rows, n)
    h_true = _entropy(cols, n)
    h_true_given_pred = -sum(
        (nij / n) * math.log(nij / rows[i]) for (i, j), nij in joint.items()
    )
    h_pred_given_true = -sum(
        (nij / n) * math.log(nij / cols[j]) for (i, j), nij in joint.items()
    )
    homogeneity = 1.0 if h_true == 0.0 else 1.0 - h_true_given_pred / h_true
    completeness = 1.0 if h_pred == 0.0 else 1.0 - h_pred_given_true / h_pred
    return homogeneity, completeness


def bcubed(
    pred: Partition, truth: Partition, unassigned: str = "exclude"
) -> tuple[float, float, float]:
    """Element-averaged BCubed precision, recall, and their harmonic mean."""
    a, b = _aligned_labels(pred, truth, unassigned)
    n = len(a)
    if n == 0:
        return 1.0, 1.0, 1.0
    joint, rows, cols = _contingency(a, b)
    precision = sum(nij * nij / rows[i] for (i, j), nij in joint.items()) / n
    recall = sum(nij * nij / cols[j] for (i, j), nij in joint.items()) / n
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f


def evaluate(
    pred: Partition, truth: Partition, unassigned: str = "exclude"
) -> EvaluationReport:
    """All partition metrics plus the cluster-count ratio K/C."""
    h, c = homogeneity_completeness(pred, truth, unassigned)
    p, r, f = bcubed(pred, truth, unassigned)
    if truth.num_clusters == 0:
        raise ValueError("ground truth has no clusters")
    return EvaluationReport(
        ari=adjusted_rand_index(pred, truth, unassigned),
        ami=adjusted_mutual_information(pred, truth, unassigned),
        homogeneity=h,
        completeness=c,
        bcubed_precision=p,
        bcubed_recall=r,
        bcubed_f=f,
        k_over_c=pred.num_clusters / truth.num_clusters,
    )


def _adience_bin(age: float) -> int:
    best = None
    for idx, (lo, hi) in enumerate(ADIENCE_BINS):
        if lo <= age <= hi:
            return idx
        gap = lo - age if age < lo else age - hi
        if best is None or gap < best[0]:
            best = (gap, idx)
    return best[1]


def age_range_accuracy(predicted_ages, true_ages, mode: str = "adience_bins") -> float:
    if len(predicted_ages) != len(true_ages):
        raise ValueError("predicted and true age lists differ in length")
    if not predicted_ages:
        raise ValueError("no ages to score")
    if mode == "adience_bins":
        hits = sum(
            _adience_bin(p) == _adience_bin(t) for p, t in zip(predicted_ages, true_ages)
        )
    elif mode == "within_5_years":
        hits = sum(abs(p - t) <= 5 for p, t in zip(predicted_ages, true_ages))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return hits / len(predicted_ages)


def save_report(report: EvaluationReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")
