"""Fusing per-frame attribute posteriors into per-cluster decisions.

A cluster holds several observations of one person; its gender and age come
from combining the per-frame classifier posteriors.  Three strategies:
simple voting over per-frame argmaxes, the product rule (argmax of the
product of posteriors, computed as a sum of logs), and the expected value
over the top-L age classes averaged across frames.  The born year follows
by subtracting predicted age from each frame's creation date.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .records import FaceObservation

# Probabilities are floored before taking logs so a hard zero in one frame
# cannot veto a class outright.
PROB_FLOOR = 1e-7

SIMPLE_VOTING = "simple_voting"
PRODUCT_RULE = "product_rule"
EXPECTED_VALUE = "expected_value"
FUSION_KINDS = (SIMPLE_VOTING, PRODUCT_RULE, EXPECTED_VALUE)

GENDER_NAMES = ("female", "male")


@dataclass(frozen=True)
class FusionStrategy:
    """Strategy selector; top_l only applies to expected_value age fusion."""

    kind: str
    top_l: int = 3

    def __post_init__(self):
        if self.kind not in FUSION_KINDS:
            raise ValueError(f"unknown fusion kind {self.kind!r}")
        if not 1 <= self.top_l <= 100:
            raise ValueError(f"top_l must be in 1..100, got {self.top_l}")


def _stack_posteriors(posteriors) -> np.ndarray:
    if len(posteriors) == 0:
        raise ValueError("no posteriors to fuse")
    rows = [np.asarray(p, dtype=np.float64) for p in posteriors]
    width = rows[0].shape
    for r in rows:
        if r.shape != width:
            raise ValueError("posterior length mismatch")
    stacked = np.stack(rows)
    sums = stacked.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("posterior does not sum to 1")
    return stacked


def fuse_class_product(posteriors) -> tuple[int, float]:
    """Class maximizing the product of per-frame probabilities.

    Computed as the argmax of summed logs over floored probabilities; the
    score is the winner's share after exponentiating the log-sums back.
    """
    stacked = _stack_posteriors(posteriors)
    log_sums = np.log(np.maximum(stacked, PROB_FLOOR)).sum(axis=0)
    winner = int(np.argmax(log_sums))
    shifted = np.exp(log_sums - log_sums.max())
    return winner, float(shifted[winner] / shifted.sum())


def fuse_class_voting(posteriors) -> tuple[int, float]:
    """Majority vote over per-frame argmax classes; ties go to the lower class."""
    stacked = _stack_posteriors(posteriors)
    votes = np.argmax(stacked, axis=1)
    counts = np.bincount(votes, minlength=stacked.shape[1])
    winner = int(np.argmax(counts))
    return winner, float(counts[winner] / len(votes))


def expected_age(age_posterior, top_l: int, age_offset: int = 0) -> float:
    """Probability-weighted mean age over the top_l most likely age classes.

    Class index a maps to age a + age_offset years.  Boundary ties in the
    top-L selection resolve toward the lower class index.
    """
    p = np.asarray(age_posterior, dtype=np.float64)
    if not 1 <= top_l <= p.shape[0]:
        raise ValueError(f"top_l must be in 1..{p.shape[0]}, got {top_l}")
    # stable sort on negated values: equal probabilities keep index order
    top = np.argsort(-p, kind="stable")[:top_l]
    # normalizing first keeps the L=1 case exact: (w/w) * age == age
    weights = p[top] / p[top].sum()
    ages = top.astype(np.float64) + age_offset
    return float((ages * weights).sum())


def fuse_age(
    observations: Sequence[FaceObservation],
    strategy: FusionStrategy,
    age_offset: int = 0,
) -> float:
    """Cluster age from every observation that carries an age posterior."""
    posteriors = [o.age_posterior for o in observations if o.age_posterior is not None]
    if not posteriors:
        raise ValueError("no observation carries an age posterior")
    if strategy.kind == SIMPLE_VOTING:
        winner, _ = fuse_class_voting(posteriors)
        return float(winner + age_offset)
    if strategy.kind == PRODUCT_RULE:
        winner, _ = fuse_class_product(posteriors)
        return float(winner + age_offset)
    return float(
        np.mean([expected_age(p, strategy.top_l, age_offset) for p in posteriors])
    )


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def fuse_born_year(
    observations: Sequence[FaceObservation],
    fused_age_per_obs: dict[str, float],
) -> int:
    """Mean of per-observation (creation year - predicted age), rounded half
    away from zero."""
    if not observations:
        raise ValueError("no observations to fuse a born year from")
    years = []
    for obs in observations:
        if obs.face_id not in fused_age_per_obs:
            raise ValueError(f"no fused age for face {obs.face_id!r}")
        years.append(obs.created_at.year - fused_age_per_obs[obs.face_id])
    return _round_half_away(sum(years) / len(years))
