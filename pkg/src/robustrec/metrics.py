"""Ranking and classification metrics plus the percent-change comparator.

Per-user ranking metrics return ``None`` for users without relevant items;
aggregates skip those users rather than counting them as zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import rankdata

from .errors import UndefinedMetricError

RANKING_METRICS = ("ndcg", "recall", "hit")
SCORING_METRICS = ("auc", "rmse")
ALL_METRICS = RANKING_METRICS + SCORING_METRICS


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    n: int
    k: int | None = None

    def as_dict(self):
        return {"name": self.name, "value": self.value, "k": self.k, "n": self.n}


def _top(ranked, k):
    if k < 1:
        raise ValueError("K must be >= 1")
    return list(ranked)[:k]


def ndcg_at_k(ranked, relevant, k: int) -> float | None:
    """Binary-relevance nDCG@K; ``None`` when ``relevant`` is empty."""
    top = _top(ranked, k)
    relevant = set(relevant)
    if not relevant:
        return None
    dcg = sum(1.0 / math.log2(p + 2) for p, item in enumerate(top) if item in relevant)
    idcg = sum(1.0 / math.log2(p + 2) for p in range(min(k, len(relevant))))
    return dcg / idcg


def recall_at_k(ranked, relevant, k: int) -> float | None:
    top = _top(ranked, k)
    relevant = set(relevant)
    if not relevant:
        return None
    return len(relevant.intersection(top)) / len(relevant)


def hit_at_k(ranked, relevant, k: int) -> int | None:
    top = _top(ranked, k)
    relevant = set(relevant)
    if not relevant:
        return None
    return int(bool(relevant.intersection(top)))


RANKING_FUNCTIONS = {"ndcg": ndcg_at_k, "recall": recall_at_k, "hit": hit_at_k}


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with average ranks for tied scores."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores, method="average")
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def rmse(predicted, actual) -> float:
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ValueError(f"length mismatch: {predicted.size} predictions vs {actual.size} targets")
    if predicted.size == 0:
        raise UndefinedMetricError("RMSE of an empty list")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))


def percent_change(baseline: float, perturbed: float) -> float:
    if baseline == 0:
        raise UndefinedMetricError("percent change from a zero baseline")
    return 100.0 * (perturbed - baseline) / baseline


def mean_over_users(per_user: Iterable[tuple[object, float | None]]) -> tuple[float, int]:
    """Mean of the defined per-user values, accumulated in ascending user order."""
    total = 0.0
    n = 0
    for _, v in sorted(per_user, key=lambda t: t[0]):
        if v is None:
            continue
        total += v
        n += 1
    if n == 0:
        raise UndefinedMetricError("no user with relevant items")
    return total / n, n
