"""Rank-based evaluation: AUROC, average precision, repeat aggregation, mean ranks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    return scores, labels.astype(bool)


def auroc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2).

    Computed from average ranks (the Mann-Whitney U statistic).
    """
    scores, pos = _check(scores, labels)
    n_pos = int(pos.sum())
    n_neg = len(pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auroc needs at least one positive and one negative label")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _two_product(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dekker's error-free product: a * b == p + e exactly (absent overflow)."""
    p = a * b
    split = 134217729.0  # 2**27 + 1
    ca, cb = split * a, split * b
    ah, bh = ca - (ca - a), cb - (cb - b)
    al, bl = a - ah, b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _sum_of_ratios(num: np.ndarray, den: np.ndarray) -> float:
    """Correctly rounded sum of num[i] / den[i] for non-negative integers below 2**53.

    Each quotient is split into its rounded value and the rounding residual,
    and math.fsum adds all of them without intermediate rounding.
    """
    a = num.astype(np.float64)
    b = den.astype(np.float64)
    q = a / b
    p, e = _two_product(q, b)
    residual = ((a - p) - e) / b
    return math.fsum(np.concatenate([q, residual]))


def aupr(scores, labels) -> float:
    """Average precision: sum of precision * recall increment over score thresholds.

    Scores are scanned in descending order and tied scores form one threshold,
    so there is no interpolation between ranks. The sum is evaluated in exact
    arithmetic and rounded once.
    """
    scores, pos = _check(scores, labels)
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise ValueError("aupr needs at least one positive label")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(pos[order], dtype=np.int64)
    # last index of each group of tied scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp_at = tp[ends]
    gain = np.diff(np.r_[0, tp_at])
    keep = gain > 0
    # term = (tp / seen) * (gain / n_pos)
    num = tp_at[keep] * gain[keep]
    den = (ends[keep] + 1).astype(np.int64) * n_pos
    if len(scores) ** 2 < 2**53:
        return _sum_of_ratios(num, den)
    return float(np.sum(num / den))


def aggregate_repeats(runs: Sequence[tuple[float, float]]) -> tuple[tuple[float, float], tuple[float, float]]:
    """Means and sample standard deviations (ddof=1, 0 for a single run) of (auroc, aupr) pairs."""
    arr = np.asarray(runs, dtype=np.float64).reshape(-1, 2)
    if len(arr) == 0:
        raise ValueError("need at least one run")
    means = arr.mean(axis=0)
    stds = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(2)
    return (float(means[0]), float(means[1])), (float(stds[0]), float(stds[1]))


def friedman_mean_ranks(table) -> np.ndarray:
    """Mean rank of each method (column); rank 1 is the highest value, ties averaged."""
    table = np.atleast_2d(np.asarray(table, dtype=np.float64))
    if table.shape[1] < 2:
        raise ValueError("need at least two methods")
    ranks = np.vstack([rankdata(-row, method="average") for row in table])
    return ranks.mean(axis=0)


@dataclass(frozen=True)
class MethodStats:
    auroc_mean: float
    auroc_std: float
    aupr_mean: float
    aupr_std: float
    n_repeats: int

    @classmethod
    def from_runs(cls, runs: Sequence[tuple[float, float]]) -> MethodStats:
        (m_roc, m_pr), (s_roc, s_pr) = aggregate_repeats(runs)
        return cls(m_roc, s_roc, m_pr, s_pr, len(runs))


@dataclass
class EvalReport:
    per_method: dict[str, MethodStats]
    mean_ranks: dict[str, float] | None = field(default=None)

    def __post_init__(self) -> None:
        reps = {s.n_repeats for s in self.per_method.values()}
        if len(reps) > 1:
            raise ValueError("n_repeats must be equal across methods")
        for name, s in self.per_method.items():
            for v in (s.auroc_mean, s.aupr_mean):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name}: AUC value {v} outside [0, 1]")

    def to_dict(self) -> dict:
        doc: dict = {
            name: {
                "auroc_mean": s.auroc_mean,
                "auroc_std": s.auroc_std,
                "aupr_mean": s.aupr_mean,
                "aupr_std": s.aupr_std,
                "n_repeats": s.n_repeats,
            }
            for name, s in sorted(self.per_method.items())
        }
        if self.mean_ranks is not None:
            doc["mean_ranks"] = dict(sorted(self.mean_ranks.items()))
        return doc


def mean_ranks_by_name(table: Mapping[str, Mapping[str, float]]) -> dict[str, float]:
    """Mean ranks from ``{dataset: {method: auc}}``; every dataset must cover the same methods."""
    datasets = sorted(table)
    methods = sorted(table[datasets[0]])
    for ds in datasets:
        if sorted(table[ds]) != methods:
            raise ValueError(f"dataset {ds!r} does not cover the same methods")
    matrix = [[table[ds][m] for m in methods] for ds in datasets]
    return dict(zip(methods, (float(r) for r in friedman_mean_ranks(matrix))))
