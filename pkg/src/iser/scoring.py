"""Ensemble representations and the ISER-A / ISER-S anomaly scores."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import Dataset
from .partitioning import PartitionSet, Partitioning, _as_matrix

# rows per block when scoring large datasets; bounds the n x t buffer
CHUNK_ROWS = 8192


class Method(str, enum.Enum):
    ISER_A = "iser-a"
    ISER_S = "iser-s"
    ISER_IF = "iser-if"
    INNE = "inne"
    IDK = "idk"
    IFOREST = "iforest"


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Per-row anomaly scores; higher means more anomalous for every method."""

    scores: np.ndarray
    method: Method

    def __len__(self) -> int:
        return len(self.scores)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoreVector):
            return NotImplemented
        return self.method == other.method and np.array_equal(self.scores, other.scores)


def phi_values(partition: Partitioning, X: np.ndarray) -> np.ndarray:
    """phi for every row of X in one partitioning: 1 - 1/r if covered, else 1."""
    idx, dist = partition.query(X)
    r = partition.radii[idx]
    return np.where(dist <= r, 1.0 - 1.0 / r, 1.0)


def phi(partition: Partitioning, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a single d-vector")
    return float(phi_values(partition, x)[0])


def transform_many(model: PartitionSet, X: np.ndarray, n_jobs: int = 1) -> np.ndarray:
    """Ensemble representation of each row of X, shape (n, t)."""
    X = _as_matrix(X, model.d)
    out = np.empty((X.shape[0], model.t), dtype=np.float64)

    def fill(i: int) -> None:
        out[:, i] = phi_values(model.partitions[i], X)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(fill, range(model.t)))
    else:
        for i in range(model.t):
            fill(i)
    return out


def transform(model: PartitionSet, x: np.ndarray) -> np.ndarray:
    """Ensemble vector of a single point, length t."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a single d-vector")
    return transform_many(model, x)[0]


def score_avg_rows(reps: np.ndarray) -> np.ndarray:
    return np.asarray(reps, dtype=np.float64).mean(axis=1)


def score_sim_rows(reps: np.ndarray) -> np.ndarray:
    """Cosine similarity of each row with the all-ones vector; zero rows score 0."""
    reps = np.asarray(reps, dtype=np.float64)
    t = reps.shape[1]
    norm = np.sqrt(np.einsum("ij,ij->i", reps, reps))
    total = reps.sum(axis=1)
    denom = norm * np.sqrt(t)
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(norm > 0, total / np.where(norm > 0, denom, 1.0), 0.0)
    return np.clip(sim, -1.0, 1.0)


def score_avg(rep: np.ndarray) -> float:
    return float(score_avg_rows(np.atleast_2d(rep))[0])


def score_sim(rep: np.ndarray) -> float:
    return float(score_sim_rows(np.atleast_2d(rep))[0])


_ROW_SCORERS = {Method.ISER_A: score_avg_rows, Method.ISER_S: score_sim_rows}


def score_dataset(
    model: PartitionSet,
    data: Dataset | np.ndarray,
    method: Method | str,
    n_jobs: int = 1,
) -> ScoreVector:
    """Score every row with ISER-A or ISER-S, preserving row order.

    Rows are processed in blocks so memory stays O(block * t) regardless of n.
    """
    method = Method(method)
    if method not in _ROW_SCORERS:
        raise ValueError(f"score_dataset handles iser-a and iser-s, not {method.value}")
    X = data.points if isinstance(data, Dataset) else _as_matrix(data, model.d)
    if X.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: model has d={model.d}, data has d={X.shape[1]}")
    scorer = _ROW_SCORERS[method]
    scores = np.empty(X.shape[0], dtype=np.float64)
    for start in range(0, X.shape[0], CHUNK_ROWS):
        block = X[start : start + CHUNK_ROWS]
        scores[start : start + len(block)] = scorer(transform_many(model, block, n_jobs))
    return ScoreVector(scores, method)
