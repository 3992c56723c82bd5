"""iNNE and IDK scorers on the same hypersphere partitionings ISER uses.

Both are oriented so that a higher score means more anomalous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .model import Dataset
from .partitioning import PartitionSet, Partitioning, _as_matrix


@dataclass(frozen=True, eq=False)
class InneModel:
    """Partitionings plus, per center, the radius of its nearest other hypersphere."""

    partition_set: PartitionSet
    neighbor_radius: tuple[np.ndarray, ...]


def fit_inne(partition_set: PartitionSet) -> InneModel:
    radii = tuple(p.radii[p.neighbor_index()] for p in partition_set.partitions)
    return InneModel(partition_set, radii)


def covering_index(part: Partitioning, X: np.ndarray) -> np.ndarray:
    """Smallest-radius hypersphere containing each row (lowest index on ties), -1 if none."""
    dist = cdist(X, part.centers)
    radii = np.where(dist <= part.radii, part.radii, np.inf)
    idx = np.argmin(radii, axis=1)
    return np.where(np.isfinite(radii[np.arange(len(idx)), idx]), idx, -1)


def inne_values(model: InneModel, X: np.ndarray) -> np.ndarray:
    """Per-partitioning iNNE values, shape (n, t).

    A point covered by hypersphere c scores ``1 - r(nn(c)) / r(c)``, where
    nn(c) is the center nearest to c. Since r(nn(c)) <= dist(c, nn(c)) = r(c)
    the value lies in [0, 1). Points outside every hypersphere score 1.
    """
    ps = model.partition_set
    X = _as_matrix(X, ps.d)
    out = np.empty((X.shape[0], ps.t), dtype=np.float64)
    for i, (part, nbr) in enumerate(zip(ps.partitions, model.neighbor_radius)):
        idx = covering_index(part, X)
        safe = np.maximum(idx, 0)
        out[:, i] = np.where(idx >= 0, 1.0 - nbr[safe] / part.radii[safe], 1.0)
    return out


def inne_score_many(model: InneModel, X: np.ndarray) -> np.ndarray:
    return inne_values(model, X).mean(axis=1)


def inne_score(model: InneModel, x: np.ndarray) -> float:
    return float(inne_score_many(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


@dataclass(frozen=True, eq=False)
class IdkModel:
    """Partitionings plus the kernel mean embedding of the training data.

    ``kme`` has length t * psi; block i holds the fraction of training points
    that fell inside each hypersphere of partitioning i.
    """

    partition_set: PartitionSet
    kme: np.ndarray


def _cells(ps: PartitionSet, X: np.ndarray) -> np.ndarray:
    """Flat feature-map index per (row, partitioning), or -1 where uncovered."""
    X = _as_matrix(X, ps.d)
    cells = np.full((X.shape[0], ps.t), -1, dtype=np.intp)
    for i, part in enumerate(ps.partitions):
        idx, dist = part.query(X)
        covered = dist <= part.radii[idx]
        cells[covered, i] = idx[covered] + i * ps.psi
    return cells


def fit_idk(partition_set: PartitionSet, data: Dataset | np.ndarray) -> IdkModel:
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    cells = _cells(partition_set, points)
    counts = np.bincount(cells[cells >= 0], minlength=partition_set.t * partition_set.psi)
    kme = counts / cells.shape[0]
    kme.setflags(write=False)
    return IdkModel(partition_set, kme)


def idk_feature_map_many(model: IdkModel, X: np.ndarray) -> np.ndarray:
    """Binary (n, t * psi) membership matrix: one-hot per covered partitioning."""
    cells = _cells(model.partition_set, X)
    fm = np.zeros((cells.shape[0], len(model.kme)), dtype=np.float64)
    rows, cols = np.nonzero(cells >= 0)
    fm[rows, cells[rows, cols]] = 1.0
    return fm


def idk_feature_map(model: IdkModel, x: np.ndarray) -> np.ndarray:
    return idk_feature_map_many(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]


def idk_score_many(model: IdkModel, X: np.ndarray) -> np.ndarray:
    """Negated dot product between each feature map and the KME."""
    cells = _cells(model.partition_set, X)
    contrib = np.where(cells >= 0, model.kme[np.maximum(cells, 0)], 0.0)
    return -contrib.sum(axis=1)


def idk_score(model: IdkModel, x: np.ndarray) -> float:
    return float(idk_score_many(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])
