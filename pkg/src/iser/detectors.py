"""One fit/score entry point per method, used by the CLI and benchmark harnesses."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from . import baselines, iforest, scoring
from .model import Dataset, IserConfig
from .partitioning import fit as fit_partitions
from .scoring import Method

METHODS = tuple(m.value for m in Method)


@dataclass(frozen=True)
class MinMaxScaler:
    """Column-wise min-max map learnt on training data; constant columns map to 0."""

    lo: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> MinMaxScaler:
        lo = X.min(axis=0)
        return cls(lo, X.max(axis=0) - lo)

    def transform(self, X: np.ndarray) -> np.ndarray:
        safe = np.where(self.span > 0, self.span, 1.0)
        return np.where(self.span > 0, (X - self.lo) / safe, 0.0)


@dataclass(frozen=True)
class Detector:
    method: Method
    model: Any
    scaler: MinMaxScaler | None = None
    n_jobs: int = 1

    def score(self, X: np.ndarray) -> np.ndarray:
        """Anomaly scores for the rows of X; higher means more anomalous."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if self.scaler is not None:
            X = self.scaler.transform(X)
        m = self.method
        if m in (Method.ISER_A, Method.ISER_S):
            return scoring.score_dataset(self.model, X, m, self.n_jobs).scores
        if m == Method.INNE:
            return baselines.inne_score_many(self.model, X)
        if m == Method.IDK:
            return baselines.idk_score_many(self.model, X)
        if m == Method.IFOREST:
            return iforest.score_iforest_many(self.model, X)
        return iforest.score_iser_if_many(self.model, X, self.n_jobs)


def fit_detector(
    method: Method | str,
    data: Dataset | np.ndarray,
    psi: int,
    t: int = 200,
    seed: int = 0,
    normalize: bool = False,
    n_trees: int = iforest.DEFAULT_TREES,
    n_jobs: int = 1,
) -> Detector:
    """Fit ``method`` on the (contaminated) data.

    ``psi`` is the hypersphere sample size for the ISER family, iNNE and IDK,
    and the per-tree subsample size for iForest. ``t`` is the number of
    partitionings; iForest uses ``n_trees`` trees instead.
    """
    method = Method(method)
    X = data.points if isinstance(data, Dataset) else Dataset(data).points
    scaler = None
    if normalize:
        scaler = MinMaxScaler.fit(X)
        X = scaler.transform(X)
    if method == Method.IFOREST:
        model = iforest.build_forest(X, n_trees=n_trees, subsample=psi, seed=seed, n_jobs=n_jobs)
        return Detector(method, model, scaler, n_jobs)
    config = IserConfig(psi=psi, t=t, seed=seed, normalize=normalize)
    if method == Method.ISER_IF:
        model = iforest.fit_iser_if(X, config, n_trees=n_trees, n_jobs=n_jobs)
        return Detector(method, model, scaler, n_jobs)
    ps = fit_partitions(X, config, n_jobs=n_jobs)
    if method == Method.INNE:
        model = baselines.fit_inne(ps)
    elif method == Method.IDK:
        model = baselines.fit_idk(ps, X)
    else:
        model = ps
    return Detector(method, model, scaler, n_jobs)


def fit_score(method: Method | str, data: Dataset | np.ndarray, psi: int, **kwargs) -> np.ndarray:
    """Unsupervised protocol: fit on the data and score the same rows."""
    X = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    return fit_detector(method, X, psi, **kwargs).score(X)
