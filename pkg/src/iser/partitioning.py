"""Hypersphere partitionings: the fitted ensemble shared by ISER, iNNE and IDK."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .model import DOMAIN_PARTITION, Dataset, IserConfig, derive_rng

RADIUS_FLOOR = 1e-12
FORMAT_TAG = "iser-partitionset/v1"


def _as_matrix(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"dimension mismatch: expected {d} features, got shape {x.shape}")
    return x


@dataclass(frozen=True, eq=False)
class Partitioning:
    """psi hypersphere centers with their nearest-neighbour radii."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self) -> None:
        centers = np.array(self.centers, dtype=np.float64)
        radii = np.array(self.radii, dtype=np.float64)
        if centers.ndim != 2 or radii.shape != (centers.shape[0],):
            raise ValueError("centers must be psi x d and radii length psi")
        if np.any(radii <= 0):
            raise ValueError("radii must be positive")
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_centers(cls, centers: np.ndarray) -> Partitioning:
        """Build the partitioning whose radii are each center's nearest-center distance."""
        centers = np.asarray(centers, dtype=np.float64)
        if centers.ndim == 1:
            centers = centers.reshape(-1, 1)
        radii, _ = _nearest_other(centers)
        return cls(centers, np.maximum(radii, RADIUS_FLOOR))

    @property
    def psi(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def neighbor_index(self) -> np.ndarray:
        """Index of each center's nearest other center (lowest index on ties)."""
        return _nearest_other(self.centers)[1]

    def query(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised nearest-center lookup for the rows of X.

        Returns (index, distance) arrays; ties go to the lowest center index.
        """
        X = _as_matrix(X, self.d)
        dist = cdist(X, self.centers)
        idx = np.argmin(dist, axis=1)
        return idx, dist[np.arange(X.shape[0]), idx]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Partitioning):
            return NotImplemented
        return np.array_equal(self.centers, other.centers) and np.array_equal(
            self.radii, other.radii
        )


def _nearest_other(centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if centers.shape[0] < 2:
        raise ValueError("a partitioning needs at least two centers")
    dist = cdist(centers, centers)
    np.fill_diagonal(dist, np.inf)
    idx = np.argmin(dist, axis=1)
    return dist[np.arange(len(idx)), idx], idx


def nearest_center(partition: Partitioning, x: np.ndarray) -> tuple[int, float]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a single d-vector")
    idx, dist = partition.query(x)
    return int(idx[0]), float(dist[0])


def radius_of_nearest(partition: Partitioning, x: np.ndarray) -> tuple[bool, float]:
    """Coverage of x by its nearest hypersphere, and that hypersphere's radius.

    The boundary counts as inside.
    """
    idx, dist = nearest_center(partition, x)
    r = float(partition.radii[idx])
    return dist <= r, r


@dataclass(frozen=True, eq=False)
class PartitionSet:
    """The fitted ensemble of t partitionings."""

    partitions: tuple[Partitioning, ...]
    config: IserConfig
    fitted_on_n: int

    def __post_init__(self) -> None:
        parts = tuple(self.partitions)
        object.__setattr__(self, "partitions", parts)
        if len(parts) != self.config.t:
            raise ValueError(f"expected {self.config.t} partitionings, got {len(parts)}")
        dims = {p.d for p in parts}
        if len(dims) != 1:
            raise ValueError("all partitionings must share one dimensionality")
        if any(p.psi != self.config.psi for p in parts):
            raise ValueError(f"every partitioning must have psi={self.config.psi} centers")

    @property
    def t(self) -> int:
        return len(self.partitions)

    @property
    def psi(self) -> int:
        return self.config.psi

    @property
    def d(self) -> int:
        return self.partitions[0].d

    @property
    def nbytes(self) -> int:
        """Bytes held by center matrices and radius vectors (t * psi * (d + 1) doubles)."""
        return sum(p.centers.nbytes + p.radii.nbytes for p in self.partitions)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartitionSet):
            return NotImplemented
        return (
            self.config == other.config
            and self.fitted_on_n == other.fitted_on_n
            and all(a == b for a, b in zip(self.partitions, other.partitions))
        )

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "config": {
                "psi": self.config.psi,
                "t": self.config.t,
                "seed": self.config.seed,
                "normalize": self.config.normalize,
            },
            "fitted_on_n": self.fitted_on_n,
            "d": self.d,
            "partitions": [
                {"centers": p.centers.tolist(), "radii": p.radii.tolist()}
                for p in self.partitions
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> PartitionSet:
        if doc.get("format") != FORMAT_TAG:
            raise ValueError(f"unsupported model format {doc.get('format')!r}")
        parts = tuple(
            Partitioning(np.array(p["centers"], dtype=np.float64), np.array(p["radii"]))
            for p in doc["partitions"]
        )
        return cls(parts, IserConfig(**doc["config"]), int(doc["fitted_on_n"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> PartitionSet:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _build_one(points: np.ndarray, psi: int, seed: int, i: int) -> Partitioning:
    rng = derive_rng(seed, i, DOMAIN_PARTITION)
    idx = rng.choice(points.shape[0], size=psi, replace=False)
    return Partitioning.from_centers(points[idx])


def fit(data: Dataset | np.ndarray, config: IserConfig, n_jobs: int = 1) -> PartitionSet:
    """Fit t hypersphere partitionings on ``data``.

    Partitioning i samples psi distinct rows using the stream derived from
    ``(config.seed, i)``, so the result does not depend on ``n_jobs``.
    ``config.normalize`` is not applied here; callers scale the data first.
    """
    points = data.points if isinstance(data, Dataset) else Dataset(data).points
    n = points.shape[0]
    if config.psi > n:
        raise ValueError(f"psi={config.psi} exceeds the number of points n={n}")

    def build(i: int) -> Partitioning:
        return _build_one(points, config.psi, config.seed, i)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(build, range(config.t)))
    else:
        parts = [build(i) for i in range(config.t)]
    return PartitionSet(tuple(parts), config, n)
