"""Isolation trees on raw features (iForest) and on ISER representations (ISER-IF).

In representation space the usual iForest assumption flips: anomalous points
map to near-constant all-ones vectors that are hard to separate, while normal
points are spread out. ISER-IF therefore scores ``1 - 2**(-E[h]/c)``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import DOMAIN_TREE, Dataset, IserConfig, derive_rng
from .partitioning import PartitionSet, _as_matrix
from .partitioning import fit as fit_partitions
from .scoring import transform_many

EULER_GAMMA = 0.5772156649
DEFAULT_TREES = 100
DEFAULT_SUBSAMPLE = 256


class Space(str, enum.Enum):
    RAW = "raw"
    PHI = "phi"


def c(n: int) -> float:
    """Average path length of an unsuccessful BST search over n points."""
    if n <= 1:
        return 0.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def _c_array(sizes: np.ndarray) -> np.ndarray:
    return np.array([c(int(s)) for s in sizes], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class IsolationTree:
    """Flat array encoding of one isolation tree.

    Node 0 is the root. Leaves have ``feature == -1``; ``size`` is the number
    of training points that reached each node and ``depth`` its distance from
    the root.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def height(self) -> int:
        return int(self.depth.max())

    def leaf_of(self, X: np.ndarray) -> np.ndarray:
        X = _as_matrix(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            active = ~self.is_leaf[node]
            if not active.any():
                return node
            a_rows = rows[active]
            a_node = node[active]
            go_left = X[a_rows, self.feature[a_node]] < self.threshold[a_node]
            node[a_rows] = np.where(go_left, self.left[a_node], self.right[a_node])

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        leaf = self.leaf_of(X)
        return self.depth[leaf] + self._leaf_adjust[leaf]

    def __post_init__(self) -> None:
        adjust = np.where(self.is_leaf, _c_array(self.size), 0.0)
        object.__setattr__(self, "_leaf_adjust", adjust)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IsolationTree):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "left", "right", "size", "depth")
        )


def build_tree(X: np.ndarray, height_limit: int, rng: np.random.Generator) -> IsolationTree:
    """Grow one isolation tree on the rows of X.

    A node becomes a leaf at the height limit, when it holds one point, or when
    m feature draws in a row all land on a constant feature.
    """
    m = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    size: list[int] = []
    depth: list[int] = []

    def new_node(n: int, dep: int) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(n)
        depth.append(dep)
        return len(feature) - 1

    stack = [(new_node(X.shape[0], 0), np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        dep = depth[node]
        if dep >= height_limit or len(idx) <= 1:
            continue
        sub = X[idx]
        for _ in range(m):
            q = int(rng.integers(m))
            lo = sub[:, q].min()
            hi = sub[:, q].max()
            if hi > lo:
                break
        else:
            continue
        split = rng.uniform(lo, hi)
        while split <= lo:
            split = rng.uniform(lo, hi)
        mask = sub[:, q] < split
        feature[node] = q
        threshold[node] = float(split)
        l_idx, r_idx = idx[mask], idx[~mask]
        left[node] = new_node(len(l_idx), dep + 1)
        right[node] = new_node(len(r_idx), dep + 1)
        # push right first so the left subtree is numbered first
        stack.append((right[node], r_idx))
        stack.append((left[node], l_idx))

    return IsolationTree(
        feature=np.array(feature, dtype=np.intp),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.intp),
        right=np.array(right, dtype=np.intp),
        size=np.array(size, dtype=np.int64),
        depth=np.array(depth, dtype=np.int64),
        n_features=m,
    )


@dataclass(frozen=True, eq=False)
class IsolationForestModel:
    trees: tuple[IsolationTree, ...]
    subsample_size: int
    space: Space = Space.RAW
    iser_model: PartitionSet | None = None

    def __post_init__(self) -> None:
        if (self.space == Space.PHI) != (self.iser_model is not None):
            raise ValueError("a PHI-space forest needs its ISER model, a RAW one must not have it")
        if self.iser_model is not None and any(
            t.n_features != self.iser_model.t for t in self.trees
        ):
            raise ValueError("PHI-space trees must be trained on t-dimensional vectors")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IsolationForestModel):
            return NotImplemented
        return (
            self.subsample_size == other.subsample_size
            and self.space == other.space
            and self.iser_model == other.iser_model
            and len(self.trees) == len(other.trees)
            and all(a == b for a, b in zip(self.trees, other.trees))
        )

    def mean_path_length(self, X: np.ndarray) -> np.ndarray:
        """E[h] over all trees, for vectors already in the forest's feature space."""
        X = _as_matrix(X, self.trees[0].n_features)
        total = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            total += tree.path_lengths(X)
        return total / len(self.trees)


def build_forest(
    X: np.ndarray,
    n_trees: int = DEFAULT_TREES,
    subsample: int | None = None,
    seed: int = 0,
    n_jobs: int = 1,
) -> IsolationForestModel:
    """Build a raw-space isolation forest.

    Tree j draws its subsample and splits from the stream ``(seed, j)``.
    ``subsample`` defaults to ``min(256, n)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points to build a forest")
    if subsample is None:
        subsample = min(DEFAULT_SUBSAMPLE, n)
    if subsample < 2:
        raise ValueError(f"subsample must be >= 2, got {subsample}")
    if subsample > n:
        raise ValueError(f"subsample={subsample} exceeds the number of points n={n}")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    height_limit = math.ceil(math.log2(subsample))

    def grow(j: int) -> IsolationTree:
        rng = derive_rng(seed, j, DOMAIN_TREE)
        idx = rng.choice(n, size=subsample, replace=False)
        return build_tree(X[idx], height_limit, rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(grow, range(n_trees)))
    else:
        trees = tuple(grow(j) for j in range(n_trees))
    return IsolationForestModel(trees, subsample)


def fit_iser_if(
    data: Dataset | np.ndarray,
    config: IserConfig,
    n_trees: int = DEFAULT_TREES,
    subsample: int | None = None,
    n_jobs: int = 1,
) -> IsolationForestModel:
    """Fit hypersphere partitionings, then an isolation forest on their representations."""
    points = data.points if isinstance(data, Dataset) else Dataset(data).points
    iser_model = fit_partitions(points, config, n_jobs=n_jobs)
    reps = transform_many(iser_model, points, n_jobs=n_jobs)
    forest = build_forest(reps, n_trees, subsample, config.seed, n_jobs)
    return IsolationForestModel(forest.trees, forest.subsample_size, Space.PHI, iser_model)


def path_length(tree: IsolationTree, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a single vector")
    return float(tree.path_lengths(x)[0])


def iforest_from_mean_path(mean_path: np.ndarray, subsample: int) -> np.ndarray:
    return np.power(2.0, -np.asarray(mean_path, dtype=np.float64) / c(subsample))


def iser_if_from_mean_path(mean_path: np.ndarray, subsample: int) -> np.ndarray:
    return 1.0 - iforest_from_mean_path(mean_path, subsample)


def score_iforest_many(model: IsolationForestModel, X: np.ndarray) -> np.ndarray:
    if model.space != Space.RAW:
        raise ValueError("score_iforest needs a RAW-space forest; use score_iser_if")
    return iforest_from_mean_path(model.mean_path_length(X), model.subsample_size)


def score_iser_if_many(model: IsolationForestModel, X: np.ndarray, n_jobs: int = 1) -> np.ndarray:
    if model.space != Space.PHI:
        raise ValueError("score_iser_if needs a PHI-space forest; use score_iforest")
    reps = transform_many(model.iser_model, X, n_jobs=n_jobs)
    return iser_if_from_mean_path(model.mean_path_length(reps), model.subsample_size)


def score_iforest(model: IsolationForestModel, x: np.ndarray) -> float:
    return float(score_iforest_many(model, np.atleast_2d(x))[0])


def score_iser_if(model: IsolationForestModel, x: np.ndarray) -> float:
    return float(score_iser_if_many(model, np.atleast_2d(x))[0])
