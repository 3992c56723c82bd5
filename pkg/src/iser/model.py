"""Data containers, configuration and seeded random streams."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_LABEL_COLUMN = "label"

# Domain tags keep independent consumers of one master seed apart.
DOMAIN_PARTITION = 0
DOMAIN_TREE = 1
DOMAIN_REPEAT = 2
DOMAIN_SYNTH = 3
DOMAIN_FOREST_SEED = 4


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """A dense n x d matrix of finite values with optional 0/1 labels.

    Arrays are copied on construction and made read-only.
    """

    points: np.ndarray
    labels: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise DataError(f"points must be a non-empty 2-D matrix, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise DataError("points contain NaN or infinite values")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (points.shape[0],):
                raise DataError(
                    f"labels must have length {points.shape[0]}, got shape {labels.shape}"
                )
            if not np.all((labels == 0) | (labels == 1)):
                raise DataError("labels must be 0 or 1")
            labels = labels.astype(np.int8)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != points.shape[1]:
                raise DataError(
                    f"expected {points.shape[1]} feature names, got {len(names)}"
                )
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.feature_names != other.feature_names:
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None and not np.array_equal(self.labels, other.labels):
            return False
        return self.points.shape == other.points.shape and np.array_equal(
            self.points, other.points
        )


@dataclass(frozen=True)
class IserConfig:
    """Hyperparameters of the hypersphere ensemble.

    Attributes:
        psi: Number of points sampled per partitioning (hyperspheres per partitioning).
        t: Number of partitionings in the ensemble.
        seed: Master seed, an unsigned 64-bit integer.
        normalize: Apply per-feature min-max scaling before fitting.
    """

    psi: int = 16
    t: int = 200
    seed: int = 0
    normalize: bool = False

    def __post_init__(self) -> None:
        if int(self.psi) != self.psi or self.psi < 2:
            raise ValueError(f"psi must be an integer >= 2, got {self.psi}")
        if int(self.t) != self.t or self.t < 1:
            raise ValueError(f"t must be an integer >= 1, got {self.t}")
        check_seed(self.seed)


def check_seed(seed: int) -> int:
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return int(seed)


@dataclass(frozen=True)
class RngStream:
    """Identifies one independent random stream derived from a master seed.

    The generator for ``(master_seed, stream_index, domain)`` is built from a
    ``numpy.random.SeedSequence`` with ``entropy=master_seed`` and
    ``spawn_key=(domain, stream_index)``. It depends on nothing else, so tasks
    can be executed in any order or concurrently without changing results.
    """

    master_seed: int
    stream_index: int
    domain: int = DOMAIN_PARTITION

    def __post_init__(self) -> None:
        check_seed(self.master_seed)
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed), spawn_key=(int(self.domain), int(self.stream_index))
        )
        return np.random.Generator(np.random.PCG64(seq))


def derive_rng(seed: int, index: int, domain: int = DOMAIN_PARTITION) -> np.random.Generator:
    return RngStream(seed, index, domain).generator()


def derive_seed(seed: int, index: int, domain: int) -> int:
    """Draw a fresh 64-bit seed from stream ``(seed, index, domain)``."""
    return int(derive_rng(seed, index, domain).integers(0, 2**64, dtype=np.uint64))


def ingest_csv(path: str | Path, label_column: str | None = None) -> Dataset:
    """Read a numeric CSV with a header row.

    Rows are reported 1-based with the header as row 1, so the first data line
    is row 2.

    Args:
        path: CSV file to read.
        label_column: Name of the 0/1 label column, or None for unlabeled data.

    Raises:
        DataError: on a missing file, missing label column, non-numeric cell,
            ragged row or label outside {0, 1}.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise DataError(f"{path}: label column {label_column!r} not found in header")
            label_idx = header.index(label_column)
        feature_idx = [j for j in range(len(header)) if j != label_idx]
        if not feature_idx:
            raise DataError(f"{path}: no feature columns")

        rows: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for j in feature_idx:
                values.append(_parse_cell(row[j], path, lineno, header[j]))
            rows.append(values)
            if label_idx is not None:
                lab = _parse_cell(row[label_idx], path, lineno, header[label_idx])
                if lab not in (0.0, 1.0):
                    raise DataError(
                        f"{path}: row {lineno}, column {header[label_idx]}: "
                        f"label {row[label_idx]!r} is not 0 or 1"
                    )
                labels.append(int(lab))
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(
        points=np.array(rows, dtype=np.float64),
        labels=np.array(labels) if label_idx is not None else None,
        feature_names=tuple(header[j] for j in feature_idx),
    )


def _parse_cell(text: str, path: Path, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"{path}: row {lineno}, column {column}: cannot parse {text!r} as a number"
        ) from None
    if not math.isfinite(value):
        raise DataError(f"{path}: row {lineno}, column {column}: non-finite value {text!r}")
    return value


def format_float(value: float) -> str:
    # shortest repr that round-trips exactly
    return repr(float(value))


def write_dataset_csv(
    data: Dataset, path: str | Path, label_column: str = DEFAULT_LABEL_COLUMN
) -> None:
    names: Sequence[str] = data.feature_names or tuple(f"f{j}" for j in range(data.d))
    header = list(names)
    if data.labels is not None:
        header.append(label_column)
    lines = [",".join(header)]
    for i in range(data.n):
        cells = [format_float(v) for v in data.points[i]]
        if data.labels is not None:
            cells.append(str(int(data.labels[i])))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def minmax_normalize(data: Dataset) -> Dataset:
    """Scale every column to [0, 1]; constant columns become 0."""
    x = data.points
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (x - lo) / safe, 0.0)
    # round-off can land a hair outside [0, 1]
    np.clip(scaled, 0.0, 1.0, out=scaled)
    return Dataset(scaled, data.labels, data.feature_names)
