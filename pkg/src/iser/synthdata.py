"""Seeded 2-D generators for global, local, dependency and boundary-demo anomalies.

Every geometric constant lives in :class:`GeneratorParams` so experiments can
override it; the defaults are fixed choices sized for quick experiments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .model import DOMAIN_SYNTH, Dataset, derive_rng


class Kind(str, enum.Enum):
    GLOBAL = "global"
    LOCAL_SPIRAL = "local-spiral"
    DEPENDENCY = "dependency"
    TWO_CLUSTER = "two-cluster"
    SPIRAL_DEMO = "spiral-demo"


@dataclass(frozen=True)
class GeneratorParams:
    """Geometry of the synthetic scenarios.

    Attributes:
        global_sigma: Std of the isotropic Gaussian normal cluster (GLOBAL).
        annulus_inner, annulus_outer: Radii bounding the GLOBAL anomaly ring.
        spiral_offset, spiral_growth: Spiral r = offset + growth * theta.
        spiral_turns: theta runs over [0, 2*pi*turns].
        displacement_min, displacement_max: LOCAL_SPIRAL anomaly offset from
            the curve, in multiples of the noise std.
        dependency_spread: Half-width of the uniform position along the
            dominant DEPENDENCY direction.
        cluster_separation: TWO_CLUSTER centers sit at (+-separation/2, 0).
        cluster_sigma: Std of each TWO_CLUSTER cluster.
        cluster_exclusion: TWO_CLUSTER anomalies are redrawn while they lie
            within cluster_exclusion * cluster_sigma of a cluster center.
        box_scale: Demo anomalies are uniform on a square centred on the
            normals' bounding box, with half-width box_scale times the larger
            half-span of that box.
    """

    global_sigma: float = 1.0
    annulus_inner: float = 4.0
    annulus_outer: float = 8.0
    spiral_offset: float = 0.5
    spiral_growth: float = 0.4
    spiral_turns: float = 3.0
    displacement_min: float = 3.0
    displacement_max: float = 6.0
    dependency_spread: float = 3.0
    cluster_separation: float = 6.0
    cluster_sigma: float = 0.5
    cluster_exclusion: float = 0.0
    box_scale: float = 1.0

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def with_overrides(self, **overrides: float) -> GeneratorParams:
        unknown = set(overrides) - set(self.names())
        if unknown:
            raise ValueError(f"unknown generator parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT_NOISE = 0.15


def default_anomalies(n_normal: int) -> int:
    return n_normal // 20


@dataclass(frozen=True)
class SynthSpec:
    kind: Kind
    n_normal: int = 500
    n_anomaly: int | None = None
    seed: int = 0
    noise: float = DEFAULT_NOISE
    params: GeneratorParams = field(default_factory=GeneratorParams)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.n_anomaly is None:
            object.__setattr__(self, "n_anomaly", default_anomalies(self.n_normal))
        if self.n_normal < 1:
            raise ValueError("n_normal must be >= 1")
        if self.n_anomaly < 0:
            raise ValueError("n_anomaly must be >= 0")
        if not self.noise > 0:
            raise ValueError("noise must be positive")


def _spiral(theta: np.ndarray, p: GeneratorParams) -> tuple[np.ndarray, np.ndarray]:
    """Points on the spiral and unit normals to the curve there."""
    r = p.spiral_offset + p.spiral_growth * theta
    cos, sin = np.cos(theta), np.sin(theta)
    pts = np.column_stack([r * cos, r * sin])
    tangent = np.column_stack([p.spiral_growth * cos - r * sin, p.spiral_growth * sin + r * cos])
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    return pts, np.column_stack([-tangent[:, 1], tangent[:, 0]])


def _spiral_normals(rng: np.random.Generator, n: int, noise: float, p: GeneratorParams) -> np.ndarray:
    theta = rng.uniform(0.0, 2 * np.pi * p.spiral_turns, n)
    pts, _ = _spiral(theta, p)
    return pts + rng.normal(0.0, noise, (n, 2))


def _demo_box(rng: np.random.Generator, ref: np.ndarray, n: int, scale: float) -> np.ndarray:
    lo, hi = ref.min(axis=0), ref.max(axis=0)
    mid = (lo + hi) / 2
    half = scale * float(np.max(hi - lo)) / 2
    return rng.uniform(mid - half, mid + half, (n, 2))


def generate(spec: SynthSpec) -> Dataset:
    """Draw one labelled 2-D dataset; normals come first, then anomalies."""
    rng = derive_rng(spec.seed, 0, DOMAIN_SYNTH)
    nn, na, p = spec.n_normal, spec.n_anomaly, spec.params
    kind = spec.kind

    if kind == Kind.GLOBAL:
        normal = rng.normal(0.0, p.global_sigma, (nn, 2))
        angle = rng.uniform(0.0, 2 * np.pi, na)
        # uniform by area over the annulus
        radius = np.sqrt(rng.uniform(p.annulus_inner**2, p.annulus_outer**2, na))
        anomaly = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    elif kind == Kind.LOCAL_SPIRAL:
        normal = _spiral_normals(rng, nn, spec.noise, p)
        theta = rng.uniform(0.0, 2 * np.pi * p.spiral_turns, na)
        base, nrm = _spiral(theta, p)
        step = rng.uniform(p.displacement_min, p.displacement_max, na) * spec.noise
        side = rng.choice([-1.0, 1.0], na)
        anomaly = base + (side * step)[:, None] * nrm
    elif kind == Kind.DEPENDENCY:
        along = np.array([1.0, 1.0]) / np.sqrt(2.0)
        across = np.array([1.0, -1.0]) / np.sqrt(2.0)
        u = rng.uniform(-p.dependency_spread, p.dependency_spread, nn)
        v = rng.normal(0.0, spec.noise, nn)
        normal = np.outer(u, along) + np.outer(v, across)
        u = rng.uniform(-p.dependency_spread, p.dependency_spread, na)
        v = rng.normal(0.0, spec.noise, na)
        anomaly = np.outer(u, across) + np.outer(v, along)
    elif kind == Kind.TWO_CLUSTER:
        half = p.cluster_separation / 2
        centers = np.array([[-half, 0.0], [half, 0.0]])
        normal = centers[np.arange(nn) % 2] + rng.normal(0.0, p.cluster_sigma, (nn, 2))
        anomaly = np.empty((0, 2))
        core = p.cluster_exclusion * p.cluster_sigma
        while len(anomaly) < na:
            cand = _demo_box(rng, normal, na, p.box_scale)
            gap = np.min(np.linalg.norm(cand[:, None, :] - centers[None], axis=2), axis=1)
            anomaly = np.vstack([anomaly, cand[gap > core]])
        anomaly = anomaly[:na]
    elif kind == Kind.SPIRAL_DEMO:
        normal = _spiral_normals(rng, nn, spec.noise, p)
        anomaly = _demo_box(rng, normal, na, p.box_scale)
    else:  # pragma: no cover
        raise ValueError(f"unknown kind {kind}")

    points = np.vstack([normal, anomaly.reshape(-1, 2)])
    labels = np.r_[np.zeros(nn, dtype=np.int8), np.ones(na, dtype=np.int8)]
    return Dataset(points, labels, ("x", "y"))
