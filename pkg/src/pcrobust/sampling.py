"""Anchor-point selection: density-aware sampling plus FPS and RS baselines.

Density-aware sampling scores each point by how many of its k nearest
neighbors lie closer than the global mean of mean-neighbor distances, then
draws anchors without replacement with probability proportional to that
score. Isolated outliers score 0 and can never be picked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud, knn, normalize_unit_sphere

DENSITY_VARIANTS = ("l0", "l1", "ballquery")
SAMPLER_VARIANTS = ("das-l0", "das-l1", "das-ballquery-l0", "fps", "random")

BALL_QUERY_RADIUS = 0.1
BALL_QUERY_CAP = 64


class InfeasibleSampleError(ValueError):
    """Requested more distinct draws than there are positive-weight entries."""


@dataclass(frozen=True)
class DensityProfile:
    """Per-point density summary feeding the weighted anchor draw.

    mean_knn_dist: mean distance to the k nearest neighbors (d_i)
    threshold: global mean of mean_knn_dist (t)
    raw_counts: unnormalized per-point sampling score (w_i before division)
    weights: raw_counts normalized to a probability vector
    degenerate: True when every raw count was 0 and weights fell back to uniform
    """

    mean_knn_dist: np.ndarray
    threshold: float
    raw_counts: np.ndarray
    weights: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class SampleSpec:
    """How to pick anchors: count, density neighborhood size, strategy, seed."""

    m: int
    k: int = 5
    variant: str = "das-l0"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in SAMPLER_VARIANTS:
            raise ValueError(f"unknown sampler variant {self.variant!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def density_variant(self) -> str:
        return {"das-l0": "l0", "das-l1": "l1", "das-ballquery-l0": "ballquery"}[
            self.variant
        ]


def density_profile(cloud: PointCloud, k: int, variant: str = "l0") -> DensityProfile:
    """Per-point density weights from mean-kNN distances.

    d_i is the mean distance from point i to its k nearest neighbors and
    t the mean of all d_i. Raw score per variant:

    * ``l0``: count of neighbor distances strictly below t
    * ``l1``: sum of max(t - distance, 0) over the k neighbors
    * ``ballquery``: number of other points strictly within radius 0.1 of
      the point on the unit-sphere-normalized cloud, capped at 64

    When every raw score is 0 (e.g. perfectly uniform spacing under the
    strict inequality) the weights fall back to uniform and the profile is
    flagged degenerate.
    """
    if variant not in DENSITY_VARIANTS:
        raise ValueError(f"unknown density variant {variant!r}")
    table = knn(cloud, k)
    d = table.distances.mean(axis=1)
    t = float(d.mean())

    if variant == "l0":
        raw = (table.distances < t).sum(axis=1).astype(np.float64)
    elif variant == "l1":
        raw = np.maximum(t - table.distances, 0.0).sum(axis=1)
    else:
        unit = normalize_unit_sphere(cloud)
        ball = knn(unit, min(BALL_QUERY_CAP, unit.n - 1))
        raw = (ball.distances < BALL_QUERY_RADIUS).sum(axis=1).astype(np.float64)

    total = raw.sum()
    if total > 0.0:
        weights = raw / total
        degenerate = False
    else:
        weights = np.full(cloud.n, 1.0 / cloud.n)
        degenerate = True
    return DensityProfile(d, t, raw, weights, degenerate)


def weighted_sample_without_replacement(weights, m: int, rng: np.random.Generator):
    """Draw m distinct indices by repeated renormalized weighted draws.

    Each draw is proportional to the remaining (conditionally renormalized)
    weights; zero-weight entries are never selected. Raises
    InfeasibleSampleError when fewer than m entries have positive weight.
    """
    w = np.array(weights, dtype=np.float64)
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    positive = int(np.count_nonzero(w > 0))
    if m > positive:
        raise InfeasibleSampleError(
            f"cannot draw {m} distinct indices from {positive} positive-weight entries"
        )
    chosen = np.empty(m, dtype=np.int64)
    for i in range(m):
        cum = np.cumsum(w)
        u = rng.random() * cum[-1]
        idx = int(np.searchsorted(cum, u, side="right"))
        idx = min(idx, len(w) - 1)
        chosen[i] = idx
        w[idx] = 0.0
    return chosen


def das_sample(
    cloud: PointCloud, spec: SampleSpec, rng: np.random.Generator
) -> np.ndarray:
    """Density-aware anchor sampling: density weights, then a weighted draw."""
    profile = density_profile(cloud, spec.k, spec.density_variant)
    return weighted_sample_without_replacement(profile.weights, spec.m, rng)


def fps_sample(cloud: PointCloud, m: int, start: int = 0) -> np.ndarray:
    """Greedy farthest-point sampling from a fixed start index.

    Iteratively appends the point with maximum distance to the selected
    set; distance ties resolve to the lower index. Deterministic.
    """
    n = cloud.n
    if not 1 <= m <= n:
        raise ValueError(f"m must satisfy 1 <= m <= N, got m={m}, N={n}")
    if not 0 <= start < n:
        raise ValueError(f"start index {start} out of range for N={n}")
    pts = cloud.points
    selected = np.empty(m, dtype=np.int64)
    selected[0] = start
    dist = np.sqrt(((pts - pts[start]) ** 2).sum(axis=1))
    dist[start] = -1.0  # selected points can never win the argmax
    for i in range(1, m):
        idx = int(np.argmax(dist))  # first max = lowest index on ties
        selected[i] = idx
        cand = np.sqrt(((pts - pts[idx]) ** 2).sum(axis=1))
        np.minimum(dist, cand, out=dist)
        dist[idx] = -1.0
    return selected


def random_sample(
    cloud: PointCloud, m: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform sampling without replacement."""
    if not 1 <= m <= cloud.n:
        raise ValueError(f"m must satisfy 1 <= m <= N, got m={m}, N={cloud.n}")
    return rng.permutation(cloud.n)[:m].astype(np.int64)


def sample_anchors(
    cloud: PointCloud,
    spec: SampleSpec,
    rng: np.random.Generator | None = None,
    fps_start: int = 0,
) -> np.ndarray:
    """Dispatch to the strategy named by spec.variant."""
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.variant == "fps":
        return fps_sample(cloud, spec.m, fps_start)
    if spec.variant == "random":
        return random_sample(cloud, spec.m, rng)
    return das_sample(cloud, spec, rng)
