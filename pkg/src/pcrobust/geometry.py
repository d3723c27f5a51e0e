"""Point-cloud container, unit-sphere normalization, and exact kNN queries.

Clouds are plain N x 3 float64 arrays wrapped with an optional class label.
A cloud is a *set* of points: any row permutation denotes the same object,
and nothing here returns permutation-dependent results except through
explicit index outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PointCloud:
    """Immutable N x 3 coordinate set with an optional integer class label."""

    points: np.ndarray
    label: int | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be N x 3, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: np.ndarray) -> "PointCloud":
        """New cloud with replaced coordinates, keeping the label."""
        return PointCloud(points, self.label)


@dataclass(frozen=True)
class NeighborTable:
    """Per-point k nearest neighbors, distances sorted ascending per row.

    Rows never contain the query point's own index; equal distances are
    ordered by ascending point index.
    """

    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[1]


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center the cloud at its centroid and scale the farthest point to norm 1.

    A fully degenerate cloud (all points coincident) is centered only.
    Idempotent up to floating rounding.
    """
    pts = cloud.points
    centered = pts - pts.mean(axis=0)
    radius = np.sqrt((centered**2).sum(axis=1)).max()
    if radius > 0.0:
        centered = centered / radius
    return cloud.with_points(centered)


def pairwise_distances(points: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Exact N x N Euclidean distance matrix via direct differences.

    Computed per row chunk so results match per-pair sqrt(sum of squared
    differences) bit for bit (no x^2+y^2-2xy cancellation).
    """
    n = points.shape[0]
    out = np.empty((n, n), dtype=np.float64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = points[start:stop, None, :] - points[None, :, :]
        out[start:stop] = np.sqrt((diff**2).sum(axis=2))
    return out


def knn(cloud: PointCloud, k: int) -> NeighborTable:
    """Exact Euclidean k nearest neighbors of every point, self excluded.

    Ties are broken by ascending point index so output is reproducible
    across platforms. Requires 1 <= k <= N-1.
    """
    n = cloud.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must satisfy 1 <= k <= N-1, got k={k}, N={n}")
    dist = pairwise_distances(cloud.points)
    np.fill_diagonal(dist, np.inf)
    # stable sort keeps equal distances in index order
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return NeighborTable(
        indices=order,
        distances=np.take_along_axis(dist, order, axis=1),
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (Shoemake quaternion method)."""
    u1, u2, u3 = rng.random(3)
    q = np.array(
        [
            np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
            np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
            np.sqrt(u1) * np.sin(2 * np.pi * u3),
            np.sqrt(u1) * np.cos(2 * np.pi * u3),
        ]
    )
    return quaternion_to_matrix(q)


def axis_angle_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for a given axis (any nonzero 3-vector) and angle."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = angle / 2.0
    q = np.concatenate([np.sin(half) * axis, [np.cos(half)]])
    return quaternion_to_matrix(q)


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )
