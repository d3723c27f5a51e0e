import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcrobust.geometry import PointCloud, normalize_unit_sphere


def random_cloud(seed, n=64, normalized=True, label=None):
    pts = np.random.default_rng(seed).standard_normal((n, 3))
    cloud = PointCloud(pts, label)
    return normalize_unit_sphere(cloud) if normalized else cloud


@pytest.fixture
def cluster_outlier_cloud():
    """Five tightly packed points plus one far outlier (pairwise ~0.1 vs ~10)."""
    pts = [
        [0.00, 0.00, 0.00],
        [0.10, 0.00, 0.00],
        [0.00, 0.10, 0.00],
        [0.05, 0.05, 0.07],
        [0.10, 0.10, 0.00],
        [10.0, 0.00, 0.00],
    ]
    return PointCloud(pts)
