import numpy as np
import pytest

from pcrobust.geometry import PointCloud, random_rotation
from pcrobust.sampling import (
    InfeasibleSampleError,
    SampleSpec,
    das_sample,
    density_profile,
    fps_sample,
    random_sample,
    sample_anchors,
    weighted_sample_without_replacement,
)

from conftest import random_cloud
from oracles import brute_density_weights


class TestDensityProfile:
    def test_unit_grid_square_degenerate(self):
        # every 2-NN distance is exactly 1 = t, so the strict inequality
        # zeroes every count and the profile falls back to uniform
        cloud = PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
        prof = density_profile(cloud, 2)
        assert np.allclose(prof.mean_knn_dist, 1.0)
        assert prof.threshold == pytest.approx(1.0)
        assert prof.raw_counts.tolist() == [0, 0, 0, 0]
        assert prof.degenerate
        assert np.allclose(prof.weights, 0.25)

    def test_cluster_outlier_instance(self, cluster_outlier_cloud):
        prof = density_profile(cluster_outlier_cloud, 2)
        # frozen from the brute-force evaluation of the weight definition
        assert prof.raw_counts.tolist() == [2, 2, 2, 2, 2, 0]
        assert np.allclose(prof.weights, [0.2, 0.2, 0.2, 0.2, 0.2, 0.0])
        assert prof.weights[5] == 0.0
        assert not prof.degenerate

    def test_equidistant_cloud_uniform(self):
        # regular tetrahedron: all pairwise distances equal
        pts = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
        prof = density_profile(PointCloud(pts), 3)
        assert np.allclose(prof.weights, 0.25)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("k", [2, 5, 10])
    def test_brute_force_oracle(self, seed, k):
        n = int(np.random.default_rng(1000 + seed).integers(k + 2, 128))
        cloud = random_cloud(seed, n=n)
        prof = density_profile(cloud, k)
        d, t, raw, weights = brute_density_weights(cloud.points.tolist(), k)
        assert np.abs(prof.mean_knn_dist - d).max() <= 1e-12
        assert abs(prof.threshold - t) <= 1e-12
        assert prof.raw_counts.tolist() == raw
        assert np.abs(prof.weights - weights).max() <= 1e-12

    def test_weights_sum_to_one(self):
        prof = density_profile(random_cloud(9, n=80), 5)
        assert abs(prof.weights.sum() - 1.0) <= 1e-9
        assert ((prof.weights == 0) == (prof.raw_counts == 0)).all()

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            density_profile(random_cloud(0, n=5), 5)

    def test_l1_variant(self):
        cloud = random_cloud(21, n=40)
        prof = density_profile(cloud, 5, variant="l1")
        from pcrobust.geometry import knn

        table = knn(cloud, 5)
        t = table.distances.mean(axis=1).mean()
        expected = np.maximum(t - table.distances, 0.0).sum(axis=1)
        assert np.allclose(prof.raw_counts, expected)
        assert abs(prof.weights.sum() - 1.0) <= 1e-9

    def test_ballquery_variant_excludes_far_outlier(self, cluster_outlier_cloud):
        prof = density_profile(cluster_outlier_cloud, 2, variant="ballquery")
        assert prof.weights[5] == 0.0
        assert (prof.weights[:5] > 0).all()

    def test_scale_invariance(self):
        cloud = random_cloud(30, n=60)
        base = density_profile(cloud, 5).weights
        for factor in (0.1, 3.7, 1000.0):
            scaled = PointCloud(cloud.points * factor)
            assert np.abs(density_profile(scaled, 5).weights - base).max() <= 1e-12

    def test_rigid_invariance(self):
        cloud = random_cloud(31, n=60)
        base = density_profile(cloud, 5).weights
        for seed in range(5):
            rng = np.random.default_rng(seed)
            rot = random_rotation(rng)
            moved = PointCloud(cloud.points @ rot.T + rng.standard_normal(3))
            assert np.abs(density_profile(moved, 5).weights - base).max() <= 1e-9


class TestWeightedSample:
    def test_degenerate_distribution(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert weighted_sample_without_replacement([1, 0, 0], 1, rng)[0] == 0

    def test_exhaustive_two(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            out = weighted_sample_without_replacement([0.5, 0.5], 2, rng)
            assert sorted(out.tolist()) == [0, 1]

    def test_first_draw_law(self):
        rng = np.random.default_rng(2)
        weights = [0.7, 0.2, 0.1]
        counts = np.zeros(3)
        trials = 20000
        for _ in range(trials):
            counts[weighted_sample_without_replacement(weights, 1, rng)[0]] += 1
        assert np.abs(counts / trials - weights).max() <= 0.02

    def test_infeasible(self):
        rng = np.random.default_rng(3)
        with pytest.raises(InfeasibleSampleError):
            weighted_sample_without_replacement([0.5, 0.5, 0.0], 3, rng)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            weighted_sample_without_replacement([0.5, -0.1], 1, np.random.default_rng(0))

    def test_distinct_indices(self):
        rng = np.random.default_rng(4)
        w = np.random.default_rng(5).random(20)
        w /= w.sum()
        out = weighted_sample_without_replacement(w, 15, rng)
        assert len(set(out.tolist())) == 15


class TestDas:
    def test_outlier_never_selected(self, cluster_outlier_cloud):
        spec = SampleSpec(m=3, k=2)
        rng = np.random.default_rng(0)
        for _ in range(2000):
            assert 5 not in das_sample(cluster_outlier_cloud, spec, rng)

    def test_all_positive_weights_forced(self, cluster_outlier_cloud):
        spec = SampleSpec(m=5, k=2)
        out = das_sample(cluster_outlier_cloud, spec, np.random.default_rng(1))
        assert sorted(out.tolist()) == [0, 1, 2, 3, 4]

    def test_uniform_cloud_marginals(self):
        # degenerate grid square: uniform fallback, so RS-like marginals
        cloud = PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
        spec = SampleSpec(m=1, k=2)
        rng = np.random.default_rng(6)
        counts = np.zeros(4)
        trials = 8000
        for _ in range(trials):
            counts[das_sample(cloud, spec, rng)[0]] += 1
        p = 0.25
        sigma = np.sqrt(p * (1 - p) / trials)
        assert np.abs(counts / trials - p).max() <= 3 * sigma + 1e-9


class TestFps:
    def test_line_start_middle(self):
        cloud = PointCloud([[0, 0, 0], [1, 0, 0], [2, 0, 0]])
        assert fps_sample(cloud, 2, start=1).tolist() == [1, 0]

    def test_square_opposite_corner(self):
        cloud = PointCloud([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])
        assert fps_sample(cloud, 2, start=0).tolist() == [0, 3]

    def test_m_equals_n(self):
        cloud = random_cloud(7, n=12)
        out = fps_sample(cloud, 12)
        assert sorted(out.tolist()) == list(range(12))

    def test_start_out_of_range(self):
        with pytest.raises(ValueError):
            fps_sample(random_cloud(8, n=5), 2, start=5)

    def test_permutation_equivariance(self):
        for seed in range(5):
            cloud = random_cloud(100 + seed, n=40)
            rng = np.random.default_rng(seed)
            perm = rng.permutation(40)
            permuted = PointCloud(cloud.points[perm])
            base = fps_sample(cloud, 10, start=int(perm[0]))
            mapped = fps_sample(permuted, 10, start=0)
            # position i of the permuted run names the same physical point
            assert np.array_equal(perm[mapped], base)


class TestRandomSample:
    def test_full_set(self):
        out = random_sample(random_cloud(9, n=6), 6, np.random.default_rng(0))
        assert sorted(out.tolist()) == list(range(6))

    def test_two_points(self):
        out = random_sample(random_cloud(10, n=2), 1, np.random.default_rng(1))
        assert out[0] in (0, 1)

    def test_marginal_frequencies(self):
        n = 8
        cloud = random_cloud(11, n=n)
        rng = np.random.default_rng(2)
        trials = 16000
        counts = np.zeros(n)
        for _ in range(trials):
            counts[random_sample(cloud, 1, rng)[0]] += 1
        p = 1.0 / n
        sigma = np.sqrt(p * (1 - p) / trials)
        assert np.abs(counts / trials - p).max() <= 3 * sigma + 1e-9


class TestSampleSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SampleSpec(m=0)
        with pytest.raises(ValueError):
            SampleSpec(m=4, k=0)
        with pytest.raises(ValueError):
            SampleSpec(m=4, variant="nope")

    def test_dispatch(self):
        # dense blob + a few spread points so the 0.1-radius ball query
        # leaves at least m positive-weight candidates
        rng = np.random.default_rng(12)
        blob = rng.standard_normal((20, 3)) * 0.01
        spread = rng.standard_normal((10, 3))
        cloud = PointCloud(np.vstack([blob, spread]))
        for variant in ("das-l0", "das-l1", "das-ballquery-l0", "fps", "random"):
            spec = SampleSpec(m=5, variant=variant, seed=3)
            out = sample_anchors(cloud, spec)
            assert len(out) == 5
            assert len(set(out.tolist())) == 5

    def test_ballquery_infeasible_on_sparse_cloud(self):
        # no two points within the ball radius: a handful of pairs get the
        # only positive weights, so asking for more anchors must fail
        rng = np.random.default_rng(13)
        pts = rng.standard_normal((30, 3)) * 5
        pts[1] = pts[0] + 0.001  # exactly one close pair
        spec = SampleSpec(m=5, variant="das-ballquery-l0")
        with pytest.raises(InfeasibleSampleError):
            das_sample(PointCloud(pts), spec, np.random.default_rng(0))
