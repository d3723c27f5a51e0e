import numpy as np
import pytest

from pcrobust import autodiff as ad
from pcrobust.autodiff import Tensor, finite_diff_check
from pcrobust.geometry import PointCloud, normalize_unit_sphere
from pcrobust.model import (
    AttentionLayerParams,
    baseline_forward,
    forward,
    init_baseline,
    init_model,
    load_checkpoint,
    neighbor_embed,
    save_checkpoint,
    self_attention_layer,
)
from pcrobust.sampling import SampleSpec

from conftest import random_cloud
from model_checks import miniature_max_fd_error


def mini_params(seed=0, **overrides):
    defaults = dict(n_classes=3, m_anchors=8, d_model=16, d_attn=4, group_k=4)
    defaults.update(overrides)
    return init_model(np.random.default_rng(seed), **defaults)


class TestNeighborEmbed:
    def test_identity_sampling_group_of_self(self):
        cloud = random_cloud(0, n=12)
        params = mini_params(group_k=1)
        f_s, anchors = neighbor_embed(cloud, params, anchors=np.arange(12))
        assert anchors.tolist() == list(range(12))
        # group of self only: the embedding sees (0, 0, 0, p_i)
        feats = np.concatenate([np.zeros((12, 3)), cloud.points], axis=1)
        h = np.maximum(feats @ params.embed_w1.data + params.embed_b1.data, 0.0)
        expected = h @ params.embed_w2.data + params.embed_b2.data
        assert np.abs(f_s.data - expected).max() <= 1e-12

    def test_anchor_rows_permute_with_input(self):
        cloud = random_cloud(1, n=20)
        params = mini_params()
        rng = np.random.default_rng(2)
        perm = rng.permutation(20)
        permuted = PointCloud(cloud.points[perm])
        spec = SampleSpec(m=6, variant="fps")
        start_new = int(np.argwhere(perm == 0)[0, 0])
        f_a, anchors_a = neighbor_embed(cloud, params, spec, fps_start=0)
        f_b, anchors_b = neighbor_embed(permuted, params, spec, fps_start=start_new)
        # the i-th anchor names the same physical point in both runs
        assert np.array_equal(perm[anchors_b], anchors_a)
        assert np.abs(f_a.data - f_b.data).max() <= 1e-9

    def test_group_feature_order_invariance(self):
        # reversing the point order leaves each anchor's group feature alone
        cloud = random_cloud(3, n=16)
        params = mini_params()
        reversed_cloud = PointCloud(cloud.points[::-1])
        f_a, _ = neighbor_embed(cloud, params, anchors=np.array([4]))
        f_b, _ = neighbor_embed(reversed_cloud, params, anchors=np.array([11]))
        assert np.abs(f_a.data - f_b.data).max() <= 1e-12

    def test_requires_sampler_or_anchors(self):
        with pytest.raises(ValueError):
            neighbor_embed(random_cloud(4, n=8), mini_params())


class TestSelfAttentionLayer:
    def test_zero_query_projection(self):
        rng = np.random.default_rng(0)
        d, d_attn, m = 6, 3, 5
        f_in = Tensor(rng.standard_normal((m, d)))
        layer = AttentionLayerParams(
            w_q=Tensor(np.zeros((d, d_attn))),
            w_k=Tensor(rng.standard_normal((d, d_attn))),
            w_v=Tensor(rng.standard_normal((d, d))),
        )
        f_out, scores = self_attention_layer(f_in, layer, d_attn)
        assert np.array_equal(scores.data, np.zeros((m, m)))
        v = f_in.data @ layer.w_v.data
        expected = np.tile(v.mean(axis=0), (m, 1)) + f_in.data
        assert np.abs(f_out.data - expected).max() <= 1e-12

    def test_single_anchor(self):
        rng = np.random.default_rng(1)
        d, d_attn = 4, 2
        f_in = Tensor(rng.standard_normal((1, d)))
        layer = AttentionLayerParams(
            w_q=Tensor(rng.standard_normal((d, d_attn))),
            w_k=Tensor(rng.standard_normal((d, d_attn))),
            w_v=Tensor(rng.standard_normal((d, d))),
        )
        f_out, _ = self_attention_layer(f_in, layer, d_attn)
        expected = f_in.data @ layer.w_v.data + f_in.data
        assert np.abs(f_out.data - expected).max() <= 1e-12

    def test_attention_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        d, d_attn, m = 8, 4, 7
        f_in = Tensor(rng.standard_normal((m, d)) * 3)
        layer = AttentionLayerParams(
            w_q=Tensor(rng.standard_normal((d, d_attn)), requires_grad=True),
            w_k=Tensor(rng.standard_normal((d, d_attn)), requires_grad=True),
            w_v=Tensor(rng.standard_normal((d, d)), requires_grad=True),
        )
        _, scores = self_attention_layer(f_in, layer, d_attn)
        attn = ad.softmax_rows(scores, 1.0)
        assert np.abs(attn.data.sum(axis=1) - 1.0).max() <= 1e-12

    @pytest.mark.parametrize("which", ["w_q", "w_k", "w_v"])
    def test_gradient_wrt_projections(self, which):
        rng = np.random.default_rng(3)
        d, d_attn, m = 6, 3, 5
        f_in = Tensor(rng.standard_normal((m, d)))
        weights = {
            "w_q": rng.standard_normal((d, d_attn)),
            "w_k": rng.standard_normal((d, d_attn)),
            "w_v": rng.standard_normal((d, d)),
        }
        probe_c = Tensor(rng.standard_normal((m, d)))

        def f(t):
            tensors = {
                name: (t if name == which else Tensor(weights[name]))
                for name in weights
            }
            layer = AttentionLayerParams(**tensors)
            f_out, _ = self_attention_layer(f_in, layer, d_attn)
            return ad.mean(ad.mul(f_out, probe_c))

        x = Tensor(np.array(weights[which]), requires_grad=True)
        assert finite_diff_check(f, x) <= 1e-4


class TestForward:
    def test_permutation_invariant_logits(self):
        params = mini_params(1)
        for seed in range(5):
            cloud = random_cloud(200 + seed, n=24)
            rng = np.random.default_rng(seed)
            perm = rng.permutation(24)
            permuted = PointCloud(cloud.points[perm])
            spec = SampleSpec(m=8, variant="fps")
            start_new = int(np.argwhere(perm == 0)[0, 0])
            a = forward(cloud, params, spec, fps_start=0)
            b = forward(permuted, params, spec, fps_start=start_new)
            assert np.abs(a.logits.data - b.logits.data).max() <= 1e-9

    def test_zero_params_tie_break(self):
        cloud = random_cloud(5, n=16)
        params = mini_params()
        for t in params.tensors():
            t.data = np.zeros_like(t.data)
        trace = forward(cloud, params, SampleSpec(m=8, variant="fps"))
        assert np.allclose(trace.logits.data, trace.logits.data[0])
        assert trace.prediction == 0

    def test_duplication_invariance(self):
        cloud = random_cloud(6, n=24)
        params = mini_params(2)
        base = forward(cloud, params, anchors=np.arange(24))
        doubled = PointCloud(np.vstack([cloud.points, cloud.points]))
        params2 = params.copy()
        params2.group_k = params.group_k * 2
        dup = forward(doubled, params2, anchors=np.arange(24))
        assert np.abs(base.logits.data - dup.logits.data).max() <= 1e-6

    def test_trace_contents(self):
        cloud = random_cloud(7, n=20)
        params = mini_params()
        trace = forward(cloud, params, SampleSpec(m=8, variant="fps"))
        assert len(trace.attention_maps) == 4
        assert all(s.data.shape == (8, 8) for s in trace.attention_maps)
        assert trace.point_features.data.shape == (8, 16)
        assert trace.logits.data.shape == (3,)
        assert np.isfinite(trace.point_features.data).all()

    def test_stochastic_sampler_path(self):
        cloud = random_cloud(8, n=32)
        params = mini_params()
        trace = forward(
            cloud, params, SampleSpec(m=8, k=3), np.random.default_rng(0)
        )
        assert trace.anchors.size == 8


class TestBaseline:
    def test_exact_permutation_invariance(self):
        params = init_baseline(np.random.default_rng(0), n_classes=4, hidden=8, d_feat=8)
        cloud = random_cloud(9, n=30)
        permuted = PointCloud(cloud.points[np.random.default_rng(1).permutation(30)])
        a = baseline_forward(cloud, params)
        b = baseline_forward(permuted, params)
        assert np.array_equal(a.logits.data, b.logits.data)

    def test_single_point_pool_is_identity(self):
        params = init_baseline(np.random.default_rng(2), n_classes=2, hidden=4, d_feat=4)
        cloud = PointCloud([[0.1, 0.2, 0.3]])
        trace = baseline_forward(cloud, params)
        assert np.array_equal(
            trace.point_features.data[0],
            np.max(trace.point_features.data, axis=0),
        )
        assert trace.attention_maps == []

    def test_gradient(self):
        params = init_baseline(np.random.default_rng(3), n_classes=3, hidden=6, d_feat=6)
        cloud = random_cloud(10, n=12)

        def f(t):
            saved = params.point_w1
            params.point_w1 = t
            try:
                trace = baseline_forward(cloud, params)
                return ad.mean(trace.logits)
            finally:
                params.point_w1 = saved

        probe = Tensor(np.array(params.point_w1.data), requires_grad=True)
        assert finite_diff_check(f, probe) <= 1e-4


class TestMiniatureGradient:
    def test_full_model_finite_differences(self):
        name, err = miniature_max_fd_error(seed=0)
        assert err <= 1e-4, f"worst {name}: {err}"


class TestCheckpoint:
    def test_attention_round_trip(self, tmp_path):
        params = mini_params(11)
        sampler = SampleSpec(m=8, k=3, variant="das-l0")
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, params, sampler)
        loaded, loaded_sampler = load_checkpoint(path)
        assert loaded_sampler.variant == "das-l0"
        assert loaded_sampler.m == 8 and loaded_sampler.k == 3
        assert loaded.n_classes == params.n_classes
        assert loaded.group_k == params.group_k
        for a, b in zip(params.tensors(), loaded.tensors()):
            assert np.array_equal(a.data, b.data)

    def test_baseline_round_trip(self, tmp_path):
        params = init_baseline(np.random.default_rng(4), n_classes=5, hidden=6, d_feat=7)
        path = tmp_path / "baseline.ckpt"
        save_checkpoint(path, params)
        loaded, _ = load_checkpoint(path)
        assert loaded.n_classes == 5
        assert loaded.d_feat == 7
        for a, b in zip(params.tensors(), loaded.tensors()):
            assert np.array_equal(a.data, b.data)

    def test_save_is_deterministic(self, tmp_path):
        params = mini_params(12)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, params)
        save_checkpoint(p2, params)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"XXXX123")
        with pytest.raises(ValueError):
            load_checkpoint(path)
