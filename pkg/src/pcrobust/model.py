"""Toy attention point-cloud classifier and a point-MLP baseline.

Pipeline: anchor sampling + self-inclusive grouping, a shared per-point
embedding MLP with max aggregation per group, four cascaded self-attention
layers (residual, same width in and out), feature concatenation through a
linear projection, global max pool, and an MLP head. The forward trace
keeps the pre-softmax attention scores and the pre-pool point features so
the entropy objectives can reach them.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .geometry import PointCloud
from .sampling import SAMPLER_VARIANTS, SampleSpec, sample_anchors

CHECKPOINT_MAGIC = b"RPM1"


@dataclass
class AttentionLayerParams:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor

    def tensors(self):
        return [self.w_q, self.w_k, self.w_v]


@dataclass
class ModelParams:
    """All learnable weights of the attention classifier."""

    n_classes: int
    m_anchors: int
    d_model: int
    d_attn: int
    group_k: int
    embed_w1: Tensor
    embed_b1: Tensor
    embed_w2: Tensor
    embed_b2: Tensor
    layers: list
    w_o: Tensor
    head_w1: Tensor
    head_b1: Tensor
    head_w2: Tensor
    head_b2: Tensor

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def tensors(self):
        out = [self.embed_w1, self.embed_b1, self.embed_w2, self.embed_b2]
        for layer in self.layers:
            out.extend(layer.tensors())
        out.extend([self.w_o, self.head_w1, self.head_b1, self.head_w2, self.head_b2])
        return out

    def zero_grad(self):
        for t in self.tensors():
            t.zero_grad()

    def copy(self) -> "ModelParams":
        return _copy_params(self)


@dataclass
class BaselineParams:
    """Per-point MLP baseline: shared point MLP, max pool, head."""

    n_classes: int
    d_feat: int
    point_w1: Tensor
    point_b1: Tensor
    point_w2: Tensor
    point_b2: Tensor
    head_w1: Tensor
    head_b1: Tensor
    head_w2: Tensor
    head_b2: Tensor

    def tensors(self):
        return [
            self.point_w1,
            self.point_b1,
            self.point_w2,
            self.point_b2,
            self.head_w1,
            self.head_b1,
            self.head_w2,
            self.head_b2,
        ]

    def zero_grad(self):
        for t in self.tensors():
            t.zero_grad()

    def copy(self) -> "BaselineParams":
        return _copy_params(self)


@dataclass
class ForwardTrace:
    """One forward pass: logits, pre-softmax attention maps per layer, and
    the point-feature map that feeds the global max pool."""

    logits: Tensor
    attention_maps: list
    point_features: Tensor
    anchors: np.ndarray | None = None

    @property
    def prediction(self) -> int:
        # ties resolve to the lowest class index
        return int(np.argmax(self.logits.data))


def _param(rng, shape, scale):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def init_model(
    rng: np.random.Generator,
    n_classes: int,
    m_anchors: int = 64,
    d_model: int = 64,
    d_attn: int = 16,
    group_k: int = 8,
    n_layers: int = 4,
    head_hidden: int | None = None,
) -> ModelParams:
    d = d_model
    hh = head_hidden if head_hidden is not None else max(2, d // 2)
    layers = [
        AttentionLayerParams(
            w_q=_param(rng, (d, d_attn), 1.0 / math.sqrt(d)),
            w_k=_param(rng, (d, d_attn), 1.0 / math.sqrt(d)),
            w_v=_param(rng, (d, d), 1.0 / math.sqrt(d)),
        )
        for _ in range(n_layers)
    ]
    return ModelParams(
        n_classes=n_classes,
        m_anchors=m_anchors,
        d_model=d,
        d_attn=d_attn,
        group_k=group_k,
        embed_w1=_param(rng, (6, d), math.sqrt(2.0 / 6)),
        embed_b1=_zeros(d),
        embed_w2=_param(rng, (d, d), math.sqrt(2.0 / d)),
        embed_b2=_zeros(d),
        layers=layers,
        w_o=_param(rng, (n_layers * d, d), 1.0 / math.sqrt(n_layers * d)),
        head_w1=_param(rng, (d, hh), math.sqrt(2.0 / d)),
        head_b1=_zeros(hh),
        head_w2=_param(rng, (hh, n_classes), math.sqrt(2.0 / hh)),
        head_b2=_zeros(n_classes),
    )


def init_baseline(
    rng: np.random.Generator,
    n_classes: int,
    hidden: int = 64,
    d_feat: int = 64,
    head_hidden: int | None = None,
) -> BaselineParams:
    hh = head_hidden if head_hidden is not None else max(2, d_feat // 2)
    return BaselineParams(
        n_classes=n_classes,
        d_feat=d_feat,
        point_w1=_param(rng, (3, hidden), math.sqrt(2.0 / 3)),
        point_b1=_zeros(hidden),
        point_w2=_param(rng, (hidden, d_feat), math.sqrt(2.0 / hidden)),
        point_b2=_zeros(d_feat),
        head_w1=_param(rng, (d_feat, hh), math.sqrt(2.0 / d_feat)),
        head_b1=_zeros(hh),
        head_w2=_param(rng, (hh, n_classes), math.sqrt(2.0 / hh)),
        head_b2=_zeros(n_classes),
    )


def group_indices(points: np.ndarray, anchors: np.ndarray, group_k: int) -> np.ndarray:
    """Self-inclusive nearest original points of each anchor, ties by index."""
    n = points.shape[0]
    if not 1 <= group_k <= n:
        raise ValueError(f"group_k must satisfy 1 <= group_k <= N, got {group_k}")
    diff = points[None, :, :] - points[anchors][:, None, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    return np.argsort(dist, axis=1, kind="stable")[:, :group_k]


def neighbor_embed(
    cloud: PointCloud,
    params: ModelParams,
    sampler: SampleSpec | None = None,
    rng: np.random.Generator | None = None,
    anchors=None,
    fps_start: int = 0,
):
    """Sample anchors and embed their local groups into an (M, D) feature map.

    Each anchor's group is its ``group_k`` nearest original points (anchor
    included). Group points enter a shared MLP as (offset from anchor,
    anchor coordinates) 6-vectors and are aggregated by max, so the result
    is invariant to ordering within the group. Pass ``anchors`` to bypass
    the sampler.
    """
    if anchors is None:
        if sampler is None:
            raise ValueError("either a sampler spec or explicit anchors required")
        anchors = sample_anchors(cloud, sampler, rng, fps_start)
    anchors = np.asarray(anchors, dtype=np.int64)
    pts = cloud.points
    g = params.group_k
    groups = group_indices(pts, anchors, g)
    rel = pts[groups] - pts[anchors][:, None, :]
    ctr = np.broadcast_to(pts[anchors][:, None, :], rel.shape)
    feats = np.concatenate([rel, ctr], axis=2).reshape(anchors.size * g, 6)
    h = ad.relu(ad.linear(Tensor(feats), params.embed_w1, params.embed_b1))
    h = ad.linear(h, params.embed_w2, params.embed_b2)
    return ad.max_pool_rows(h, g), anchors


def self_attention_layer(f_in: Tensor, layer: AttentionLayerParams, d_attn: int):
    """One residual self-attention layer.

    Returns (output, scores) where scores = Q K^T / sqrt(d_attn) is kept
    pre-softmax for the entropy objective.
    """
    q = ad.matmul(f_in, layer.w_q)
    k = ad.matmul(f_in, layer.w_k)
    v = ad.matmul(f_in, layer.w_v)
    scores = ad.mul_scalar(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(d_attn))
    attended = ad.matmul(ad.softmax_rows(scores, 1.0), v)
    return ad.add(attended, f_in), scores


def forward(
    cloud: PointCloud,
    params: ModelParams,
    sampler: SampleSpec | None = None,
    rng: np.random.Generator | None = None,
    anchors=None,
    fps_start: int = 0,
) -> ForwardTrace:
    f_s, anchors = neighbor_embed(cloud, params, sampler, rng, anchors, fps_start)
    m = anchors.size
    f = f_s
    stage_outputs = []
    score_maps = []
    for layer in params.layers:
        f, scores = self_attention_layer(f, layer, params.d_attn)
        if f.data.shape != (m, params.d_model):
            raise AssertionError(f"attention layer broke shape: {f.data.shape}")
        stage_outputs.append(f)
        score_maps.append(scores)
    f_o = ad.matmul(ad.concat(stage_outputs, axis=1), params.w_o)
    f_g = ad.reshape(ad.max_axis(f_o, axis=0), (1, params.d_model))
    h = ad.relu(ad.linear(f_g, params.head_w1, params.head_b1))
    logits = ad.linear(h, params.head_w2, params.head_b2)
    logits = ad.reshape(logits, (params.n_classes,))
    return ForwardTrace(logits, score_maps, f_o, anchors)


def baseline_forward(cloud: PointCloud, params: BaselineParams) -> ForwardTrace:
    """Per-point MLP, global max pool, head. No sampling, no attention."""
    h = ad.relu(ad.linear(Tensor(cloud.points), params.point_w1, params.point_b1))
    point_feats = ad.linear(h, params.point_w2, params.point_b2)
    f_g = ad.reshape(ad.max_axis(point_feats, axis=0), (1, params.d_feat))
    h2 = ad.relu(ad.linear(f_g, params.head_w1, params.head_b1))
    logits = ad.linear(h2, params.head_w2, params.head_b2)
    logits = ad.reshape(logits, (params.n_classes,))
    return ForwardTrace(logits, [], point_feats, None)


def _copy_params(params):
    import copy as _copy

    kwargs = {}
    for name in params.__dataclass_fields__:
        value = getattr(params, name)
        if isinstance(value, Tensor):
            kwargs[name] = Tensor(np.array(value.data), requires_grad=True)
        elif isinstance(value, list):
            kwargs[name] = [
                AttentionLayerParams(
                    *[Tensor(np.array(t.data), requires_grad=True) for t in l.tensors()]
                )
                for l in value
            ]
        else:
            kwargs[name] = _copy.copy(value)
    return type(params)(**kwargs)


# ---------------------------------------------------------------------------
# checkpoint format: magic RPM1, u32 arch code, u32 header fields, then each
# tensor as u32 ndim + u32 dims + row-major little-endian f64 data.

_ARCH_ATTENTION = 0
_ARCH_BASELINE = 1


def save_checkpoint(path, params, sampler: SampleSpec | None = None) -> None:
    """Serialize parameters (and the training-time sampler) to one file."""
    if isinstance(params, ModelParams):
        arch = _ARCH_ATTENTION
        header = [
            params.n_classes,
            params.m_anchors,
            params.d_model,
            params.d_attn,
            params.group_k,
            params.n_layers,
            params.head_b1.data.size,
        ]
    elif isinstance(params, BaselineParams):
        arch = _ARCH_BASELINE
        header = [
            params.n_classes,
            params.d_feat,
            params.point_b1.data.size,
            params.head_b1.data.size,
        ]
    else:
        raise TypeError(f"cannot checkpoint {type(params).__name__}")
    if sampler is None:
        sampler = SampleSpec(m=getattr(params, "m_anchors", 1))
    blob = [CHECKPOINT_MAGIC, struct.pack("<I", arch)]
    blob.append(struct.pack(f"<{len(header)}I", *header))
    blob.append(
        struct.pack(
            "<III",
            SAMPLER_VARIANTS.index(sampler.variant),
            sampler.m,
            sampler.k,
        )
    )
    tensors = params.tensors()
    blob.append(struct.pack("<I", len(tensors)))
    for t in tensors:
        dims = t.data.shape
        blob.append(struct.pack(f"<I{len(dims)}I", len(dims), *dims))
        blob.append(t.data.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(blob))


def load_checkpoint(path):
    """Returns (params, sampler spec recorded at save time)."""
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic {raw[:4]!r}")
    off = 4
    (arch,) = struct.unpack_from("<I", raw, off)
    off += 4
    if arch == _ARCH_ATTENTION:
        n_header = 7
    elif arch == _ARCH_BASELINE:
        n_header = 4
    else:
        raise ValueError(f"unknown checkpoint arch code {arch}")
    header = struct.unpack_from(f"<{n_header}I", raw, off)
    off += 4 * n_header
    variant_code, samp_m, samp_k = struct.unpack_from("<III", raw, off)
    off += 12
    sampler = SampleSpec(m=samp_m, k=samp_k, variant=SAMPLER_VARIANTS[variant_code])
    (n_tensors,) = struct.unpack_from("<I", raw, off)
    off += 4
    tensors = []
    for _ in range(n_tensors):
        (ndim,) = struct.unpack_from("<I", raw, off)
        off += 4
        dims = struct.unpack_from(f"<{ndim}I", raw, off)
        off += 4 * ndim
        size = int(np.prod(dims)) if ndim else 1
        data = np.frombuffer(raw, dtype="<f8", count=size, offset=off)
        off += size * 8
        tensors.append(Tensor(data.reshape(dims).copy(), requires_grad=True))
    it = iter(tensors)

    if arch == _ARCH_ATTENTION:
        n_classes, m_anchors, d_model, d_attn, group_k, n_layers, _ = header
        embed = [next(it) for _ in range(4)]
        layers = [
            AttentionLayerParams(next(it), next(it), next(it))
            for _ in range(n_layers)
        ]
        rest = list(it)
        params = ModelParams(
            n_classes,
            m_anchors,
            d_model,
            d_attn,
            group_k,
            *embed,
            layers,
            *rest,
        )
    else:
        n_classes, d_feat, _, _ = header
        params = BaselineParams(n_classes, d_feat, *list(it))
    return params, sampler
