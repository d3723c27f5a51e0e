"""Training objectives: smoothed cross-entropy, the self-entropy terms that
sharpen attention maps (row-wise) or point-feature columns (channel-wise),
and their weighted combination.

Both entropy terms take an extra temperature softmax of their own; the
model's attention softmax (temperature 1) is a separate computation on the
same pre-softmax scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

SEM_MODES = ("attention", "channel", "off")


@dataclass(frozen=True)
class LossConfig:
    """Objective configuration.

    sem_weight: weight of the entropy term in the joint loss (lambda)
    tau: temperature of the entropy-term softmax
    sem_mode: "attention" (row-wise on attention scores), "channel"
        (column-wise on point features), or "off"
    sem_layers: 1-based attention layers the row-wise term averages over
    smoothing_eps: label-smoothing mass spread over the wrong classes
    """

    sem_weight: float = 0.1
    tau: float = 1.0
    sem_mode: str = "attention"
    sem_layers: tuple = (1, 2, 3, 4)
    smoothing_eps: float = 0.2

    def __post_init__(self):
        if self.sem_weight < 0:
            raise ValueError("sem_weight must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.sem_mode not in SEM_MODES:
            raise ValueError(f"unknown sem_mode {self.sem_mode!r}")
        if self.sem_mode == "attention" and not self.sem_layers:
            raise ValueError("sem_layers must be nonempty in attention mode")
        if not 0 <= self.smoothing_eps < 1:
            raise ValueError("smoothing_eps must be in [0, 1)")
        object.__setattr__(self, "sem_layers", tuple(sorted(self.sem_layers)))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _row_entropies(scores: Tensor, tau: float) -> Tensor:
    """Shannon entropy (nats) of softmax(row / tau) for every row: (m,) tensor."""
    log_q = ad.log_softmax_rows(scores, tau)
    q = ad.exp(log_q)
    return ad.mul_scalar(ad.sum_axis(ad.mul(q, log_q), axis=1), -1.0)


def row_entropy(row, tau: float = 1.0) -> Tensor:
    """Entropy of the tempered softmax of one score vector."""
    t = _as_tensor(row)
    if t.data.ndim == 1:
        t = ad.reshape(t, (1, t.data.size))
    if t.data.ndim != 2 or t.data.shape[0] != 1:
        raise ValueError(f"row_entropy expects a single row, got {t.data.shape}")
    return ad.mean(_row_entropies(t, tau))


def attention_sem_loss(maps, sem_layers, tau: float = 1.0) -> Tensor:
    """Mean row entropy of the selected pre-softmax attention maps.

    ``maps`` holds one (M, M) score tensor per attention layer in order;
    ``sem_layers`` selects 1-based layers. The result averages over the
    selected layers and over rows.
    """
    layers = sorted(set(sem_layers))
    if not layers:
        raise ValueError("sem_layers must be nonempty")
    if any(l < 1 or l > len(maps) for l in layers):
        raise ValueError(f"sem_layers {layers} outside available 1..{len(maps)}")
    per_layer = [ad.mean(_row_entropies(_as_tensor(maps[l - 1]), tau)) for l in layers]
    total = per_layer[0]
    for term in per_layer[1:]:
        total = ad.add(total, term)
    return ad.mul_scalar(total, 1.0 / len(layers))


def channel_sem_loss(features, tau: float = 1.0) -> Tensor:
    """Mean column entropy of an (M, d) point-feature map.

    Each channel's M point activations are softmaxed at temperature tau;
    the Shannon entropies are averaged over channels.
    """
    f = _as_tensor(features)
    if f.data.ndim != 2:
        raise ValueError(f"expected a 2-D feature map, got {f.data.shape}")
    return ad.mean(_row_entropies(ad.transpose(f), tau))


def smoothed_cross_entropy(logits, label: int, eps: float = 0.0) -> Tensor:
    """Cross-entropy against a label-smoothed target distribution.

    The target puts 1 - eps on the true class and eps / (C - 1) on each of
    the other classes.
    """
    t = _as_tensor(logits)
    if t.data.ndim == 1:
        t = ad.reshape(t, (1, t.data.size))
    n_classes = t.data.shape[1]
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if not 0 <= label < n_classes:
        raise ValueError(f"label {label} out of range for {n_classes} classes")
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0, 1)")
    target = np.full((1, n_classes), eps / (n_classes - 1))
    target[0, label] = 1.0 - eps
    log_q = ad.log_softmax_rows(t, 1.0)
    return ad.mul_scalar(ad.tsum(ad.mul(log_q, Tensor(target))), -1.0)


def total_loss(ce: Tensor, sem: Tensor | None, sem_weight: float) -> Tensor:
    """Joint objective: classification loss plus weighted entropy term."""
    if sem is None or sem_weight == 0.0:
        return ce
    return ad.add(ce, ad.mul_scalar(sem, sem_weight))
