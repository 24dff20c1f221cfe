"""Per-level flow attention, gating, adaptive mixing and cross-level fusion.

For each level ``l``::

    F_l       = flow_attention(T_l, V_l)
    G_l       = sigmoid([F_l ; T_l] W_g^T + b_g)
    F_gated   = G_l * F_l
    H_l       = alpha_l * F_gated + (1 - alpha_l) * align(V_l)

and ``O = head(concat_l(mean_rows(H_l)))``. ``align`` linearly resamples the
video rows onto the text length so the blend is shape-legal. ``alpha_l``
starts at 0.5 and is not clamped, so training may move it outside [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .attention import FlowAttentionParams, FlowAttentionRecord, flow_attention
from .encoders import FeaturePyramid
from .params import ParamStore, glorot
from .tensor import Tensor

ALPHA_INIT = 0.5


@dataclass(frozen=True)
class FusionFlags:
    """Forward-path switches used by the ablation ladder.

    ``flow=False`` replaces F_l with T_l, ``gate=False`` fixes G_l at 1,
    ``adaptive=False`` holds alpha_l at 0.5 outside the graph, and
    ``hierarchy=False`` keeps only the finest level.
    """

    flow: bool = True
    gate: bool = True
    adaptive: bool = True
    hierarchy: bool = True


@dataclass
class GateParams:
    weight: Tensor  # D x 2D
    bias: Tensor  # D

    @classmethod
    def create(cls, store: ParamStore, prefix: str, dim: int, rng: np.random.Generator):
        return cls(store.add(f"{prefix}.weight", glorot(rng, dim, 2 * dim)),
                   store.add(f"{prefix}.bias", np.zeros(dim)))


@dataclass
class LevelMix:
    alpha: Tensor

    @classmethod
    def create(cls, store: ParamStore, prefix: str):
        return cls(store.add(f"{prefix}.alpha", np.float64(ALPHA_INIT)))


@dataclass
class FusionHead:
    weight: Tensor  # d_out x (L * D)
    bias: Tensor

    @classmethod
    def create(cls, store: ParamStore, prefix: str, levels: int, dim: int, d_out: int,
               rng: np.random.Generator):
        return cls(store.add(f"{prefix}.weight", glorot(rng, d_out, levels * dim)),
                   store.add(f"{prefix}.bias", np.zeros(d_out)))


@dataclass
class FusionParams:
    attention: list[FlowAttentionParams]
    gates: list[GateParams]
    mixes: list[LevelMix]
    head: FusionHead

    @classmethod
    def create(cls, store: ParamStore, levels: int, dim: int, d_out: int, rng: np.random.Generator):
        attention = [FlowAttentionParams.create(store, f"attention.l{l}", dim, rng) for l in range(1, levels + 1)]
        gates = [GateParams.create(store, f"gate.l{l}", dim, rng) for l in range(1, levels + 1)]
        mixes = [LevelMix.create(store, f"mix.l{l}") for l in range(1, levels + 1)]
        head = FusionHead.create(store, "fusion_head", levels, dim, d_out, rng)
        return cls(attention, gates, mixes, head)


@dataclass
class FusionOutput:
    flows: list[Tensor] = field(default_factory=list)
    gates: list[Tensor | None] = field(default_factory=list)
    gated: list[Tensor] = field(default_factory=list)
    aligned: list[Tensor] = field(default_factory=list)
    mixed: list[Tensor] = field(default_factory=list)
    records: list[FlowAttentionRecord] = field(default_factory=list)
    fused: Tensor | None = None
    frame_features: Tensor | None = None


def gate(flow: Tensor, text: Tensor, g: GateParams):
    """Return ``(G, G * flow)``."""
    flow, text = T.as_tensor(flow), T.as_tensor(text)
    if flow.shape != text.shape:
        raise T.DimensionError(f"gate: flow {flow.shape} and text {text.shape} must match")
    joint = T.concat([flow, text], axis=-1)
    g_val = T.sigmoid(T.matmul(joint, T.transpose(g.weight)) + g.bias)
    return g_val, g_val * flow


def interpolation_matrix(m: int, n: int) -> np.ndarray:
    """n x m matrix resampling m rows onto n uniformly spaced positions."""
    if m < 1 or n < 1:
        raise ValueError("interpolation needs at least one source and one target row")
    M = np.zeros((n, m))
    if m == n:
        np.fill_diagonal(M, 1.0)
        return M
    if m == 1:
        M[:, 0] = 1.0
        return M
    pos = np.full(n, (m - 1) / 2.0) if n == 1 else np.arange(n) * (m - 1) / (n - 1)
    lo = np.minimum(np.floor(pos).astype(int), m - 2)
    frac = pos - lo
    M[np.arange(n), lo] = 1.0 - frac
    M[np.arange(n), lo + 1] += frac
    return M


def align_video(video: Tensor, target_len: int) -> Tensor:
    video = T.as_tensor(video)
    return T.matmul(interpolation_matrix(video.shape[-2], target_len), video)


def level_mix(gated: Tensor, aligned: Tensor, alpha) -> Tensor:
    gated, aligned = T.as_tensor(gated), T.as_tensor(aligned)
    if gated.shape != aligned.shape:
        raise T.DimensionError(f"level_mix: shapes {gated.shape} and {aligned.shape} differ")
    alpha = alpha.alpha if isinstance(alpha, LevelMix) else T.as_tensor(alpha)
    return alpha * gated + (1.0 - alpha) * aligned


def _pool_concat(mixed: list[Tensor], pool_rows) -> Tensor:
    pooled = [T.matmul(pool_rows(h.shape[-2]), h) for h in mixed]
    return pooled[0] if len(pooled) == 1 else T.concat(pooled, axis=-1)


def _mean_row(n: int) -> np.ndarray:
    return np.full((1, n), 1.0 / n)


def window_matrix(n: int, windows: int) -> np.ndarray:
    """windows x n averaging matrix over contiguous, non-empty row windows."""
    W = np.zeros((windows, n))
    for t in range(windows):
        lo = (t * n) // windows
        hi = max(lo + 1, -(-(t + 1) * n // windows))
        W[t, lo:hi] = 1.0 / (hi - lo)
    return W


def fuse_levels(mixed: list[Tensor], head: FusionHead) -> Tensor:
    """Mean-pool each level over rows, concatenate, apply the affine head."""
    if not mixed:
        raise ValueError("fuse_levels needs at least one level")
    joint = _pool_concat(mixed, _mean_row)  # (..., 1, L*D)
    out = T.matmul(joint, T.transpose(head.weight)) + head.bias
    return T.reshape(out, out.shape[:-2] + out.shape[-1:])


def frame_features(mixed: list[Tensor], head: FusionHead, windows: int) -> Tensor:
    """The fusion head applied to each of ``windows`` temporal windows."""
    joint = _pool_concat(mixed, lambda n: window_matrix(n, windows))
    return T.matmul(joint, T.transpose(head.weight)) + head.bias


def flowahcaf_forward(pyramid: FeaturePyramid, params: FusionParams,
                      flags: FusionFlags = FusionFlags(), windows: int = 4) -> FusionOutput:
    levels = pyramid.levels if flags.hierarchy else 1
    if len(params.attention) < levels:
        raise ValueError(f"parameters cover {len(params.attention)} levels, pyramid needs {levels}")
    out = FusionOutput()
    for l in range(levels):
        text, video = pyramid.text[l], pyramid.video[l]
        if flags.flow:
            f, record = flow_attention(text, video, params.attention[l])
            out.records.append(record)
        else:
            f = text
        if flags.gate:
            g_val, f_gated = gate(f, text, params.gates[l])
        else:
            g_val, f_gated = None, f
        aligned = align_video(video, text.shape[-2])
        alpha = params.mixes[l] if flags.adaptive else ALPHA_INIT
        out.flows.append(f)
        out.gates.append(g_val)
        out.gated.append(f_gated)
        out.aligned.append(aligned)
        out.mixed.append(level_mix(f_gated, aligned, alpha))
    if len(params.head.weight.shape) != 2 or params.head.weight.shape[1] != levels * out.mixed[0].shape[-1]:
        raise T.DimensionError(
            f"fusion head expects {params.head.weight.shape[1]} inputs, got {levels} levels"
        )
    out.fused = fuse_levels(out.mixed, params.head)
    out.frame_features = frame_features(out.mixed, params.head, windows)
    return out
