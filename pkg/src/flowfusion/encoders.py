"""Synthetic text/video encoders and the per-level feature hierarchy.

The stubs stand in for pretrained encoders: text is an embedding table plus a
fixed sinusoidal position signal, video is a per-frame affine map. Each
further level applies ``pool(tanh(x W^T + b))`` with stride-2 mean pooling,
so level ``l`` has ``ceil(n / 2**(l-1))`` rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .params import ParamStore, glorot
from .tensor import Tensor


@dataclass
class EncoderConfig:
    levels: int = 3
    model_dim: int = 16
    text_len: int = 16
    video_len: int = 16
    raw_dim: int = 8
    vocab_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        for name in ("model_dim", "text_len", "video_len", "raw_dim", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        need = 2 ** (self.levels - 1)
        if self.text_len < need or self.video_len < need:
            raise ValueError(
                f"text_len and video_len must be >= 2**(levels-1) = {need} "
                f"(got {self.text_len}, {self.video_len})"
            )


def level_length(n: int, level: int) -> int:
    """Rows at 1-based ``level`` for a length-``n`` input."""
    return math.ceil(n / 2 ** (level - 1))


@dataclass
class FeaturePyramid:
    text: list[Tensor] = field(default_factory=list)
    video: list[Tensor] = field(default_factory=list)

    @property
    def levels(self) -> int:
        return len(self.text)


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    rate = 1.0 / (10000.0 ** (2 * (np.arange(dim) // 2) / dim))
    angle = pos * rate[None, :]
    return np.where(np.arange(dim) % 2 == 0, np.sin(angle), np.cos(angle))


def pool_matrix(n: int) -> np.ndarray:
    """ceil(n/2) x n averaging matrix for stride-2 mean pooling (odd tail kept alone)."""
    m = math.ceil(n / 2)
    P = np.zeros((m, n))
    for r in range(m):
        cols = [c for c in (2 * r, 2 * r + 1) if c < n]
        P[r, cols] = 1.0 / len(cols)
    return P


def encode_text_stub(tokens, table: Tensor, cfg: EncoderConfig) -> Tensor:
    """Embed ``tokens`` (shape ``(S,)`` or ``(B, S)``) and add position signal."""
    ids = np.asarray(tokens)
    if ids.size == 0 or ids.shape[-1] == 0:
        raise ValueError("cannot encode an empty token sequence")
    if not np.issubdtype(ids.dtype, np.integer):
        raise TypeError("token ids must be integers")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError(f"token id outside vocabulary [0, {cfg.vocab_size})")
    emb = T.embedding(table, ids)
    return emb + sinusoidal_positions(ids.shape[-1], table.shape[1])


def encode_video_stub(frames, weight: Tensor, bias: Tensor, cfg: EncoderConfig) -> Tensor:
    frames = T.as_tensor(frames)
    if frames.ndim < 2 or frames.shape[-1] != cfg.raw_dim:
        raise T.DimensionError(
            f"frames must be (..., M, {cfg.raw_dim}), got shape {frames.shape}"
        )
    return T.matmul(frames, T.transpose(weight)) + bias


def level_transform(x: Tensor, weight: Tensor, bias: Tensor, nonlinear: bool = True) -> Tensor:
    """Affine map, tanh, then stride-2 mean pooling along the sequence axis."""
    n = x.shape[-2]
    if n < 2:
        raise ValueError(f"level_transform needs at least 2 rows, got {n}")
    h = T.matmul(x, T.transpose(weight)) + bias
    if nonlinear:
        h = T.tanh(h)
    return T.matmul(pool_matrix(n), h)


class StubEncoders:
    """Owns encoder and level-transform parameters inside a shared store."""

    def __init__(self, cfg: EncoderConfig, store: ParamStore, rng: np.random.Generator):
        self.cfg = cfg
        D = cfg.model_dim
        self.table = store.add("text_encoder.embedding", rng.normal(0.0, 1.0 / np.sqrt(D), (cfg.vocab_size, D)))
        self.video_weight = store.add("video_encoder.weight", glorot(rng, D, cfg.raw_dim))
        self.video_bias = store.add("video_encoder.bias", np.zeros(D))
        self.transforms: dict[tuple[str, int], tuple[Tensor, Tensor]] = {}
        for level in range(2, cfg.levels + 1):
            for which in ("text", "video"):
                w = store.add(f"levels.{which}{level}.weight", glorot(rng, D, D))
                b = store.add(f"levels.{which}{level}.bias", np.zeros(D))
                self.transforms[(which, level)] = (w, b)

    def build_pyramid(self, tokens, frames, levels: int | None = None) -> FeaturePyramid:
        levels = self.cfg.levels if levels is None else levels
        text = [encode_text_stub(tokens, self.table, self.cfg)]
        video = [encode_video_stub(frames, self.video_weight, self.video_bias, self.cfg)]
        for level in range(2, levels + 1):
            text.append(level_transform(text[-1], *self.transforms[("text", level)]))
            video.append(level_transform(video[-1], *self.transforms[("video", level)]))
        return FeaturePyramid(text, video)
