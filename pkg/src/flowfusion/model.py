"""Encoders + hierarchical fusion + classification/sentiment heads."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tensor as T
from .encoders import EncoderConfig, FeaturePyramid, StubEncoders
from .fusion import FusionFlags, FusionOutput, FusionParams, flowahcaf_forward
from .params import ParamStore, glorot
from .tensor import Parameter, Tensor

# groups switched off by a flag are excluded from the trainable set so that
# decoupled weight decay cannot drift parameters the forward pass ignores
_FLAG_GROUPS = {"flow": "attention", "gate": "gate", "adaptive": "mix"}


@dataclass
class ModelOutput:
    pyramid: FeaturePyramid
    fusion: FusionOutput
    class_probs: Tensor
    sent_probs: Tensor
    frame_class_probs: Tensor

    @property
    def fused(self) -> Tensor:
        return self.fusion.fused


class FlowFusionModel:
    def __init__(self, encoder: EncoderConfig, num_classes: int, num_sentiments: int,
                 d_out: int | None = None, windows: int = 4, flags: FusionFlags = FusionFlags(),
                 seed: int = 0):
        if windows < 2:
            raise ValueError("need at least 2 temporal windows")
        self.flags = flags
        self.windows = windows
        levels = encoder.levels if flags.hierarchy else 1
        self.encoder_cfg = replace(encoder, levels=levels)
        self.levels = levels
        self.d_out = encoder.model_dim if d_out is None else d_out
        rng = np.random.default_rng(seed)
        self.store = ParamStore()
        self.encoders = StubEncoders(self.encoder_cfg, self.store, rng)
        self.fusion = FusionParams.create(self.store, levels, encoder.model_dim, self.d_out, rng)
        self.cls_weight = self.store.add("task_heads.cls_weight", glorot(rng, num_classes, self.d_out))
        self.cls_bias = self.store.add("task_heads.cls_bias", np.zeros(num_classes))
        self.sent_weight = self.store.add("task_heads.sent_weight", glorot(rng, num_sentiments, self.d_out))
        self.sent_bias = self.store.add("task_heads.sent_bias", np.zeros(num_sentiments))

    def parameters(self) -> list[Parameter]:
        return list(self.store)

    def trainable(self, freeze=()) -> list[Parameter]:
        skip = {group for flag, group in _FLAG_GROUPS.items() if not getattr(self.flags, flag)}
        skip.update(freeze)
        unknown = set(freeze) - set(self.store.groups())
        if unknown:
            raise ValueError(f"unknown parameter groups {sorted(unknown)}; have {self.store.groups()}")
        return [p for p in self.store if p.name.split(".", 1)[0] not in skip]

    def _head(self, x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
        return T.softmax_axis(T.matmul(x, T.transpose(weight)) + bias, axis=-1)

    def forward(self, tokens, frames) -> ModelOutput:
        """Run a batch: ``tokens`` is (B, S) ints, ``frames`` is (B, M, raw_dim)."""
        tokens = np.asarray(tokens)
        frames = frames.data if isinstance(frames, Tensor) else np.asarray(frames, dtype=np.float64)
        if tokens.ndim == 1:
            tokens, frames = tokens[None], frames[None]
        pyramid = self.encoders.build_pyramid(tokens, frames)
        fusion = flowahcaf_forward(pyramid, self.fusion, self.flags, self.windows)
        return ModelOutput(
            pyramid=pyramid,
            fusion=fusion,
            class_probs=self._head(fusion.fused, self.cls_weight, self.cls_bias),
            sent_probs=self._head(fusion.fused, self.sent_weight, self.sent_bias),
            frame_class_probs=self._head(fusion.frame_features, self.cls_weight, self.cls_bias),
        )

    __call__ = forward
