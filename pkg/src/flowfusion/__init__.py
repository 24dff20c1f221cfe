"""Hierarchical flow-attention fusion of text and video features.

Submodules: :mod:`~flowfusion.tensor` (autodiff core), :mod:`~flowfusion.encoders`,
:mod:`~flowfusion.attention`, :mod:`~flowfusion.fusion`, :mod:`~flowfusion.losses`,
:mod:`~flowfusion.metrics`, :mod:`~flowfusion.harness` and :mod:`~flowfusion.cli`.
"""

from .attention import FlowAttentionParams, flow_attention, flow_attention_oracle
from .encoders import EncoderConfig, FeaturePyramid
from .fusion import FusionFlags, flowahcaf_forward
from .kernels import BACKEND
from .model import FlowFusionModel
from .tensor import Parameter, Tensor, backward

__version__ = "0.1.0"
