"""Flow-conservation cross attention (text queries, video sources).

For projected queries ``Q`` (n x D), keys ``K`` and values ``V`` (m x D) with
``phi = softplus + 1e-6``:

* incoming flow   ``I_i = phi(Q_i) . sum_j phi(K_j)``
* outgoing flow   ``O_j = phi(K_j) . sum_i phi(Q_i)``
* competition     ``w = softmax(O)`` over the m sources
* output          ``F_i = phi(Q_i) (phi(K)^T (w * V)) / I_i``

:func:`flow_attention` evaluates this in O((n + m) D^2) on the tape and never
forms an n x m matrix. :func:`flow_attention_oracle` visits every
query/source pair and exists only as ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from . import tensor as T
from .params import ParamStore, uniform
from .tensor import Tensor

EPSILON = T.PHI_EPS


@dataclass
class FlowAttentionParams:
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    epsilon: float = EPSILON

    @classmethod
    def create(cls, store: ParamStore, prefix: str, dim: int, rng: np.random.Generator):
        bound = np.sqrt(6.0 / (2 * dim))
        return cls(*(store.add(f"{prefix}.{n}", uniform(rng, (dim, dim), bound)) for n in ("w_q", "w_k", "w_v")))

    @classmethod
    def from_arrays(cls, w_q, w_k, w_v):
        return cls(T.as_tensor(w_q), T.as_tensor(w_k), T.as_tensor(w_v))


@dataclass
class FlowAttentionRecord:
    q: Tensor
    k: Tensor
    v: Tensor
    incoming: Tensor
    outgoing: Tensor
    competition: Tensor
    output: Tensor


def project_qkv(text: Tensor, video: Tensor, p: FlowAttentionParams):
    text, video = T.as_tensor(text), T.as_tensor(video)
    dim = p.w_q.shape[1]
    if text.shape[-1] != dim or video.shape[-1] != dim:
        raise T.DimensionError(
            f"feature dims must equal {dim}: text {text.shape}, video {video.shape}"
        )
    q = T.matmul(text, T.transpose(p.w_q))
    k = T.matmul(video, T.transpose(p.w_k))
    v = T.matmul(video, T.transpose(p.w_v))
    return q, k, v


def _column_sum(x: Tensor) -> Tensor:
    return T.sum(x, axis=-2, keepdims=True)


def compute_flows(q, k):
    """Incoming flow per query row and outgoing flow per source row."""
    q, k = T.as_tensor(q), T.as_tensor(k)
    if q.shape[-1] != k.shape[-1]:
        raise T.DimensionError(f"query/key feature dims differ: {q.shape} vs {k.shape}")
    pq, pk = T.softplus_phi(q), T.softplus_phi(k)
    incoming = T.sum(pq * _column_sum(pk), axis=-1)
    outgoing = T.sum(pk * _column_sum(pq), axis=-1)
    return incoming, outgoing


def _as_column(x: Tensor) -> Tensor:
    return T.reshape(x, x.shape + (1,))


def flow_attention(text, video, p: FlowAttentionParams):
    """Factorised flow attention; returns ``(F, record)``."""
    q, k, v = project_qkv(text, video, p)
    pq, pk = T.softplus_phi(q), T.softplus_phi(k)
    incoming = T.sum(pq * _column_sum(pk), axis=-1)
    outgoing = T.sum(pk * _column_sum(pq), axis=-1)
    competition = T.softmax_axis(outgoing, axis=-1)
    weighted_v = v * _as_column(competition)
    summary = T.matmul(T.transpose(pk), weighted_v)  # D x D
    out = T.matmul(pq, summary) / _as_column(incoming)
    return out, FlowAttentionRecord(q, k, v, incoming, outgoing, competition, out)


def flow_attention_oracle(text, video, p: FlowAttentionParams, backend: str = "auto") -> Tensor:
    """Quadratic ground truth for :func:`flow_attention` (no gradient)."""
    kern = kernels.get_backend(backend)
    text, video = T.as_tensor(text).data, T.as_tensor(video).data
    wq, wk, wv = p.w_q.data, p.w_k.data, p.w_v.data
    if text.shape[-1] != wq.shape[1] or video.shape[-1] != wq.shape[1]:
        raise T.DimensionError(f"feature dims must equal {wq.shape[1]}")
    if text.ndim == 2:
        return Tensor(kern.flow_attention_quadratic(text @ wq.T, video @ wk.T, video @ wv.T)[0])
    return Tensor(np.stack([
        kern.flow_attention_quadratic(t @ wq.T, s @ wk.T, s @ wv.T)[0] for t, s in zip(text, video)
    ]))
