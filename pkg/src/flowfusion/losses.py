"""Multi-task objective: classification, sentiment, temporal, contrastive, regulariser."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import numpy as np

from . import tensor as T
from .attention import FlowAttentionRecord
from .tensor import Tensor

PROB_FLOOR = 1e-12
ROW_SUM_TOL = 1e-6


@dataclass
class LossWeights:
    cls: float = 1.0
    sent: float = 1.0
    temp: float = 0.1
    cont: float = 0.1
    reg: float = 1e-4

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be >= 0")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.cls, self.sent, self.temp, self.cont, self.reg)


@dataclass
class LossBreakdown:
    cls: Tensor
    sent: Tensor
    temp: Tensor
    cont: Tensor
    reg: Tensor
    total: Tensor

    def values(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name).item() for f in fields(self)}


def _one_hot(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise ValueError(f"label outside [0, {classes})")
    out = np.zeros((labels.size, classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def cross_entropy(probabilities, labels, reduction: str = "mean") -> Tensor:
    """``-sum_i sum_c y_ic log p_ic`` with probabilities floored at 1e-12."""
    probs = T.as_tensor(probabilities)
    if probs.ndim != 2:
        raise T.DimensionError(f"probabilities must be N x C, got {probs.shape}")
    if np.any(np.abs(probs.data.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise ValueError("probability rows must sum to 1")
    target = _one_hot(labels, probs.shape[1])
    if target.shape[0] != probs.shape[0]:
        raise T.DimensionError(f"{target.shape[0]} labels for {probs.shape[0]} rows")
    nll = -T.sum(target * T.log(T.clamp_min(probs, PROB_FLOOR)))
    if reduction == "sum":
        return nll
    if reduction == "mean":
        return nll * (1.0 / probs.shape[0])
    raise ValueError(f"unknown reduction {reduction!r}")


def cls_loss(probabilities, labels, reduction: str = "mean") -> Tensor:
    return cross_entropy(probabilities, labels, reduction)


def sent_loss(probabilities, labels, reduction: str = "mean") -> Tensor:
    return cross_entropy(probabilities, labels, reduction)


def difference_matrix(steps: int) -> np.ndarray:
    D = np.zeros((steps - 1, steps))
    idx = np.arange(steps - 1)
    D[idx, idx] = -1.0
    D[idx, idx + 1] = 1.0
    return D


def temporal_loss(features) -> Tensor:
    """Mean squared step ``||f_t - f_{t+1}||^2`` over T-1 steps, batch-averaged."""
    f = T.as_tensor(features)
    steps = f.shape[-2] if f.ndim >= 2 else 0
    if steps < 2:
        raise ValueError("temporal loss needs at least 2 time steps")
    sq = T.sum(T.square(T.matmul(difference_matrix(steps), f)))
    batch = 1 if f.ndim == 2 else f.shape[0]
    return sq * (1.0 / ((steps - 1) * batch))


def _unit_rows(x: Tensor) -> Tensor:
    norms = np.sqrt(np.sum(x.data ** 2, axis=-1))
    if np.any(norms < T.DIV_GUARD):
        raise ValueError("cosine similarity of a zero-norm vector")
    return x / T.sqrt(T.sum(T.square(x), axis=-1, keepdims=True))


def contrastive_loss(anchor, positive, negatives, tau: float) -> Tensor:
    """InfoNCE for one anchor with cosine similarities at temperature ``tau``."""
    if tau <= 0:
        raise ValueError("temperature must be positive")
    anchor = T.reshape(T.as_tensor(anchor), (1, -1))
    positive = T.reshape(T.as_tensor(positive), (1, -1))
    negatives = T.as_tensor(negatives)
    if negatives.ndim == 1:
        negatives = T.reshape(negatives, (1, -1))
    if negatives.shape[0] < 1:
        raise ValueError("contrastive loss needs at least one negative")
    a = _unit_rows(anchor)
    others = _unit_rows(T.concat([positive, negatives], axis=0))
    logits = T.matmul(a, T.transpose(others)) * (1.0 / tau)  # 1 x (1 + N)
    return T.sum(T.logsumexp(logits, axis=-1)) - T.sum(T.matmul(logits, np.eye(logits.shape[1])[:, :1]))


def batch_contrastive_loss(embeddings, labels, tau: float) -> Tensor:
    """Mean InfoNCE over all same-label (anchor, positive) pairs in a batch.

    Negatives of an anchor are every other-label sample. Anchors with no
    positive or no negative contribute nothing; with no valid pair the loss
    is a zero constant.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    emb = T.as_tensor(embeddings)
    labels = np.asarray(labels).reshape(-1)
    same = labels[:, None] == labels[None, :]
    pos = same & ~np.eye(labels.size, dtype=bool)
    neg = ~same
    has_neg = neg.any(axis=1)
    pos &= has_neg[:, None]
    pairs = int(pos.sum())
    if pairs == 0:
        return T.Tensor(0.0)
    u = _unit_rows(emb)
    logits = T.matmul(u, T.transpose(u)) * (1.0 / tau)
    # masked-out entries sit far below any real logit and vanish under exp
    masked = logits + np.where(neg, 0.0, -1e4)
    neg_lse = T.logsumexp(masked, axis=-1, keepdims=True)
    per_pair = T.logaddexp(logits, neg_lse) - logits
    return T.sum(per_pair * pos.astype(float)) * (1.0 / pairs)


def reg_loss(parameters: Iterable[Tensor], records: Sequence[FlowAttentionRecord] = (),
             attention_target: str = "competition") -> Tensor:
    """``||Theta||_2^2 + ||A||_1``; A is the softmax competition weights by default.

    Batched records contribute their batch-mean L1 norm, so each record
    adds exactly 1 when ``attention_target == "competition"``. With
    ``"outgoing"`` the pre-softmax outgoing flows are penalised instead.
    """
    total: Tensor = T.Tensor(0.0)
    for p in parameters:
        total = total + T.sum(T.square(p))
    for rec in records:
        if attention_target == "competition":
            a = rec.competition
        elif attention_target == "outgoing":
            a = rec.outgoing
        else:
            raise ValueError(f"unknown attention target {attention_target!r}")
        rows = a.size // a.shape[-1]
        total = total + T.sum(T.abs(a)) * (1.0 / rows)
    return total


def total_loss(cls, sent, temp, cont, reg, weights: LossWeights = LossWeights()) -> LossBreakdown:
    terms = [T.as_tensor(x) for x in (cls, sent, temp, cont, reg)]
    total: Tensor = T.Tensor(0.0)
    for lam, term in zip(weights.as_tuple(), terms):
        total = total + lam * term
    return LossBreakdown(*terms, total)
