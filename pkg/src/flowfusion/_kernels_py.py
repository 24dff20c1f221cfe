"""Numpy fallback for the compiled attention kernels (same signatures)."""

import numpy as np

PHI_EPS = 1e-6


def _phi(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))) + PHI_EPS


def _softmax(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def flow_attention_factorized(q, k, v):
    pq, pk = _phi(np.asarray(q, dtype=np.float64)), _phi(np.asarray(k, dtype=np.float64))
    incoming = pq @ pk.sum(axis=0)
    outgoing = pk @ pq.sum(axis=0)
    competition = _softmax(outgoing)
    summary = pk.T @ (competition[:, None] * v)
    return (pq @ summary) / incoming[:, None], incoming, outgoing, competition


def flow_attention_quadratic(q, k, v):
    pq, pk = _phi(np.asarray(q, dtype=np.float64)), _phi(np.asarray(k, dtype=np.float64))
    pair = pq @ pk.T  # n x m, materialised on purpose
    incoming = pair.sum(axis=1)
    outgoing = pair.sum(axis=0)
    competition = _softmax(outgoing)
    weights = pair * competition[None, :] / incoming[:, None]
    return weights @ v, incoming, outgoing, competition


def softmax_attention(q, k, v):
    scores = (q @ k.T) / np.sqrt(q.shape[1])
    scores -= scores.max(axis=1, keepdims=True)
    p = np.exp(scores)
    p /= p.sum(axis=1, keepdims=True)
    return p @ v
