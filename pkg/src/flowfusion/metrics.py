"""Evaluation metrics: accuracy, F1, temporal consistency and fusion quality."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COV_RIDGE = 1e-6


@dataclass
class MFQConfig:
    alpha: float = 0.5
    mi_bins: int = 16
    cca_rank: int = 1
    mi_mode: str = "pairwise"  # or "joint": MI(f; concat(v, t))

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"MFQ alpha must lie in [0, 1], got {self.alpha}")
        if self.mi_bins < 1 or self.cca_rank < 1:
            raise ValueError("mi_bins and cca_rank must be positive")
        if self.mi_mode not in ("pairwise", "joint"):
            raise ValueError(f"unknown mi_mode {self.mi_mode!r}")


def accuracy(predictions, labels) -> float:
    p, y = np.asarray(predictions).reshape(-1), np.asarray(labels).reshape(-1)
    if p.size == 0:
        raise ValueError("accuracy of an empty prediction set")
    if p.shape != y.shape:
        raise ValueError(f"{p.size} predictions for {y.size} labels")
    return float(np.mean(p == y))


def f1(predictions, labels, positive_class) -> float:
    """Binary F1 for ``positive_class``; 0 when precision + recall is 0."""
    p, y = np.asarray(predictions).reshape(-1), np.asarray(labels).reshape(-1)
    if p.size == 0:
        raise ValueError("F1 of an empty prediction set")
    tp = np.sum((p == positive_class) & (y == positive_class))
    fp = np.sum((p == positive_class) & (y != positive_class))
    fn = np.sum((p != positive_class) & (y == positive_class))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


def macro_f1(predictions, labels, classes=None) -> float:
    """Unweighted mean of per-class F1 over ``classes`` (default: all seen)."""
    p, y = np.asarray(predictions).reshape(-1), np.asarray(labels).reshape(-1)
    if classes is None:
        classes = np.union1d(p, y)
    return float(np.mean([f1(p, y, c) for c in classes]))


def _unit(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cosine similarity of a zero-norm row")
    return x / norms


def tcs(predictions) -> float:
    """Mean cosine similarity between consecutive frame predictions.

    Accepts one sequence ``(frames, d)`` or a batch ``(B, frames, d)``; a
    batch is averaged over sequences.
    """
    x = np.asarray(predictions, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] < 2:
        raise ValueError("TCS needs at least two frames")
    u = _unit(x)
    return float(np.mean(np.sum(u[:, 1:] * u[:, :-1], axis=-1)))


def _inv_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() <= 1e-12 * max(vals.max(), 1e-300):
        raise ValueError("degenerate covariance in CCA")
    return (vecs / np.sqrt(vals)) @ vecs.T


def canonical_correlations(v, t) -> np.ndarray:
    """All canonical correlations of two views, largest first."""
    v = np.asarray(v, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    v = v.reshape(len(v), -1)
    t = t.reshape(len(t), -1)
    if len(v) != len(t):
        raise ValueError("CCA views need the same number of samples")
    n = len(v)
    vc, tc = v - v.mean(axis=0), t - t.mean(axis=0)
    cvv, ctt, cvt = vc.T @ vc / (n - 1), tc.T @ tc / (n - 1), vc.T @ tc / (n - 1)
    if n <= max(v.shape[1], t.shape[1]):
        cvv = cvv + COV_RIDGE * np.eye(len(cvv))
        ctt = ctt + COV_RIDGE * np.eye(len(ctt))
    return np.linalg.svd(_inv_sqrt(cvv) @ cvt @ _inv_sqrt(ctt), compute_uv=False)


def cca_score(v, t, rank: int = 1) -> float:
    corr = canonical_correlations(v, t)[:rank]
    return float(np.clip(np.mean(corr), 0.0, 1.0))


def principal_projection(x) -> np.ndarray:
    """Scores on the first principal axis (the column itself when 1-D)."""
    x = np.asarray(x, dtype=np.float64)
    x = x.reshape(len(x), -1)
    xc = x - x.mean(axis=0)
    if x.shape[1] == 1:
        return xc[:, 0]
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    return xc @ vt[0]


def histogram_nmi(a, b, bins: int) -> float:
    """Equal-width histogram mutual information normalised by sqrt(H(a) H(b))."""
    joint, _, _ = np.histogram2d(a, b, bins=bins)
    pj = joint / joint.sum()
    pa, pb = pj.sum(axis=1), pj.sum(axis=0)
    nz = pj > 0
    mi = np.sum(pj[nz] * np.log(pj[nz] / np.outer(pa, pb)[nz]))
    ha = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    hb = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    if ha <= 0 or hb <= 0:
        return 0.0
    return float(np.clip(mi / np.sqrt(ha * hb), 0.0, 1.0))


def mi_score(f, v, t, bins: int = 16, mode: str = "pairwise") -> float:
    n = len(f)
    if n < 4 * bins:
        raise ValueError(f"mi_score needs at least {4 * bins} samples, got {n}")
    if len(v) != n or len(t) != n:
        raise ValueError("f, v and t need the same number of samples")
    pf = principal_projection(f)
    if mode == "pairwise":
        return 0.5 * (histogram_nmi(pf, principal_projection(v), bins)
                      + histogram_nmi(pf, principal_projection(t), bins))
    if mode == "joint":
        vt = np.concatenate([np.reshape(v, (n, -1)), np.reshape(t, (n, -1))], axis=1)
        return histogram_nmi(pf, principal_projection(vt), bins)
    raise ValueError(f"unknown mi mode {mode!r}")


def mfq(f, v, t, cfg: MFQConfig = MFQConfig()) -> float:
    """``alpha * CCA(v, t) + (1 - alpha) * MI(f, v, t)``."""
    cca = cca_score(v, t, cfg.cca_rank) if cfg.alpha > 0 else 0.0
    mi = mi_score(f, v, t, cfg.mi_bins, cfg.mi_mode) if cfg.alpha < 1 else 0.0
    return float(cfg.alpha * cca + (1.0 - cfg.alpha) * mi)
