"""Finite-difference verification of the full objective, per parameter group."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .config import RunConfig
from .harness.data import generate_dataset
from .harness.training import batch_loss, build_model
from .tensor import finite_difference_check

MAX_DIM = 8
MAX_LEVELS = 3
TOLERANCE = 1e-4
STEP = 1e-5


class GradcheckRefused(ValueError):
    pass


def tiny_config() -> RunConfig:
    cfg = RunConfig()
    data = replace(cfg.data, num_samples=24, text_len=8, video_len=8, raw_dim=4, vocab_size=16,
                   noise_sigma=0.5)
    train = replace(cfg.train, levels=2, model_dim=4, d_out=4, windows=2)
    return RunConfig(data, train)


def _probe_batch(data, classes: int = 3, per_class: int = 2):
    picks = []
    for c in range(min(classes, data.classes.max() + 1)):
        picks.extend(np.flatnonzero(data.classes == c)[:per_class])
    return data.subset(np.array(picks))


def run_gradcheck(cfg: RunConfig, h: float = STEP) -> dict[str, float]:
    """Max relative error (analytic vs central difference) for every parameter group."""
    if cfg.train.model_dim > MAX_DIM or cfg.train.levels > MAX_LEVELS:
        raise GradcheckRefused(
            f"gradcheck needs model_dim <= {MAX_DIM} and levels <= {MAX_LEVELS} "
            f"(got {cfg.train.model_dim}, {cfg.train.levels})"
        )
    data_cfg = replace(cfg.data, num_samples=max(cfg.data.num_samples, 2 * cfg.data.num_classes))
    batch = _probe_batch(generate_dataset(data_cfg))
    model = build_model(data_cfg, cfg.train)
    params = model.trainable(cfg.train.freeze)

    def loss():
        return batch_loss(model, batch, cfg.train, params).total

    errors: dict[str, float] = {}
    for p in params:
        group = p.name.split(".", 1)[0]
        errors[group] = max(errors.get(group, 0.0), finite_difference_check(loss, p, h))
    return errors
