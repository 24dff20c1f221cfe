"""Training loop, evaluation and the composite objective wiring."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import tensor as T
from ..encoders import EncoderConfig
from ..fusion import FusionFlags
from ..losses import (LossBreakdown, LossWeights, batch_contrastive_loss, cls_loss, reg_loss,
                      sent_loss, temporal_loss, total_loss)
from ..metrics import MFQConfig, accuracy, macro_f1, mfq, tcs
from ..model import FlowFusionModel, ModelOutput
from . import checkpoint
from .data import Dataset, SyntheticDatasetConfig
from .optim import Adam

log = logging.getLogger(__name__)

LOG_KEYS = ("epoch", "cls", "sent", "temp", "cont", "reg", "total", "acc", "f1", "tcs", "mfq")


class DivergenceError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-5
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    levels: int = 3
    model_dim: int = 16
    d_out: int = 16
    windows: int = 4
    tau: float = 0.5
    val_fraction: float = 0.2
    reduction: str = "mean"
    reg_target: str = "competition"
    freeze: tuple[str, ...] = ()
    loss: LossWeights = field(default_factory=LossWeights)
    flags: FusionFlags = field(default_factory=FusionFlags)
    mfq: MFQConfig = field(default_factory=MFQConfig)

    def __post_init__(self):
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("learning_rate and weight_decay must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        self.freeze = tuple(self.freeze)


def config_snapshot(data_cfg: SyntheticDatasetConfig, cfg: TrainConfig) -> dict:
    return {"data": asdict(data_cfg), "train": asdict(cfg)}


def train_config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    d["loss"] = LossWeights(**d["loss"])
    d["flags"] = FusionFlags(**d["flags"])
    d["mfq"] = MFQConfig(**d["mfq"])
    d["freeze"] = tuple(d["freeze"])
    return TrainConfig(**d)


def build_model(data_cfg: SyntheticDatasetConfig, cfg: TrainConfig) -> FlowFusionModel:
    enc = EncoderConfig(levels=cfg.levels, model_dim=cfg.model_dim, text_len=data_cfg.text_len,
                        video_len=data_cfg.video_len, raw_dim=data_cfg.raw_dim,
                        vocab_size=data_cfg.vocab_size, seed=cfg.seed)
    return FlowFusionModel(enc, data_cfg.num_classes, data_cfg.num_sentiments, cfg.d_out,
                           cfg.windows, cfg.flags, cfg.seed)


def compute_losses(model: FlowFusionModel, out: ModelOutput, batch: Dataset, cfg: TrainConfig,
                   params=None) -> LossBreakdown:
    params = model.trainable(cfg.freeze) if params is None else params
    return total_loss(
        cls_loss(out.class_probs, batch.classes, cfg.reduction),
        sent_loss(out.sent_probs, batch.sentiments, cfg.reduction),
        temporal_loss(out.fusion.frame_features),
        batch_contrastive_loss(out.fused, batch.classes, cfg.tau),
        reg_loss(params, out.fusion.records, cfg.reg_target),
        cfg.loss,
    )


def batch_loss(model: FlowFusionModel, batch: Dataset, cfg: TrainConfig, params=None) -> LossBreakdown:
    return compute_losses(model, model(batch.tokens, batch.frames), batch, cfg, params)


def evaluate(model: FlowFusionModel, data: Dataset, cfg: TrainConfig) -> dict[str, float | None]:
    out = model(data.tokens, data.frames)
    pred = out.class_probs.data.argmax(axis=-1)
    sent_pred = out.sent_probs.data.argmax(axis=-1)
    metrics: dict[str, float | None] = {
        "acc": accuracy(pred, data.classes),
        "f1": macro_f1(sent_pred, data.sentiments, classes=range(out.sent_probs.shape[-1])),
        "tcs": tcs(out.frame_class_probs.data),
    }
    video = out.pyramid.video[0].data.mean(axis=-2)
    text = out.pyramid.text[0].data.mean(axis=-2)
    try:
        metrics["mfq"] = mfq(out.fused.data, video, text, cfg.mfq)
    except ValueError as exc:  # too few samples or degenerate covariance
        log.debug("MFQ unavailable: %s", exc)
        metrics["mfq"] = None
    return metrics


@dataclass
class TrainResult:
    history: list[dict]
    best: checkpoint.Checkpoint
    best_epoch: int
    model: FlowFusionModel

    @property
    def best_metrics(self) -> dict:
        return self.history[self.best_epoch - 1]


def _snapshot(model: FlowFusionModel, opt: Adam, rng: np.random.Generator, config: dict) -> checkpoint.Checkpoint:
    return checkpoint.Checkpoint(
        params=model.store.state(),
        adam_m={k: v.copy() for k, v in opt.state.m.items()},
        adam_v={k: v.copy() for k, v in opt.state.v.items()},
        adam_step=opt.state.step,
        rng_state=rng.bit_generator.state,
        config=config,
    )


def metrics_jsonl(history: list[dict]) -> str:
    return "".join(json.dumps({k: row[k] for k in LOG_KEYS}) + "\n" for row in history)


def train(data: Dataset, data_cfg: SyntheticDatasetConfig, cfg: TrainConfig,
          model: FlowFusionModel | None = None, log_path=None) -> TrainResult:
    """Optimise the weighted objective; keep the checkpoint with best validation accuracy."""
    model = build_model(data_cfg, cfg) if model is None else model
    train_set, val_set = data.split(cfg.val_fraction)
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("dataset too small for the train/validation split")
    params = model.trainable(cfg.freeze)
    opt = Adam(params, cfg.learning_rate, cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed)
    snapshot_cfg = config_snapshot(data_cfg, cfg)
    history: list[dict] = []
    best, best_epoch, best_acc = None, 0, -1.0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train_set))
        sums = dict.fromkeys(("cls", "sent", "temp", "cont", "reg", "total"), 0.0)
        batches = 0
        try:
            for start in range(0, len(order), cfg.batch_size):
                batch = train_set.subset(order[start:start + cfg.batch_size])
                opt.zero_grad()
                losses = batch_loss(model, batch, cfg, params)
                T.backward(losses.total)
                for k, v in losses.values().items():
                    sums[k] += v
                batches += 1
                opt.step()
            for p in params:
                if not np.all(np.isfinite(p.data)):
                    raise T.NonFiniteError(f"parameter {p.name} became non-finite")
            row = {"epoch": epoch, **{k: v / batches for k, v in sums.items()}, **evaluate(model, val_set, cfg)}
        except (T.NonFiniteError, T.DivisionGuardError) as exc:
            raise DivergenceError(f"training diverged in epoch {epoch}: {exc}") from exc
        history.append(row)
        log.info("epoch %d total=%.4f acc=%.3f", epoch, row["total"], row["acc"])
        if row["acc"] > best_acc:
            best, best_epoch, best_acc = _snapshot(model, opt, rng, snapshot_cfg), epoch, row["acc"]
        if log_path is not None:
            checkpoint.atomic_write(log_path, metrics_jsonl(history))
    return TrainResult(history, best, best_epoch, model)


def restore_model(ckpt: checkpoint.Checkpoint) -> tuple[FlowFusionModel, SyntheticDatasetConfig, TrainConfig]:
    """Rebuild the model a checkpoint was taken from and load its parameters."""
    data_cfg = SyntheticDatasetConfig(**ckpt.config["data"])
    cfg = train_config_from_dict(ckpt.config["train"])
    model = build_model(data_cfg, cfg)
    model.store.load_state(ckpt.params)
    return model, data_cfg, cfg


def with_flags(cfg: TrainConfig, flags: FusionFlags) -> TrainConfig:
    return replace(cfg, flags=flags)


__all__ = ["TrainConfig", "TrainResult", "DivergenceError", "train", "evaluate", "build_model",
           "batch_loss", "compute_losses", "restore_model", "metrics_jsonl", "LOG_KEYS"]
