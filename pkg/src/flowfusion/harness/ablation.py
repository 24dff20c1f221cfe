"""Component ablation ladder: base, +flow, +gating, +adaptive weighting, full.

Rows differ only in :class:`~flowfusion.fusion.FusionFlags`. The first four
rows use the finest level only; ``full`` adds the multi-level hierarchy.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from ..fusion import FusionFlags
from .data import Dataset, SyntheticDatasetConfig
from .training import TrainConfig, train

LADDER: dict[str, FusionFlags] = {
    "base": FusionFlags(flow=False, gate=False, adaptive=False, hierarchy=False),
    "flow": FusionFlags(flow=True, gate=False, adaptive=False, hierarchy=False),
    "flow+gate": FusionFlags(flow=True, gate=True, adaptive=False, hierarchy=False),
    "flow+gate+adaptive": FusionFlags(flow=True, gate=True, adaptive=True, hierarchy=False),
    "full": FusionFlags(flow=True, gate=True, adaptive=True, hierarchy=True),
}

RESULT_KEYS = ("acc", "f1", "tcs", "mfq")


def _run(args) -> dict:
    name, seed, data, data_cfg, cfg = args
    result = train(data, data_cfg, replace(cfg, flags=LADDER[name], seed=seed))
    best = result.best_metrics
    return {"config": name, "seed": seed, **{k: best[k] for k in RESULT_KEYS}}


def run_ablation_ladder(data: Dataset, data_cfg: SyntheticDatasetConfig, cfg: TrainConfig,
                        seeds=(0,), configs=tuple(LADDER), workers: int = 1) -> list[dict]:
    """Train every ladder row for every seed; one result dict per (config, seed).

    Metrics are those of each run's best-validation-accuracy epoch.
    """
    jobs = [(name, seed, data, data_cfg, cfg) for name in configs for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run, jobs))
    return [_run(job) for job in jobs]
