"""``flowfusion`` command line: train, eval, ablate, bench-attention, gradcheck.

Exit codes: 0 success, 2 config/usage error, 3 divergence, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, config, kernels
from .gradcheck import TOLERANCE, GradcheckRefused, run_gradcheck, tiny_config
from .harness import checkpoint
from .harness.ablation import RESULT_KEYS, run_ablation_ladder
from .harness.data import generate_dataset
from .harness.training import DivergenceError, evaluate, restore_model, train

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 2, 3, 4

log = logging.getLogger("flowfusion")


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load_config(args, default=config.RunConfig) -> config.RunConfig:
    cfg = config.load(args.config) if args.config else default()
    cfg = config.apply_overrides(cfg, getattr(args, "overrides", []) or [])
    if getattr(args, "seed", None) is not None:
        cfg = config.RunConfig(replace(cfg.data, seed=args.seed), replace(cfg.train, seed=args.seed))
    return cfg


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint.atomic_write(out / "config.txt", config.serialize(cfg))
    data = generate_dataset(cfg.data)
    try:
        result = train(data, cfg.data, cfg.train, log_path=out / "metrics.jsonl")
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, str(exc))
    checkpoint.save(out / "checkpoint.flsh", result.best)
    best = result.best_metrics
    print(f"best epoch {result.best_epoch}: " + " ".join(
        f"{k}={best[k]:.4f}" for k in RESULT_KEYS if best[k] is not None))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        ckpt = checkpoint.load(args.checkpoint)
    except (OSError, checkpoint.CheckpointError) as exc:
        return _fail(EXIT_CONFIG, f"cannot load checkpoint {args.checkpoint}: {exc}")
    model, data_cfg, train_cfg = restore_model(ckpt)
    _, val = generate_dataset(data_cfg).split(train_cfg.val_fraction)
    print(json.dumps(evaluate(model, val, train_cfg)))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = generate_dataset(cfg.data)
    seeds = [cfg.train.seed + i for i in range(args.seeds)]
    try:
        rows = run_ablation_ladder(data, cfg.data, cfg.train, seeds=seeds, workers=args.workers)
    except DivergenceError as exc:
        return _fail(EXIT_DIVERGED, str(exc))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["config", "seed", *RESULT_KEYS], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    checkpoint.atomic_write(out / "ablation.csv", buf.getvalue())
    for row in rows:
        print(f"{row['config']:>20} seed={row['seed']} acc={row['acc']:.3f}")
    return EXIT_OK


def cmd_bench_attention(args) -> int:
    try:
        lengths = [int(x) for x in args.lengths.split(",") if x.strip()]
    except ValueError:
        return _fail(EXIT_CONFIG, f"--lengths must be comma-separated integers, got {args.lengths!r}")
    if len(lengths) < 2:
        return _fail(EXIT_CONFIG, "--lengths needs at least two values")
    try:
        rows, slopes = bench.run_attention_benchmark(args.dims, lengths, args.trials, args.backend,
                                                     args.gate_max)
    except bench.EquivalenceError as exc:
        return _fail(EXIT_VERIFY, str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    text = bench.to_csv(rows, slopes)
    if args.out:
        checkpoint.atomic_write(args.out, text)
    print(text, end="")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args, default=tiny_config)
    try:
        errors = run_gradcheck(cfg)
    except GradcheckRefused as exc:
        return _fail(EXIT_CONFIG, str(exc))
    bad = [g for g, e in errors.items() if not e <= TOLERANCE]
    for group, err in errors.items():
        print(f"{group:<14} max_rel_err={err:.3e} {'FAIL' if group in bad else 'ok'}")
    if bad:
        return _fail(EXIT_VERIFY, f"gradient check failed for: {', '.join(bad)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowfusion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on synthetic data")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on its validation split")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the component ablation ladder")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench-attention", help="attention runtime scaling benchmark")
    p.add_argument("--dims", type=int, default=32)
    p.add_argument("--lengths", default="256,512,1024,2048,4096")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--out")
    p.add_argument("--backend", default="auto", choices=["auto", *kernels.available_backends()])
    p.add_argument("--gate-max", type=int, default=1024)
    p.set_defaults(func=cmd_bench_attention)

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter group")
    p.add_argument("--config", type=Path)
    p.add_argument("overrides", nargs="*", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except config.ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))


if __name__ == "__main__":
    sys.exit(main())
