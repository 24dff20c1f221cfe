"""Wall-clock scaling of factorised flow attention against quadratic baselines."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels

METHODS = ("factorized", "oracle", "softmax")


@dataclass
class BenchRow:
    method: str
    n: int
    d: int
    trials: int
    median_seconds: float


class EquivalenceError(AssertionError):
    pass


def _median_time(fn, args, trials: int) -> float:
    times = []
    for _ in range(trials):
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def loglog_slope(ns, seconds) -> float:
    return float(np.polyfit(np.log(ns), np.log(seconds), 1)[0])


def run_attention_benchmark(dim: int, lengths, trials: int = 3, backend: str = "auto",
                            gate_max: int = 1024, seed: int = 0, rtol: float = 1e-10):
    """Time each method at n = m for every length; returns ``(rows, slopes)``.

    Before timing a length ``<= gate_max`` the factorised and quadratic
    outputs must agree to ``rtol`` (relative to the largest output entry).
    """
    lengths = sorted(int(n) for n in lengths)
    if len(lengths) < 2:
        raise ValueError("need at least two lengths to fit a slope")
    kern = kernels.get_backend(backend)
    fns = {"factorized": kern.flow_attention_factorized,
           "oracle": kern.flow_attention_quadratic,
           "softmax": kern.softmax_attention}
    rng = np.random.default_rng(seed)
    rows: list[BenchRow] = []
    for n in lengths:
        q, k, v = (rng.normal(size=(n, dim)) / np.sqrt(dim) for _ in range(3))
        if n <= gate_max:
            fast = kern.flow_attention_factorized(q, k, v)[0]
            slow = kern.flow_attention_quadratic(q, k, v)[0]
            err = np.max(np.abs(fast - slow)) / max(np.max(np.abs(slow)), 1e-300)
            if err > rtol:
                raise EquivalenceError(f"n={n}: factorised and quadratic outputs differ (rel {err:.3g})")
        for method in METHODS:
            fns[method](q, k, v)  # warm-up
            rows.append(BenchRow(method, n, dim, trials, _median_time(fns[method], (q, k, v), trials)))
    slopes = {m: loglog_slope([r.n for r in rows if r.method == m],
                              [r.median_seconds for r in rows if r.method == m]) for m in METHODS}
    return rows, slopes


def to_csv(rows: list[BenchRow], slopes: dict[str, float]) -> str:
    lines = ["method,n,d,trials,median_seconds"]
    lines += [f"{r.method},{r.n},{r.d},{r.trials},{r.median_seconds:.9g}" for r in rows]
    lines.append("method,slope")
    lines += [f"{m},{s:.6f}" for m, s in slopes.items()]
    return "\n".join(lines) + "\n"
