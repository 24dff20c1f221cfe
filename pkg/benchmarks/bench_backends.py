"""Compare the compiled and pure-Python attention kernels.

    python3 benchmarks/bench_backends.py [--dim 32] [--lengths 256,1024,4096] [--trials 5]

Prints median seconds per (kernel, backend, n) and the python/compiled ratio.
Outputs of the two backends are checked against each other before timing.
"""

import argparse
import sys

import numpy as np

from flowfusion import kernels
from flowfusion.bench import _median_time

KERNELS = ("flow_attention_factorized", "flow_attention_quadratic", "softmax_attention")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--lengths", default="256,1024,4096")
    ap.add_argument("--trials", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'n':>6}{'compiled_s':>14}{'python_s':>14}{'ratio':>8}")
    for n in (int(x) for x in args.lengths.split(",")):
        q, k, v = (rng.normal(size=(n, args.dim)) / np.sqrt(args.dim) for _ in range(3))
        for name in KERNELS:
            fns = {b: getattr(kernels.get_backend(b), name) for b in ("compiled", "python")}
            a, b = fns["compiled"](q, k, v), fns["python"](q, k, v)
            a, b = (a[0], b[0]) if isinstance(a, tuple) else (a, b)
            if not np.allclose(a, b, rtol=1e-10, atol=1e-14):
                print(f"{name} n={n}: backends disagree", file=sys.stderr)
                return 4
            t = {b: _median_time(fn, (q, k, v), args.trials) for b, fn in fns.items()}
            print(f"{name:<28}{n:>6}{t['compiled']:>14.6f}{t['python']:>14.6f}"
                  f"{t['python'] / t['compiled']:>8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
