"""Time the compiled kernels against the Python fallback.

    python benchmarks/bench_kernels.py [--rows 20000] [--dim 256] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from ragnodes import kernels


def cases(rows: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((rows, dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    query = matrix[0].copy()
    lengths = rng.integers(1, 10, size=rows // 4)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    values = rng.choice([0.0, 0.2, 0.4, 0.6, 0.8, 1.0], size=int(offsets[-1]))
    relevance = (values >= 0.6).astype(np.float64)
    mask = rng.random(rows) < 0.5
    return {
        "topk k=5": lambda impl: impl.topk(matrix, query, 5, None),
        "topk k=5 masked": lambda impl: impl.topk(matrix, query, 5, mask),
        "mean_of_means": lambda impl: impl.mean_of_means(values, offsets),
        "contextual_precision": lambda impl: impl.contextual_precision(relevance, offsets),
    }


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    names = kernels.available_backends()
    print(f"rows={args.rows} dim={args.dim} backends={names}")
    print(f"{'kernel':<24}" + "".join(f"{n + ' ms':>14}" for n in names) + f"{'speedup':>10}")
    for label, fn in cases(args.rows, args.dim).items():
        best = {}
        for name in names:
            impl = kernels.implementation(name)
            fn(impl)  # warm up
            best[name] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)) * 1e3
        ratio = f"{best['python'] / best['cython']:>9.1f}x" if "cython" in best else f"{'n/a':>10}"
        print(f"{label:<24}" + "".join(f"{best[n]:>14.3f}" for n in names) + ratio)


if __name__ == "__main__":
    main()
