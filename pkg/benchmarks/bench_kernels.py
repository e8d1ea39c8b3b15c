"""Compare the compiled and numpy kernels on pairwise product distances and top-k.

Usage: python3 benchmarks/bench_kernels.py [--sizes 100 300 1000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from projgraph import kernels
from projgraph.product import parse_signature, product_exp


def _inputs(n, signature, seed=0):
    sig = parse_signature(signature)
    rng = np.random.default_rng(seed)
    x = np.ascontiguousarray(product_exp(sig, rng.standard_normal((n, sig.tangent_dim))).concat())
    sizes = np.array(sig.ambient_sizes)
    stops = np.cumsum(sizes)
    codes = np.array([kernels.KIND_CODES[k.value] for k in sig.kinds], dtype=np.int64)
    return x, stops - sizes, stops, codes, np.array(sig.curvatures, dtype=float), rng.standard_normal((n, n))


def bench(impl, n, signature, repeat):
    x, starts, stops, codes, curv, G = _inputs(n, signature)
    total, comps = impl.pairwise_forward(x, starts, stops, codes, curv)
    fwd = min(timeit.repeat(lambda: impl.pairwise_forward(x, starts, stops, codes, curv), number=1, repeat=repeat))
    bwd = min(timeit.repeat(lambda: impl.pairwise_backward(G, x, starts, stops, codes, curv, total, comps),
                            number=1, repeat=repeat))
    topk = min(timeit.repeat(lambda: impl.topk_rows(G, 3), number=1, repeat=repeat))
    return fwd, bwd, topk


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 300, 1000])
    ap.add_argument("--signature", default="EHSPD")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    found = kernels.backends()
    print(f"signature {args.signature}; best of {args.repeat}; times in ms")
    print(f"{'n':>6} {'backend':>8} {'forward':>10} {'backward':>10} {'top-k':>10}")
    for n in args.sizes:
        rows = {name: bench(impl, n, args.signature, args.repeat) for name, impl in sorted(found.items())}
        for name, t in rows.items():
            print(f"{n:>6} {name:>8} " + " ".join(f"{1e3 * v:>10.2f}" for v in t))
        if "cython" in rows:
            speed = [p / c for p, c in zip(rows["python"], rows["cython"])]
            print(f"{n:>6} {'speedup':>8} " + " ".join(f"{s:>9.1f}x" for s in speed))
    if "cython" not in found:
        print("compiled extension not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
