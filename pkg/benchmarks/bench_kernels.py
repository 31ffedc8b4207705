"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--size 128] [--repeat 5]

Prints one row per (kernel, backend) with the best-of-N wall time.
"""
import argparse
import timeit

import numpy as np

from humask import kernels
from humask.intensity import bin_edges


def cases(size):
    rng = np.random.default_rng(0)
    vol = rng.uniform(0, 1, (size, size, size)).astype(np.float32)
    edges256 = bin_edges(256)
    edges64 = bin_edges(64)
    idx = kernels.bin_indices(vol, edges64).reshape(vol.shape)
    mask = vol > 0.3
    return {
        "block_means 16^3": lambda impl: kernels.block_means(vol, (16, 16, 16), impl=impl),
        "bin_indices 256": lambda impl: kernels.bin_indices(vol, edges256, impl=impl),
        "neighbor_joint 64": lambda impl: kernels.neighbor_joint_counts(idx, mask, (1, 0, 0), 64, impl=impl),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128, help="edge length of the test volume (multiple of 16)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy fallback is available")
    print(f"volume {args.size}^3, best of {args.repeat}")
    print(f"{'kernel':<20}{'backend':<10}{'seconds':>10}{'speedup':>10}")
    for name, fn in cases(args.size).items():
        times = {}
        for bname, impl in backends.items():
            fn(impl)  # warm up
            times[bname] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        base = times["numpy"]
        for bname, t in times.items():
            print(f"{name:<20}{bname:<10}{t:>10.4f}{base / t:>9.1f}x")


if __name__ == "__main__":
    main()
