"""Compare the compiled and pure-Python kernel backends on the hot calls.

Shapes mirror the estimation pipeline: one batch of 52 subcarrier matrices
per call.  Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import argparse
import time

import numpy as np


def _time(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--batch", type=int, default=52)
    args = parser.parse_args()

    from senselab._kernels import _fallback

    try:
        from senselab._kernels import _core
    except ImportError:
        print("compiled extension not built; run pip install -e . first")
        return

    rng = np.random.default_rng(0)

    def cplx(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    tall = cplx(args.batch, 6, 4)
    herm = cplx(args.batch, 4, 4)
    herm = herm + herm.conj().transpose(0, 2, 1)
    v = _fallback.svd_batch(cplx(args.batch, 4, 2))[0][:, :, :2]
    phi, psi = _fallback.givens_decompose_batch(v)

    cases = [
        (f"svd_batch      {args.batch}x(6x4)", lambda m: m.svd_batch(tall)),
        (f"eigh_batch     {args.batch}x(4x4)", lambda m: m.eigh_batch(herm)),
        (
            f"givens round trip {args.batch}x(4x2)",
            lambda m: m.givens_reconstruct_batch(
                *m.givens_decompose_batch(v), 4, 2
            ),
        ),
    ]

    print(f"{'kernel':<28} {'compiled':>12} {'pure':>12} {'speedup':>9}")
    for label, call in cases:
        fast = _time(lambda: call(_core), args.repeats)
        slow = _time(lambda: call(_fallback), args.repeats)
        print(
            f"{label:<28} {fast * 1e3:>9.2f} ms {slow * 1e3:>9.2f} ms"
            f" {slow / fast:>8.1f}x"
        )

    u, s, w = _core.svd_batch(tall)
    uf, sf, wf = _fallback.svd_batch(tall)
    print(f"\nbackend agreement (max |sigma| gap): {np.abs(s - sf).max():.2e}")


if __name__ == "__main__":
    main()
