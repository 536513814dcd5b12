"""Time the Numba kernels against the pure-NumPy fallbacks.

Run from the repository root:

    python benchmarks/bench_kernels.py

Sizes mirror the walk scales: (d, m) pairs from a desk-scale 5-step walk up
to the paper-scale 30-step one. Set QWNDO_KERNELS=numpy to confirm the
fallback is what the package then uses end to end.
"""

import time

import numpy as np

from qwndo import kernels, ndo


def best_of(fn, repeats=5, min_time=0.02):
    """Best wall-clock rate over `repeats` batches sized to ~min_time."""
    fn()  # warm-up / JIT
    t0 = time.perf_counter()
    fn()
    once = max(time.perf_counter() - t0, 1e-7)
    inner = max(1, int(min_time / once))
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def main():
    if not kernels.HAVE_NUMBA:
        print("numba unavailable or disabled (QWNDO_KERNELS=numpy): nothing to compare")
        return
    print(f"{'case':<26}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for n_steps, m in ((5, 10), (5, 15), (10, 15), (30, 15)):
        d = 2 * (n_steps + 1)
        params = ndo.init_params(d, m, m, scale=0.5, seed=0)
        arrays = params.arrays()
        t_nb = best_of(lambda: kernels.pair_cache_numba(*arrays))
        t_np = best_of(lambda: kernels.pair_cache_numpy(*arrays))
        print(f"{'pair_cache d=%d m=%d' % (d, m):<26}{t_nb * 1e3:>10.3f}ms{t_np * 1e3:>10.3f}ms{t_np / t_nb:>9.1f}x")
        ev = ndo.evaluate(params)
        args = (ev.rho, ev.sig_lam, ev.sig_mu, ev.s_pair, ev.grad_log_z)
        t_nb = best_of(lambda: kernels.assemble_jacobian_numba(*args))
        t_np = best_of(lambda: kernels.assemble_jacobian_numpy(*args))
        print(f"{'jacobian   d=%d m=%d' % (d, m):<26}{t_nb * 1e3:>10.3f}ms{t_np * 1e3:>10.3f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
