"""Benchmark the compiled kernels against the pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py
"""
import time

import numpy as np

from vcsellink import _kernels_py as pyk

try:
    from vcsellink import _kernels as ck
except ImportError:
    ck = None


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_prbs(impl):
    init = np.zeros(31, dtype=np.uint8)
    init[0] = 1
    return lambda: impl.prbs_fill(init, 3, 31, 2_000_000)


def bench_lms(impl):
    rng = np.random.default_rng(0)
    n, nlin, mem = 100_000, 201, 11
    xp = np.zeros(n + 2 * nlin)
    xp[nlin:nlin + n] = rng.standard_normal(n)
    targets = rng.choice(np.arange(7) * 2.0 - 6.0, n)

    def run():
        wlin = np.zeros(nlin)
        wlin[nlin // 2] = 1.0
        y = np.empty(n)
        impl.lms_run(xp, nlin, n, targets, n // 2, wlin, nlin // 2,
                     np.zeros(mem), np.zeros(mem - 1), 1e-3, 1e-4, 1,
                     -6.0, 2.0, 7, y)
    return run


def bench_viterbi(impl):
    rng = np.random.default_rng(0)
    lv = np.arange(6) * 2.0 - 5.0
    targets = np.ascontiguousarray(np.add.outer(lv, lv))
    z = rng.uniform(-11, 11, 500_000)
    bp = np.empty((len(z), 6), dtype=np.int8)
    bs = np.empty(len(z), dtype=np.int8)
    return lambda: impl.viterbi_forward(z, targets, 0, bp, bs)


def main():
    rows = []
    for name, make in [("prbs_fill (2M bits)", bench_prbs),
                       ("lms_run (100k syms, 222 feat)", bench_lms),
                       ("viterbi_forward (500k, M=6)", bench_viterbi)]:
        t_py = _time(make(pyk))
        if ck is not None:
            t_c = _time(make(ck))
            rows.append((name, t_py, t_c, t_py / t_c))
        else:
            rows.append((name, t_py, None, None))

    print(f"{'kernel':<32}{'python':>10}{'compiled':>10}{'speedup':>9}")
    for name, t_py, t_c, sp in rows:
        if t_c is None:
            print(f"{name:<32}{t_py:>9.3f}s{'n/a':>10}{'n/a':>9}")
        else:
            print(f"{name:<32}{t_py:>9.3f}s{t_c:>9.3f}s{sp:>8.1f}x")
    if ck is None:
        print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
