"""
Time the compiled energy kernel against the numpy fallback.

    python benchmarks/bench_kernels.py --trials 20000 --N 500 --repeat 5

Both kernels consume the same random stream, so the script also checks that
their outputs match bit for bit.
"""

import argparse
import math
import time

import numpy as np

from energysimo import _fallback

try:
    from energysimo import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--N", type=int, default=500)
    ap.add_argument("--K", type=float, default=50.0)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    K = args.K
    kargs = (args.p, math.sqrt(K / (K + 1)), math.sqrt(0.5 / (K + 1)),
             math.sqrt(0.5), args.N)
    normals = 4 * args.trials * args.N

    backends = {"python": _fallback.sample_energies}
    if _kernels is not None:
        backends["cython"] = _kernels.sample_energies

    outputs = {}
    print(f"trials={args.trials} N={args.N} ({normals:.3g} normals per run)")
    for name, fn in backends.items():
        out = np.empty(args.trials)
        t = best_time(lambda: fn(np.random.PCG64DXSM(1), *kargs, out),
                      args.repeat)
        outputs[name] = out.copy()
        print(f"{name:>7}: {t * 1e3:9.1f} ms  {t / normals * 1e9:6.2f} ns/normal")

    if "cython" in outputs:
        same = np.array_equal(outputs["cython"], outputs["python"])
        print(f"outputs identical: {same}")
    else:
        print("compiled kernel not available")


if __name__ == "__main__":
    main()
