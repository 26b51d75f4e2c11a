"""Time the compiled kernels against the numpy/pure-Python fallback.

Run with ``python bench/bench_core.py``. Both implementations are imported
directly, so the environment switch does not matter here.
"""

import time

import numpy as np

from ragoose import _fallback
from ragoose.benchmarks.axis import PlantModel, scurve_reference

try:
    from ragoose import _core
except ImportError:
    _core = None


def best_of(fn, repeat=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    if _core is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    ref = scurve_reference()
    Ad, Bd, Cy = PlantModel().discretize()
    noise = np.zeros(len(ref))
    args = (Ad, Bd, Cy, ref.p, ref.v, ref.a, noise, 300.0, 600.0, 1000.0, 0.0, 1.0,
            20000.0, 1, 1e-3)
    cases = [("simulate_loop (8001 steps)", lambda m: m.simulate_loop(*args), 3)]
    for n1, n2, d in [(50, 50, 2), (2000, 200, 2), (20000, 200, 4)]:
        X1, X2 = rng.uniform(size=(n1, d)), rng.uniform(size=(n2, d))
        inv = np.full(d, 2.0)
        cases.append((f"rbf_cross {n1}x{n2}, d={d}",
                      lambda m, X1=X1, X2=X2, inv=inv: m.rbf_cross(X1, X2, inv, 1.5), 5))
    for n in (50, 200):
        X = rng.uniform(size=(n, 1))
        cases.append((f"rbf_gram {n}x{n}, d=1",
                      lambda m, X=X: m.rbf_gram(X, np.array([2.0]), 1.5), 5))
    print(f"{'kernel':34s} {'compiled [ms]':>14s} {'fallback [ms]':>14s} {'speed-up':>9s}")
    for name, call, repeat in cases:
        tc = best_of(lambda: call(_core), repeat)
        tf = best_of(lambda: call(_fallback), repeat)
        print(f"{name:34s} {1e3 * tc:14.3f} {1e3 * tf:14.3f} {tf / tc:9.1f}")


if __name__ == "__main__":
    main()
