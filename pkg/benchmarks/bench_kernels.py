"""Compare the compiled and pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from strategic_lqg import _pykernels

try:
    from strategic_lqg import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    k = 5
    A = rng.normal(size=(k, k))
    H = -(A @ A.T + k * np.eye(k))
    f = rng.normal(size=k)
    counts = [24] * k
    cases = {
        "normals 10^4 episodes x 5 stages x 4 agents": lambda m: m.standard_normals(7, np.arange(10_000), 5, 4),
        f"grid argmax {np.prod(counts):.1e} points, {k} dims": lambda m: m.grid_argmax(
            H, f, 0.0, -np.ones(k) * 2, np.ones(k) * (4 / 23), counts),
    }
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':50s} " + " ".join(f"{name:>10s}" for name, _ in backends) + "   speedup")
    for label, fn in cases.items():
        times, outs = [], []
        for _, mod in backends:
            t, out = timeit(lambda: fn(mod), args.repeat)
            times.append(t)
            outs.append(out)
        speed = f"{times[0] / times[1]:8.1f}x" if len(times) > 1 else "      n/a"
        print(f"{label:50s} " + " ".join(f"{t:9.4f}s" for t in times) + f"  {speed}")
        if len(outs) > 1 and label.startswith("normals"):
            assert np.array_equal(outs[0], outs[1]), "backends disagree"
    if _ckernels is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
