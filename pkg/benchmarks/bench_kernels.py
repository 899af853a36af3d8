"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from qvcz import _kernels_py

try:
    from qvcz import _core
except ImportError:
    _core = None


def cases():
    rng = np.random.default_rng(0)
    I1 = rng.exponential(0.5, size=(1000, 2))
    I2 = rng.exponential(0.5, size=(1000, 2))
    return {
        "two_mode_pnd cutoff=20": lambda m: m.two_mode_pnd(0.4, 0.3, 0.05, 20),
        "two_mode_pnd cutoff=60": lambda m: m.two_mode_pnd(2.0, 1.5, 1.0, 60),
        "poisson_mixture 1000x2 cutoff=20": lambda m: m.poisson_mixture_accumulate(I1, I2, 20),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=20)
    args = parser.parse_args()
    backends = {"python": _kernels_py}
    if _core is not None:
        backends["cython"] = _core
    else:
        print("compiled core not built; timing the fallback only")
    print(f"{'kernel':36s} " + " ".join(f"{b:>12s}" for b in backends) + "     speedup")
    for name, fn in cases().items():
        times = {}
        for label, mod in backends.items():
            t = min(timeit.repeat(lambda: fn(mod), repeat=args.repeat, number=args.number))
            times[label] = t / args.number
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        cols = " ".join(f"{1e3 * t:10.3f}ms" for t in times.values())
        print(f"{name:36s} {cols}  {speed:9.1f}x")


if __name__ == "__main__":
    main()
