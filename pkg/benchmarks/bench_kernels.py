"""Compare the compiled and pure-Python kernels on the hot paths.

    python3 benchmarks/bench_kernels.py [--patterns N] [--repeat R]

Both backends get identical inputs; the script also checks that they agree
on the resulting weights before reporting timings.
"""

import argparse
import timeit

import numpy as np

from roverann import _pykernels
from roverann.network import Network

try:
    from roverann import _ckernels
except ImportError:
    _ckernels = None


def setup(n_patterns, seed=0):
    rng = np.random.default_rng(seed)
    net = Network.random((2, 3, 2), seed=seed)
    X = rng.uniform(-1, 1, (n_patterns, 2))
    T = rng.uniform(-1, 1, (n_patterns, 2))
    return net, X, T


def epoch(mod, net, X, T):
    weights = [W.copy() for W in net.weights]
    deltas = [np.zeros_like(W) for W in weights]
    mod.train_epoch(weights, deltas, X, T, 0.25, 0.9, 1.0, net.kinds, True, 0.0)
    return weights


def single_step(mod, net, x, t):
    weights = [W.copy() for W in net.weights]
    deltas = [np.zeros_like(W) for W in weights]
    mod.backprop(weights, deltas, x, t, 0.25, 0.9, 1.0, net.kinds, True)


def bench(label, fn, per, repeat):
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"  {label:<8} {best * 1e3:10.3f} ms   {best / per * 1e6:9.3f} us/pattern")
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--patterns", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the Python backend is available")
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])

    net, X, T = setup(args.patterns)
    if _ckernels:
        a, b = epoch(_pykernels, net, X, T), epoch(_ckernels, net, X, T)
        drift = max(float(np.max(np.abs(u - v))) for u, v in zip(a, b))
        print(f"max weight difference between backends after one epoch: {drift:.3e}")

    print(f"train_epoch, {args.patterns} patterns, 2-3-2, momentum 0.9")
    times = {name: bench(name, lambda m=mod: epoch(m, net, X, T), args.patterns, args.repeat)
             for name, mod in backends}
    print("backprop, one pattern including call overhead (x1000)")
    x, t = X[0], T[0]
    for name, mod in backends:
        bench(name, lambda m=mod: [single_step(m, net, x, t) for _ in range(1000)], 1000,
              args.repeat)
    if len(times) == 2:
        print(f"train_epoch speedup: {times['python'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()
