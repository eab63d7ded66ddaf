"""Compiled and numpy kernels must agree; the fallback must be selectable."""

import os
import subprocess
import sys

import numpy as np
import pytest

from roverann import _pykernels, kernels
from roverann.errors import NonFiniteError

try:
    from roverann import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def make(rng, sizes):
    W = [rng.uniform(-1, 1, (sizes[i + 1], sizes[i] + 1)) for i in range(len(sizes) - 1)]
    kinds = tuple([0] * (len(W) - 1) + [1])
    return W, kinds


@pytest.mark.parametrize("sizes", [(2, 3, 2), (3, 5, 4, 2), (1, 1), (4, 6, 3)])
def test_forward_matches_loops(backend, rng, sizes):
    from oracles import forward_loops

    W, kinds = make(rng, sizes)
    x = rng.uniform(-1, 1, sizes[0])
    nets, outs = backend.forward(W, x, 1.0, kinds)
    ref = forward_loops([w.tolist() for w in W], x.tolist())
    for o, r in zip(outs, ref):
        np.testing.assert_allclose(o, r, atol=1e-13)
    np.testing.assert_allclose(outs[-1], nets[-1])


@needs_ext
@pytest.mark.parametrize("sizes", [(2, 3, 2), (3, 5, 4, 2)])
@pytest.mark.parametrize("sequential", [True, False])
def test_backprop_parity(rng, sizes, sequential):
    W, kinds = make(rng, sizes)
    W2 = [w.copy() for w in W]
    D = [rng.normal(scale=0.1, size=w.shape) for w in W]
    D2 = [d.copy() for d in D]
    for _ in range(5):
        x, t = rng.uniform(-1, 1, sizes[0]), rng.uniform(-1, 1, sizes[-1])
        e1 = _pykernels.backprop(W, D, x, t, 0.3, 0.8, 1.0, kinds, sequential)
        e2 = _ckernels.backprop(W2, D2, x, t, 0.3, 0.8, 1.0, kinds, sequential)
        np.testing.assert_allclose(e1, e2, atol=1e-12)
    for a, b in zip(W + D, W2 + D2):
        np.testing.assert_allclose(a, b, atol=1e-12)


@needs_ext
@pytest.mark.parametrize("threshold", [0.0, 0.3])
def test_epoch_parity(rng, threshold):
    W, kinds = make(rng, (2, 3, 2))
    W2 = [w.copy() for w in W]
    D, D2 = [np.zeros_like(w) for w in W], [np.zeros_like(w) for w in W]
    X, T = rng.uniform(-1, 1, (200, 2)), rng.uniform(-1, 1, (200, 2))
    s1, n1 = _pykernels.train_epoch(W, D, X, T, 0.25, 0.9, 1.0, kinds, True, threshold)
    s2, n2 = _ckernels.train_epoch(W2, D2, X, T, 0.25, 0.9, 1.0, kinds, True, threshold)
    assert n1 == n2
    np.testing.assert_allclose(s1, s2, atol=1e-10)
    for a, b in zip(W + D, W2 + D2):
        np.testing.assert_allclose(a, b, atol=1e-10)
    np.testing.assert_allclose(_pykernels.max_abs_errors(W, X, T, 1.0, kinds),
                               _ckernels.max_abs_errors(W2, X, T, 1.0, kinds), atol=1e-10)


def test_skip_leaves_state(backend, rng):
    W, kinds = make(rng, (2, 3, 2))
    D = [rng.normal(size=w.shape) for w in W]
    W0, D0 = [w.copy() for w in W], [d.copy() for d in D]
    X, T = rng.uniform(-1, 1, (5, 2)), rng.uniform(-1, 1, (5, 2))
    seen, n = backend.train_epoch(W, D, X, T, 0.25, 0.9, 1.0, kinds, True, 1e9)
    assert n == 0
    assert seen.shape == (5,)
    for a, b in zip(W + D, W0 + D0):
        np.testing.assert_array_equal(a, b)


def test_non_finite_raises(backend):
    def huge():
        return [np.full((3, 3), 1e300), np.full((2, 4), 1e300)], [np.zeros((3, 3)),
                                                                  np.zeros((2, 4))]

    W, D = huge()
    with pytest.raises(NonFiniteError):
        backend.backprop(W, D, np.ones(2), np.zeros(2), 1.0, 0.0, 1.0, (0, 1), True)
    W, D = huge()
    with pytest.raises(NonFiniteError):
        backend.train_epoch(W, D, np.ones((2, 2)), np.zeros((2, 2)), 1.0, 0.0, 1.0, (0, 1),
                            True, 0.0)


def test_selected_backend():
    expected = "python" if (_ckernels is None or os.environ.get("ROVERANN_PURE_PYTHON")) \
        else "cython"
    assert kernels.BACKEND == expected


def test_fallback_forced_by_env():
    env = dict(os.environ, ROVERANN_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import roverann.kernels as k; print(k.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "python"
