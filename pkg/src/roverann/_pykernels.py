"""Pure-Python (numpy) kernels for forward propagation and momentum back-propagation.

Every function works in place on lists of float64 weight matrices laid out as
``(destination, source + 1)`` with the bias weight in the last column.
Activation kinds are encoded as ints: ``0`` sigmoid, ``1`` linear.

The compiled module ``_ckernels`` exposes the same functions with the same
signatures; ``roverann.kernels`` picks one of the two at import time.
"""

import numpy as np

from .errors import NonFiniteError

SIGMOID = 0
LINEAR = 1


def activate(net, kind):
    if kind == LINEAR:
        return net.copy()
    # split by sign so exp never overflows
    e = np.exp(-np.abs(net))
    return np.where(net >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def activation_slope(out, kind):
    """Derivative of the activation expressed through its output."""
    if kind == LINEAR:
        return np.ones_like(out)
    return out * (1.0 - out)


def forward(weights, x, bias, kinds):
    """Return ``(nets, outs)``, one vector per non-input layer."""
    nets, outs = [], []
    src = np.asarray(x, dtype=np.float64)
    for W, kind in zip(weights, kinds):
        net = W[:, :-1] @ src + bias * W[:, -1]
        out = activate(net, kind)
        nets.append(net)
        outs.append(out)
        src = out
    return nets, outs


def apply_layer_update(W, D, src, signal, eta, alpha, bias):
    """Momentum step for one weight matrix.

    ``dW[i, j] = alpha * D[i, j] + eta * src[j] * signal[i]`` where the bias
    column uses ``bias`` as its source value. ``D`` is overwritten with ``dW``.
    """
    src_ext = np.append(src, bias)
    dW = alpha * D + (eta * src_ext)[None, :] * signal[:, None]
    W += dW
    D[...] = dW
    if not np.isfinite(W).all():
        raise NonFiniteError("non-finite weight produced by update")


def backward_signal(W_next, signal_next, out, kind):
    """Error signal of a hidden layer from the layer above it.

    ``out * (1 - out) * sum_k signal_k * W_next[k, j]`` for sigmoid units.
    """
    return activation_slope(out, kind) * (W_next[:, :-1].T @ signal_next)


def backprop(weights, deltas, x, desired, eta, alpha, bias, kinds, sequential, trace=None):
    """One back-propagation step for a single pattern, mutating ``weights`` and ``deltas``.

    With ``sequential`` the output layer is updated first and each lower layer
    reads the already-updated weights above it. Otherwise every signal is
    computed from the pre-update weights before anything is changed.
    Returns the error vector ``desired - output``.
    """
    # overflow surfaces as NonFiniteError from apply_layer_update
    with np.errstate(over="ignore", invalid="ignore"):
        return _backprop(weights, deltas, x, desired, eta, alpha, bias, kinds, sequential, trace)


def _backprop(weights, deltas, x, desired, eta, alpha, bias, kinds, sequential, trace):
    x = np.asarray(x, dtype=np.float64)
    if trace is None:
        trace = forward(weights, x, bias, kinds)
    _, outs = trace
    err = np.asarray(desired, dtype=np.float64) - outs[-1]
    L = len(weights)
    srcs = [x] + outs[:-1]
    signal = err * activation_slope(outs[-1], kinds[-1])

    if sequential:
        for l in range(L - 1, -1, -1):
            apply_layer_update(weights[l], deltas[l], srcs[l], signal, eta, alpha, bias)
            if l > 0:
                signal = backward_signal(weights[l], signal, outs[l - 1], kinds[l - 1])
    else:
        signals = [None] * L
        signals[-1] = signal
        for l in range(L - 1, 0, -1):
            signals[l - 1] = backward_signal(weights[l], signals[l], outs[l - 1], kinds[l - 1])
        for l in range(L):
            apply_layer_update(weights[l], deltas[l], srcs[l], signals[l], eta, alpha, bias)
    return err


def max_abs_errors(weights, X, T, bias, kinds):
    """Max-abs output error of every pattern, weights untouched."""
    res = np.empty(len(X))
    for p in range(len(X)):
        _, outs = forward(weights, X[p], bias, kinds)
        res[p] = np.max(np.abs(T[p] - outs[-1]))
    return res


def train_epoch(weights, deltas, X, T, eta, alpha, bias, kinds, sequential, threshold):
    """Sweep the patterns in order, updating only where the error exceeds ``threshold``.

    Returns the pre-update max-abs error of every pattern and the number of
    back-propagation steps taken.
    """
    seen = np.empty(len(X))
    n_updates = 0
    for p in range(len(X)):
        trace = forward(weights, X[p], bias, kinds)
        seen[p] = np.max(np.abs(T[p] - trace[1][-1]))
        if seen[p] > threshold:
            backprop(weights, deltas, X[p], T[p], eta, alpha, bias, kinds, sequential, trace)
            n_updates += 1
    return seen, n_updates
