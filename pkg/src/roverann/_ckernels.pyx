# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward/back-propagation kernels.

Drop-in replacement for ``roverann._pykernels``: same function names, same
arguments, same in-place semantics on float64 C-contiguous weight matrices.
Internally all layers are packed into flat buffers so the per-pattern work
runs without touching Python objects.
"""

import numpy as np

from libc.math cimport exp, fabs, isfinite

from .errors import NonFiniteError

DEF LINEAR = 1


cdef inline double _act(double t, int kind) noexcept nogil:
    cdef double e
    if kind == LINEAR:
        return t
    if t >= 0.0:
        return 1.0 / (1.0 + exp(-t))
    e = exp(t)
    return e / (1.0 + e)


cdef inline double _slope(double y, int kind) noexcept nogil:
    if kind == LINEAR:
        return 1.0
    return y * (1.0 - y)


cdef class _Packed:
    """Weights, deltas and per-layer scratch packed into contiguous buffers.

    Layer ``l`` maps ``sizes[l]`` sources to ``sizes[l + 1]`` destinations;
    its matrix starts at ``woff[l]`` with row stride ``sizes[l] + 1``.
    """
    cdef public object W, D, act, sig
    cdef double[::1] w, d, a, s
    cdef Py_ssize_t[::1] sizes, woff, aoff
    cdef int[::1] kinds
    cdef Py_ssize_t L
    cdef double bias

    def __init__(self, weights, deltas, kinds, double bias):
        L = len(weights)
        self.L = L
        sizes = np.empty(L + 1, dtype=np.intp)
        sizes[0] = weights[0].shape[1] - 1
        for l in range(L):
            sizes[l + 1] = weights[l].shape[0]
        woff = np.zeros(L + 1, dtype=np.intp)
        aoff = np.zeros(L + 2, dtype=np.intp)
        for l in range(L):
            woff[l + 1] = woff[l] + weights[l].size
        for l in range(L + 1):
            aoff[l + 1] = aoff[l] + sizes[l]
        self.W = np.concatenate([np.ravel(w) for w in weights]).astype(np.float64)
        if deltas is None:
            self.D = np.zeros_like(self.W)
        else:
            self.D = np.concatenate([np.ravel(d) for d in deltas]).astype(np.float64)
        # activations of every layer, input layer included
        self.act = np.zeros(aoff[L + 1])
        self.sig = np.zeros(aoff[L + 1])
        self.w, self.d, self.a, self.s = self.W, self.D, self.act, self.sig
        self.sizes, self.woff, self.aoff = sizes, woff, aoff
        self.kinds = np.ascontiguousarray(kinds, dtype=np.intc)
        self.bias = bias

    def unpack(self, weights, deltas):
        for l in range(self.L):
            weights[l][...] = self.W[self.woff[l]:self.woff[l + 1]].reshape(weights[l].shape)
            if deltas is not None:
                deltas[l][...] = self.D[self.woff[l]:self.woff[l + 1]].reshape(weights[l].shape)

    def layer_values(self, l):
        return self.act[self.aoff[l]:self.aoff[l + 1]].copy()


cdef void _forward(_Packed p, const double* x, double* nets) noexcept nogil:
    # nets may be NULL; otherwise receives pre-activation sums of layers 1..L
    cdef Py_ssize_t l, i, j, m, n, stride
    cdef double acc
    cdef double* w
    cdef double* src
    cdef double* dst
    for j in range(p.sizes[0]):
        p.a[j] = x[j]
    for l in range(p.L):
        m = p.sizes[l]
        n = p.sizes[l + 1]
        stride = m + 1
        w = &p.w[p.woff[l]]
        src = &p.a[p.aoff[l]]
        dst = &p.a[p.aoff[l + 1]]
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc = acc + src[j] * w[i * stride + j]
            acc = acc + p.bias * w[i * stride + m]
            if nets != NULL:
                nets[p.aoff[l + 1] - p.aoff[1] + i] = acc
            dst[i] = _act(acc, p.kinds[l])


cdef bint _update(_Packed p, Py_ssize_t l, double eta, double alpha) noexcept nogil:
    cdef Py_ssize_t i, j, m = p.sizes[l], n = p.sizes[l + 1], stride = m + 1, k
    cdef double dw
    cdef double* w = &p.w[p.woff[l]]
    cdef double* dd = &p.d[p.woff[l]]
    cdef double* src = &p.a[p.aoff[l]]
    cdef double* sig = &p.s[p.aoff[l + 1]]
    cdef bint ok = True
    for i in range(n):
        for j in range(m):
            k = i * stride + j
            dw = alpha * dd[k] + eta * src[j] * sig[i]
            w[k] = w[k] + dw
            dd[k] = dw
            ok = ok and isfinite(w[k])
        k = i * stride + m
        dw = alpha * dd[k] + eta * p.bias * sig[i]
        w[k] = w[k] + dw
        dd[k] = dw
        ok = ok and isfinite(w[k])
    return ok


cdef void _signal_below(_Packed p, Py_ssize_t l) noexcept nogil:
    # error signal of layer l (a hidden layer) from layer l + 1 through W[l]
    cdef Py_ssize_t j, k, m = p.sizes[l], n = p.sizes[l + 1], stride = m + 1
    cdef double acc, y
    cdef double* w = &p.w[p.woff[l]]
    cdef double* sig_up = &p.s[p.aoff[l + 1]]
    for j in range(m):
        acc = 0.0
        for k in range(n):
            acc = acc + sig_up[k] * w[k * stride + j]
        y = p.a[p.aoff[l] + j]
        p.s[p.aoff[l] + j] = _slope(y, p.kinds[l - 1]) * acc


cdef bint _backprop(_Packed p, const double* target, double eta, double alpha,
                    bint sequential, double* err) noexcept nogil:
    # assumes _forward has just run for this pattern
    cdef Py_ssize_t L = p.L, k, l, n = p.sizes[L]
    cdef Py_ssize_t top = p.aoff[L]
    cdef double y
    cdef bint ok = True
    for k in range(n):
        y = p.a[top + k]
        err[k] = target[k] - y
        p.s[top + k] = err[k] * _slope(y, p.kinds[L - 1])
    if sequential:
        for l in range(L - 1, -1, -1):
            ok = _update(p, l, eta, alpha) and ok
            if l > 0:
                _signal_below(p, l)
    else:
        for l in range(L - 1, 0, -1):
            _signal_below(p, l)
        for l in range(L):
            ok = _update(p, l, eta, alpha) and ok
    return ok


cdef double _max_abs(_Packed p, const double* target) noexcept nogil:
    cdef Py_ssize_t k, top = p.aoff[p.L]
    cdef double m = 0.0, e
    for k in range(p.sizes[p.L]):
        e = fabs(target[k] - p.a[top + k])
        if e > m or e != e:
            m = e
    return m


def forward(weights, x, double bias, kinds):
    """Return ``(nets, outs)``, one vector per non-input layer."""
    cdef _Packed p = _Packed(weights, None, kinds, bias)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    nets_flat = np.empty(p.aoff[p.L + 1] - p.aoff[1])
    cdef double[::1] nv = nets_flat
    _forward(p, &xv[0], &nv[0])
    base = p.aoff[1]
    nets = [nets_flat[p.aoff[l] - base:p.aoff[l + 1] - base] for l in range(1, p.L + 1)]
    outs = [p.layer_values(l) for l in range(1, p.L + 1)]
    return nets, outs


def backprop(weights, deltas, x, desired, double eta, double alpha, double bias, kinds,
             bint sequential, trace=None):
    """One back-propagation step for a single pattern; returns ``desired - output``.

    ``trace`` is accepted for signature compatibility; the forward pass is
    always recomputed from ``weights``.
    """
    cdef _Packed p = _Packed(weights, deltas, kinds, bias)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(desired, dtype=np.float64)
    err = np.empty(p.sizes[p.L])
    cdef double[::1] ev = err
    cdef bint ok
    _forward(p, &xv[0], NULL)
    ok = _backprop(p, &tv[0], eta, alpha, sequential, &ev[0])
    p.unpack(weights, deltas)
    if not ok:
        raise NonFiniteError("non-finite weight produced by update")
    return err


def max_abs_errors(weights, X, T, double bias, kinds):
    """Max-abs output error of every pattern, weights untouched."""
    cdef _Packed p = _Packed(weights, None, kinds, bias)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    res = np.empty(Xv.shape[0])
    cdef double[::1] r = res
    cdef Py_ssize_t q
    with nogil:
        for q in range(Xv.shape[0]):
            _forward(p, &Xv[q, 0], NULL)
            r[q] = _max_abs(p, &Tv[q, 0])
    return res


def train_epoch(weights, deltas, X, T, double eta, double alpha, double bias, kinds,
                bint sequential, double threshold):
    """Sweep the patterns in order, updating only where the error exceeds ``threshold``.

    Returns the pre-update max-abs error of every pattern and the number of
    back-propagation steps taken.
    """
    cdef _Packed p = _Packed(weights, deltas, kinds, bias)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    seen = np.empty(Xv.shape[0])
    err = np.empty(p.sizes[p.L])
    cdef double[::1] r = seen
    cdef double[::1] ev = err
    cdef Py_ssize_t q, n_updates = 0
    cdef bint ok = True
    with nogil:
        for q in range(Xv.shape[0]):
            _forward(p, &Xv[q, 0], NULL)
            r[q] = _max_abs(p, &Tv[q, 0])
            if r[q] > threshold:
                n_updates += 1
                if not _backprop(p, &Tv[q, 0], eta, alpha, sequential, &ev[0]):
                    ok = False
                    break
    p.unpack(weights, deltas)
    if not ok:
        raise NonFiniteError(f"non-finite weight produced by update at pattern {q}")
    return seen, n_updates
