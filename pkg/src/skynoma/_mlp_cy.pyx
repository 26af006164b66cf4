# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Q-network kernels; drop-in twin of ``_mlp_np``.

Fused loops keep the small-batch forward/backward/update path free of
per-op dispatch overhead. Same math, same call signatures.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "cython"


def qvalues(x, w1, b1, w2, b2):
    """Batch forward pass: (B, n_in) -> (B, n_out)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] w1v = w1
    cdef double[::1] b1v = b1
    cdef double[:, ::1] w2v = w2
    cdef double[::1] b2v = b2
    cdef Py_ssize_t batch = xv.shape[0], nin = xv.shape[1]
    cdef Py_ssize_t nh = w1v.shape[1], nout = w2v.shape[1]
    out = np.empty((batch, nout))
    hid = np.empty(nh)
    cdef double[:, ::1] outv = out
    cdef double[::1] hv = hid
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(batch):
        for j in range(nh):
            acc = b1v[j]
            for k in range(nin):
                acc += xv[i, k] * w1v[k, j]
            hv[j] = acc if acc > 0.0 else 0.0
        for j in range(nout):
            acc = b2v[j]
            for k in range(nh):
                acc += hv[k] * w2v[k, j]
            outv[i, j] = acc
    return out


def loss_and_grads(x, actions, targets, w1, b1, w2, b2):
    """Mean squared TD error on the taken actions, with parameter gradients."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef long[::1] av = np.ascontiguousarray(actions, dtype=np.int64)
    cdef double[::1] yv = np.ascontiguousarray(targets, dtype=np.float64)
    cdef double[:, ::1] w1v = w1
    cdef double[::1] b1v = b1
    cdef double[:, ::1] w2v = w2
    cdef double[::1] b2v = b2
    cdef Py_ssize_t batch = xv.shape[0], nin = xv.shape[1]
    cdef Py_ssize_t nh = w1v.shape[1], nout = w2v.shape[1]

    gw1 = np.zeros((nin, nh))
    gb1 = np.zeros(nh)
    gw2 = np.zeros((nh, nout))
    gb2 = np.zeros(nout)
    cdef double[:, ::1] gw1v = gw1
    cdef double[::1] gb1v = gb1
    cdef double[:, ::1] gw2v = gw2
    cdef double[::1] gb2v = gb2

    z1 = np.empty(nh)
    a1 = np.empty(nh)
    dz1 = np.empty(nh)
    cdef double[::1] z1v = z1, a1v = a1, dz1v = dz1
    cdef Py_ssize_t i, j, k, a
    cdef double acc, err, dq, loss = 0.0

    for i in range(batch):
        for j in range(nh):
            acc = b1v[j]
            for k in range(nin):
                acc += xv[i, k] * w1v[k, j]
            z1v[j] = acc
            a1v[j] = acc if acc > 0.0 else 0.0
        a = av[i]
        acc = b2v[a]
        for k in range(nh):
            acc += a1v[k] * w2v[k, a]
        err = acc - yv[i]
        loss += err * err
        # only the taken action's output carries gradient
        dq = 2.0 * err / batch
        gb2v[a] += dq
        for k in range(nh):
            gw2v[k, a] += a1v[k] * dq
            dz1v[k] = w2v[k, a] * dq if z1v[k] > 0.0 else 0.0
        for j in range(nh):
            if dz1v[j] != 0.0:
                gb1v[j] += dz1v[j]
                for k in range(nin):
                    gw1v[k, j] += xv[i, k] * dz1v[j]
    return loss / batch, gw1, gb1, gw2, gb2


def adam_step(params, grads, moments1, moments2, step, double lr, double beta1,
              double beta2, double eps):
    """One in-place Adam update; ``step`` is 1-based for bias correction."""
    cdef double c1 = 1.0 - beta1**step
    cdef double c2 = 1.0 - beta2**step
    cdef double[::1] pv, gv, mv, vv
    cdef Py_ssize_t i, n
    cdef double g
    for p, gr, m, v in zip(params, grads, moments1, moments2):
        pv = p.reshape(-1)
        gv = np.ascontiguousarray(gr, dtype=np.float64).reshape(-1)
        mv = m.reshape(-1)
        vv = v.reshape(-1)
        n = pv.shape[0]
        for i in range(n):
            g = gv[i]
            mv[i] = beta1 * mv[i] + (1.0 - beta1) * g
            vv[i] = beta2 * vv[i] + (1.0 - beta2) * g * g
            pv[i] -= lr * (mv[i] / c1) / (sqrt(vv[i] / c2) + eps)
