# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled episode-step kernels.

Same contracts as `_pyops` (the NumPy reference); fused loops avoid the
per-call overhead that dominates at desk-scale matrix sizes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()


def predictor_forward(
    double[:, ::1] w1, double[::1] b1,
    double[:, ::1] w2, double[::1] b2,
    double[:, ::1] w3, double[::1] b3,
    double[:, ::1] x,
):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d_in = x.shape[1]
    cdef Py_ssize_t h = w1.shape[0]
    cdef Py_ssize_t n2 = w2.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc

    a1_arr = np.empty((n, h), dtype=np.float64)
    a2_arr = np.empty(n2, dtype=np.float64)
    s_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] a1 = a1_arr
    cdef double[::1] a2 = a2_arr
    cdef double[::1] s = s_arr

    for j in range(n):
        for i in range(h):
            acc = b1[i]
            for k in range(d_in):
                acc += w1[i, k] * x[j, k]
            a1[j, i] = acc if acc > 0.0 else 0.0

    for i in range(n2):
        acc = b2[i]
        for j in range(n):
            for k in range(h):
                acc += w2[i, j * h + k] * a1[j, k]
        a2[i] = acc if acc > 0.0 else 0.0

    for i in range(n):
        acc = b3[i]
        for k in range(n2):
            acc += w3[i, k] * a2[k]
        s[i] = 1.0 / (1.0 + exp(-acc))

    return s_arr, a1_arr, a2_arr


def predictor_backward(
    double[:, ::1] w2, double[:, ::1] w3,
    double[:, ::1] x, double[:, ::1] a1, double[::1] a2,
    double[::1] s, double[::1] ds,
):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d_in = x.shape[1]
    cdef Py_ssize_t h = a1.shape[1]
    cdef Py_ssize_t n2 = a2.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc, g, dz1

    dz3_arr = np.empty(n, dtype=np.float64)
    dw3_arr = np.empty((n, n2), dtype=np.float64)
    db3_arr = np.empty(n, dtype=np.float64)
    dz2_arr = np.empty(n2, dtype=np.float64)
    dw2_arr = np.empty((n2, n * h), dtype=np.float64)
    db2_arr = np.empty(n2, dtype=np.float64)
    dw1_arr = np.zeros((h, d_in), dtype=np.float64)
    db1_arr = np.zeros(h, dtype=np.float64)

    cdef double[::1] dz3 = dz3_arr
    cdef double[:, ::1] dw3 = dw3_arr
    cdef double[::1] db3 = db3_arr
    cdef double[::1] dz2 = dz2_arr
    cdef double[:, ::1] dw2 = dw2_arr
    cdef double[::1] db2 = db2_arr
    cdef double[:, ::1] dw1 = dw1_arr
    cdef double[::1] db1 = db1_arr

    for i in range(n):
        dz3[i] = ds[i] * s[i] * (1.0 - s[i])
        db3[i] = dz3[i]
        for k in range(n2):
            dw3[i, k] = dz3[i] * a2[k]

    for k in range(n2):
        if a2[k] > 0.0:
            acc = 0.0
            for i in range(n):
                acc += w3[i, k] * dz3[i]
            dz2[k] = acc
        else:
            dz2[k] = 0.0
        db2[k] = dz2[k]

    # dw2[i, j*h + k] = dz2[i] * a1[j, k]
    for i in range(n2):
        g = dz2[i]
        for j in range(n):
            for k in range(h):
                dw2[i, j * h + k] = g * a1[j, k]

    for j in range(n):
        for k in range(h):
            if a1[j, k] > 0.0:
                acc = 0.0
                for i in range(n2):
                    acc += w2[i, j * h + k] * dz2[i]
                dz1 = acc
                db1[k] += dz1
                for i in range(d_in):
                    dw1[k, i] += dz1 * x[j, i]

    return dw1_arr, db1_arr, dw2_arr, db2_arr, dw3_arr, db3_arr


def searcher_forward(
    double[:, ::1] w1, double[::1] b1,
    double[:, ::1] w2, double[::1] b2,
    double[::1] x,
):
    cdef Py_ssize_t n_in = x.shape[0]
    cdef Py_ssize_t n_hid = w1.shape[0]
    cdef Py_ssize_t n_out = w2.shape[0]
    cdef Py_ssize_t i, k
    cdef double acc, zmax, total

    a1_arr = np.empty(n_hid, dtype=np.float64)
    raw_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] a1 = a1_arr
    cdef double[::1] raw = raw_arr

    for i in range(n_hid):
        acc = b1[i]
        for k in range(n_in):
            acc += w1[i, k] * x[k]
        a1[i] = acc if acc > 0.0 else 0.0

    zmax = -1e308
    for i in range(n_out):
        acc = b2[i]
        for k in range(n_hid):
            acc += w2[i, k] * a1[k]
        raw[i] = acc
        if acc > zmax:
            zmax = acc

    total = 0.0
    for i in range(n_out):
        raw[i] = exp(raw[i] - zmax)
        total += raw[i]
    for i in range(n_out):
        raw[i] /= total

    return raw_arr, a1_arr


def searcher_backward(
    double[:, ::1] w1, double[:, ::1] w2,
    double[::1] x, double[::1] a1, double[::1] dz2,
):
    cdef Py_ssize_t n_in = x.shape[0]
    cdef Py_ssize_t n_hid = a1.shape[0]
    cdef Py_ssize_t n_out = dz2.shape[0]
    cdef Py_ssize_t i, k
    cdef double acc, g

    dw2_arr = np.empty((n_out, n_hid), dtype=np.float64)
    db2_arr = np.empty(n_out, dtype=np.float64)
    dw1_arr = np.empty((n_hid, n_in), dtype=np.float64)
    db1_arr = np.empty(n_hid, dtype=np.float64)
    dx_arr = np.zeros(n_in, dtype=np.float64)
    cdef double[:, ::1] dw2 = dw2_arr
    cdef double[::1] db2 = db2_arr
    cdef double[:, ::1] dw1 = dw1_arr
    cdef double[::1] db1 = db1_arr
    cdef double[::1] dx = dx_arr

    for i in range(n_out):
        g = dz2[i]
        db2[i] = g
        for k in range(n_hid):
            dw2[i, k] = g * a1[k]

    for k in range(n_hid):
        if a1[k] > 0.0:
            acc = 0.0
            for i in range(n_out):
                acc += w2[i, k] * dz2[i]
        else:
            acc = 0.0
        db1[k] = acc
        for i in range(n_in):
            dw1[k, i] = acc * x[i]
        if acc != 0.0:
            for i in range(n_in):
                dx[i] += w1[k, i] * acc

    return dw1_arr, db1_arr, dw2_arr, db2_arr, dx_arr


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam update for a single array, in place."""
    _adam_flat(
        param.reshape(-1), np.ascontiguousarray(grad, dtype=np.float64).reshape(-1),
        m.reshape(-1), v.reshape(-1), t, lr, beta1, beta2, eps,
    )


cdef void _adam_flat(
    double[::1] param, double[::1] grad, double[::1] m, double[::1] v,
    long t, double lr, double beta1, double beta2, double eps,
):
    cdef Py_ssize_t i
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double mhat, vhat
    for i in range(param.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
        mhat = m[i] / c1
        vhat = v[i] / c2
        param[i] -= lr * mhat / (sqrt(vhat) + eps)
