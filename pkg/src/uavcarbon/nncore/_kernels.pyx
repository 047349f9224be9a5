# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled single-sample dense kernels.

Same contracts as ``_kernels_py``; fused matvec + bias + mask + activation
to cut per-call overhead on the rollout hot path (batch size 1).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p, tanh

cnp.import_array()

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_MISH = 3


cdef inline double _softplus(double z) nogil:
    cdef double m = z if z > 0.0 else 0.0
    return m + log1p(exp(-fabs(z)))


cdef inline double _act(double z, int act_id) nogil:
    if act_id == 0:
        return z
    if act_id == 1:
        return z if z > 0.0 else 0.0
    if act_id == 2:
        return tanh(z)
    return z * tanh(_softplus(z))


cdef inline double _act_grad(double z, int act_id) nogil:
    cdef double t, sig
    if act_id == 0:
        return 1.0
    if act_id == 1:
        return 1.0 if z > 0.0 else 0.0
    if act_id == 2:
        t = tanh(z)
        return 1.0 - t * t
    t = tanh(_softplus(z))
    sig = 1.0 / (1.0 + exp(-z))
    return t + z * (1.0 - t * t) * sig


def dense_vec_forward(
    cnp.ndarray[cnp.float64_t, ndim=1] x,
    cnp.ndarray[cnp.float64_t, ndim=2] weight,
    cnp.ndarray[cnp.float64_t, ndim=1] bias,
    cnp.ndarray[cnp.float64_t, ndim=1] mask,
    int act_id,
):
    if act_id < 0 or act_id > 3:
        raise ValueError(f"unknown activation id {act_id}")
    cdef Py_ssize_t n_out = weight.shape[0]
    cdef Py_ssize_t n_in = weight.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(n_out)
    cdef double acc
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n_out):
            if mask[i] == 0.0:
                z[i] = 0.0
                y[i] = 0.0
                continue
            acc = bias[i]
            for j in range(n_in):
                acc += weight[i, j] * x[j]
            acc *= mask[i]
            z[i] = acc
            y[i] = _act(acc, act_id)
    return y, z


def dense_vec_backward(
    cnp.ndarray[cnp.float64_t, ndim=1] dy,
    cnp.ndarray[cnp.float64_t, ndim=1] z,
    cnp.ndarray[cnp.float64_t, ndim=1] x,
    cnp.ndarray[cnp.float64_t, ndim=2] weight,
    cnp.ndarray[cnp.float64_t, ndim=1] mask,
    int act_id,
):
    if act_id < 0 or act_id > 3:
        raise ValueError(f"unknown activation id {act_id}")
    cdef Py_ssize_t n_out = weight.shape[0]
    cdef Py_ssize_t n_in = weight.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dw = np.zeros((n_out, n_in))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] db = np.zeros(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dx = np.zeros(n_in)
    cdef double dz
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n_out):
            if mask[i] == 0.0:
                continue
            dz = dy[i] * _act_grad(z[i], act_id) * mask[i]
            db[i] = dz
            for j in range(n_in):
                dw[i, j] = dz * x[j]
                dx[j] += dz * weight[i, j]
    return dw, db, dx
