# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled valid-convolution kernels (forward, input/weight/bias gradients).

Loop nests are arranged so the innermost loop runs over contiguous output
or input columns: the forward and input-gradient passes are shifted-row
axpy updates, the weight-gradient pass accumulates elementwise products
into a row buffer before a single scalar reduction.  All loops run in a
fixed order, so results are bit-reproducible run to run.
"""

import numpy as np

cimport cython
from cython cimport floating


def conv2d_forward(floating[:, :, :, ::1] x,
                   floating[:, :, :, ::1] w,
                   floating[::1] b,
                   floating[:, :, :, ::1] out):
    """out[n,co,i,j] = b[co] + sum_{ci,ki,kj} x[n,ci,i+ki,j+kj] * w[co,ci,ki,kj]."""
    cdef Py_ssize_t n_batch = x.shape[0]
    cdef Py_ssize_t c_in = x.shape[1]
    cdef Py_ssize_t c_out = w.shape[0]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t h_out = out.shape[2]
    cdef Py_ssize_t w_out = out.shape[3]
    cdef Py_ssize_t n, co, ci, ki, kj, i, j
    cdef floating wv, bv

    with nogil:
        for n in range(n_batch):
            for co in range(c_out):
                bv = b[co]
                for i in range(h_out):
                    for j in range(w_out):
                        out[n, co, i, j] = bv
                for ci in range(c_in):
                    for ki in range(k):
                        for kj in range(k):
                            wv = w[co, ci, ki, kj]
                            for i in range(h_out):
                                for j in range(w_out):
                                    out[n, co, i, j] += wv * x[n, ci, i + ki, j + kj]


def conv2d_backward_input(floating[:, :, :, ::1] grad_out,
                          floating[:, :, :, ::1] w,
                          floating[:, :, :, ::1] grad_x):
    """grad_x[n,ci,i+ki,j+kj] += grad_out[n,co,i,j] * w[co,ci,ki,kj]; grad_x starts zeroed."""
    cdef Py_ssize_t n_batch = grad_out.shape[0]
    cdef Py_ssize_t c_out = grad_out.shape[1]
    cdef Py_ssize_t c_in = w.shape[1]
    cdef Py_ssize_t k = w.shape[2]
    cdef Py_ssize_t h_out = grad_out.shape[2]
    cdef Py_ssize_t w_out = grad_out.shape[3]
    cdef Py_ssize_t n, co, ci, ki, kj, i, j
    cdef floating wv

    with nogil:
        for n in range(n_batch):
            for ci in range(c_in):
                for co in range(c_out):
                    for ki in range(k):
                        for kj in range(k):
                            wv = w[co, ci, ki, kj]
                            for i in range(h_out):
                                for j in range(w_out):
                                    grad_x[n, ci, i + ki, j + kj] += wv * grad_out[n, co, i, j]


def conv2d_backward_weights(floating[:, :, :, ::1] x,
                            floating[:, :, :, ::1] grad_out,
                            floating[:, :, :, ::1] grad_w,
                            floating[::1] grad_b):
    """grad_w[co,ci,ki,kj] = sum_{n,i,j} x[n,ci,i+ki,j+kj] * grad_out[n,co,i,j]."""
    cdef Py_ssize_t n_batch = x.shape[0]
    cdef Py_ssize_t c_in = x.shape[1]
    cdef Py_ssize_t c_out = grad_out.shape[1]
    cdef Py_ssize_t k = grad_w.shape[2]
    cdef Py_ssize_t h_out = grad_out.shape[2]
    cdef Py_ssize_t w_out = grad_out.shape[3]
    cdef Py_ssize_t n, co, ci, ki, kj, i, j
    cdef floating acc

    buf_np = np.zeros(w_out, dtype=np.asarray(x).dtype)
    cdef floating[::1] buf = buf_np

    with nogil:
        for co in range(c_out):
            for ci in range(c_in):
                for ki in range(k):
                    for kj in range(k):
                        for j in range(w_out):
                            buf[j] = 0
                        for n in range(n_batch):
                            for i in range(h_out):
                                for j in range(w_out):
                                    buf[j] += grad_out[n, co, i, j] * x[n, ci, i + ki, j + kj]
                        acc = 0
                        for j in range(w_out):
                            acc += buf[j]
                        grad_w[co, ci, ki, kj] = acc

        for co in range(c_out):
            acc = 0
            for n in range(n_batch):
                for i in range(h_out):
                    for j in range(w_out):
                        acc += grad_out[n, co, i, j]
            grad_b[co] = acc
