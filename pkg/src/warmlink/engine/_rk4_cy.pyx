# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernel: fused CSR matvec and stage updates, no temporaries."""

import numpy as np

cimport cython


cdef void _spmv(const double complex[::1] data, const int[::1] indices,
                const int[::1] indptr, const double complex[::1] x,
                double complex[::1] y) noexcept nogil:
    # split-accumulator form pipelines better than a complex dependency chain
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n = y.shape[0]
    cdef double re, im, ar, ai, br, bi
    cdef const double* d = <const double*> &data[0]
    cdef const double* xv = <const double*> &x[0]
    cdef double* yv = <double*> &y[0]
    cdef int k
    for i in range(n):
        re = 0.0
        im = 0.0
        for j in range(indptr[i], indptr[i + 1]):
            k = indices[j]
            ar = d[2 * j]
            ai = d[2 * j + 1]
            br = xv[2 * k]
            bi = xv[2 * k + 1]
            re += ar * br - ai * bi
            im += ar * bi + ai * br
        yv[2 * i] = re
        yv[2 * i + 1] = im


def rk4_samples(double complex[::1] data, int[::1] indices, int[::1] indptr,
                Py_ssize_t n, double complex[::1] v0, double dt,
                Py_ssize_t n_steps, Py_ssize_t stride):
    cdef Py_ssize_t n_rows = n_steps // stride + 1
    out_arr = np.empty((n_rows, n), dtype=np.complex128)
    v_arr = np.array(v0, dtype=np.complex128, copy=True)
    k1_arr = np.empty(n, dtype=np.complex128)
    k2_arr = np.empty(n, dtype=np.complex128)
    k3_arr = np.empty(n, dtype=np.complex128)
    k4_arr = np.empty(n, dtype=np.complex128)
    tmp_arr = np.empty(n, dtype=np.complex128)

    cdef double complex[:, ::1] out = out_arr
    cdef double complex[::1] v = v_arr
    cdef double complex[::1] k1 = k1_arr
    cdef double complex[::1] k2 = k2_arr
    cdef double complex[::1] k3 = k3_arr
    cdef double complex[::1] k4 = k4_arr
    cdef double complex[::1] tmp = tmp_arr

    cdef Py_ssize_t step, i, row = 1
    cdef double half = 0.5 * dt
    cdef double sixth = dt / 6.0

    out_arr[0] = v_arr

    with nogil:
        for step in range(1, n_steps + 1):
            _spmv(data, indices, indptr, v, k1)
            for i in range(n):
                tmp[i] = v[i] + half * k1[i]
            _spmv(data, indices, indptr, tmp, k2)
            for i in range(n):
                tmp[i] = v[i] + half * k2[i]
            _spmv(data, indices, indptr, tmp, k3)
            for i in range(n):
                tmp[i] = v[i] + dt * k3[i]
            _spmv(data, indices, indptr, tmp, k4)
            for i in range(n):
                v[i] = v[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if step % stride == 0:
                for i in range(n):
                    out[row, i] = v[i]
                row += 1
    return out_arr
