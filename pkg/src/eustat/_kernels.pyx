# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Bitwise-identical to eustat._kernels_py: same pairwise reduction tree, same
association order in the fused advection assembly.  Compile with
-ffp-contract=off (see setup.py) so no FMA contraction changes the rounding.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef double _fold(double* buf, Py_ssize_t n) nogil:
    cdef Py_ssize_t half, i
    while n > 1:
        half = n // 2
        for i in range(half):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if n % 2:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    return buf[0]


def tree_sum(a):
    """Fixed-order pairwise-tree sum of a float64 array (any shape, C order)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = \
        np.ascontiguousarray(a, dtype=np.float64).ravel().copy()
    if buf.shape[0] == 0:
        return 0.0
    return _fold(&buf[0], buf.shape[0])


def tree_dot(a, b):
    """tree_sum of the elementwise product a*b (products rounded once)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] av = \
        np.ascontiguousarray(a, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bv = \
        np.ascontiguousarray(b, dtype=np.float64).ravel()
    cdef Py_ssize_t n = av.shape[0]
    if bv.shape[0] != n:
        raise ValueError("tree_dot: size mismatch")
    if n == 0:
        return 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    for i in range(n):
        buf[i] = av[i] * bv[i]
    return _fold(&buf[0], n)


def advection_products(sig1, sig2, ut1, ut2, wx, wy, gsx, gsy, double m):
    """Pointwise advection assembly (m*sig + ut).grad(w) + m * ut.grad(g)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s1 = np.ascontiguousarray(sig1, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s2 = np.ascontiguousarray(sig2, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u1 = np.ascontiguousarray(ut1, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u2 = np.ascontiguousarray(ut2, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dx = np.ascontiguousarray(wx, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dy = np.ascontiguousarray(wy, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g1 = np.ascontiguousarray(gsx, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g2 = np.ascontiguousarray(gsy, dtype=np.float64).ravel()
    cdef Py_ssize_t n = s1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double t1, t2, t3
    for i in range(n):
        t1 = (m * s1[i] + u1[i]) * dx[i]
        t2 = (m * s2[i] + u2[i]) * dy[i]
        t3 = m * (u1[i] * g1[i] + u2[i] * g2[i])
        out[i] = (t1 + t2) + t3
    return out.reshape(np.shape(sig1))
