# Compiled statevector kernels. Same contract as _py: qubits are addressed
# by bit position m from the least significant bit of the amplitude index.

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "cython"

ctypedef double complex cplx


def apply_1q(cnp.ndarray[cplx, ndim=1] state, Py_ssize_t m,
             cplx u00, cplx u01, cplx u10, cplx u11):
    cdef Py_ssize_t tk = 1 << m
    cdef Py_ssize_t n = state.shape[0] >> 1
    cdef Py_ssize_t g, i1, i2
    cdef cplx a, b
    cdef cplx* s = <cplx*> cnp.PyArray_DATA(state)
    for g in range(n):
        i1 = ((g >> m) << (m + 1)) + (g & (tk - 1))
        i2 = i1 + tk
        a = s[i1]
        b = s[i2]
        s[i1] = u00 * a + u01 * b
        s[i2] = u10 * a + u11 * b


def apply_diag1(cnp.ndarray[cplx, ndim=1] state, Py_ssize_t m, cplx d0, cplx d1):
    cdef Py_ssize_t tk = 1 << m
    cdef Py_ssize_t n = state.shape[0] >> 1
    cdef Py_ssize_t g, i1
    cdef bint t0 = d0 != 1
    cdef bint t1 = d1 != 1
    cdef cplx* s = <cplx*> cnp.PyArray_DATA(state)
    if not (t0 or t1):
        return
    for g in range(n):
        i1 = ((g >> m) << (m + 1)) + (g & (tk - 1))
        if t0:
            s[i1] = d0 * s[i1]
        if t1:
            s[i1 + tk] = d1 * s[i1 + tk]


def apply_diag2(cnp.ndarray[cplx, ndim=1] state, Py_ssize_t m1, Py_ssize_t m2,
                cplx d00, cplx d01, cplx d10, cplx d11):
    # m1 > m2
    cdef Py_ssize_t t1 = 1 << m1
    cdef Py_ssize_t t2 = 1 << m2
    cdef Py_ssize_t n = state.shape[0] >> 2
    cdef Py_ssize_t g, i, lo, mid
    cdef cplx* s = <cplx*> cnp.PyArray_DATA(state)
    for g in range(n):
        lo = g & (t2 - 1)
        mid = (g >> m2) & ((1 << (m1 - m2 - 1)) - 1)
        i = ((g >> (m1 - 1)) << (m1 + 1)) + (mid << (m2 + 1)) + lo
        if d00 != 1:
            s[i] = d00 * s[i]
        if d01 != 1:
            s[i + t2] = d01 * s[i + t2]
        if d10 != 1:
            s[i + t1] = d10 * s[i + t1]
        if d11 != 1:
            s[i + t1 + t2] = d11 * s[i + t1 + t2]


def gather_pair(cnp.ndarray[cplx, ndim=1] state, Py_ssize_t m1, Py_ssize_t m2):
    # m1 > m2; rows keyed by (bit m1, bit m2)
    cdef Py_ssize_t t1 = 1 << m1
    cdef Py_ssize_t t2 = 1 << m2
    cdef Py_ssize_t n = state.shape[0] >> 2
    cdef cnp.ndarray[cplx, ndim=2] out = np.empty((4, n), dtype=np.complex128)
    cdef Py_ssize_t g, i, lo, mid
    cdef cplx* s = <cplx*> cnp.PyArray_DATA(state)
    cdef cplx* o = <cplx*> cnp.PyArray_DATA(out)
    for g in range(n):
        lo = g & (t2 - 1)
        mid = (g >> m2) & ((1 << (m1 - m2 - 1)) - 1)
        i = ((g >> (m1 - 1)) << (m1 + 1)) + (mid << (m2 + 1)) + lo
        o[g] = s[i]
        o[n + g] = s[i + t2]
        o[2 * n + g] = s[i + t1]
        o[3 * n + g] = s[i + t1 + t2]
    return out


def gather_bit(cnp.ndarray[cplx, ndim=1] state, Py_ssize_t m, int bit):
    cdef Py_ssize_t tk = 1 << m
    cdef Py_ssize_t n = state.shape[0] >> 1
    cdef cnp.ndarray[cplx, ndim=1] out = np.empty(n, dtype=np.complex128)
    cdef Py_ssize_t g, i
    cdef cplx* s = <cplx*> cnp.PyArray_DATA(state)
    cdef cplx* o = <cplx*> cnp.PyArray_DATA(out)
    for g in range(n):
        i = ((g >> m) << (m + 1)) + (g & (tk - 1))
        if bit:
            i += tk
        o[g] = s[i]
    return out


def prob_bit1(cnp.ndarray[cplx, ndim=1] state, Py_ssize_t m):
    cdef Py_ssize_t tk = 1 << m
    cdef Py_ssize_t n = state.shape[0] >> 1
    cdef Py_ssize_t g, i
    cdef double acc = 0.0
    cdef cplx a
    cdef cplx* s = <cplx*> cnp.PyArray_DATA(state)
    for g in range(n):
        i = ((g >> m) << (m + 1)) + (g & (tk - 1)) + tk
        a = s[i]
        acc += a.real * a.real + a.imag * a.imag
    return acc
