# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled stage kernels. Same contract as ``_pykernels``.

complex128 products go through BLAS (``zgemm``/``zgemv``); clongdouble uses
plain loops since BLAS has no extended-precision routines. The public
functions dispatch on dtype by hand because fused-type ``def`` dispatch costs
several microseconds per call, which dominates for two-level systems.
"""

import numpy as np
from scipy.linalg.cython_blas cimport zgemm, zgemv

ctypedef double complex dcomplex
ctypedef long double complex ldcomplex

ctypedef fused cplx:
    dcomplex
    ldcomplex

_LD = np.dtype(np.clongdouble)


cdef void _matmul(cplx[:, ::1] A, cplx[:, ::1] B, cplx[:, ::1] C, cplx alpha, bint accumulate, bint adjoint_a) noexcept nogil:
    # C = alpha * op(A) @ B (+ C if accumulate), op(A) = A or A^dagger, row-major
    cdef int n = A.shape[0]
    cdef char transa = b'N'
    cdef char transb = b'C' if adjoint_a else b'N'
    cdef Py_ssize_t i, j, l
    cdef cplx acc
    cdef cplx beta = 1 if accumulate else 0
    if cplx is dcomplex:
        # row-major C = op(A) B  <=>  column-major C^T = B^T op(A)^T
        zgemm(&transa, &transb, &n, &n, &n, &alpha, &B[0, 0], &n, &A[0, 0], &n, &beta, &C[0, 0], &n)
    else:
        for i in range(n):
            for j in range(n):
                acc = 0
                if adjoint_a:
                    for l in range(n):
                        acc = acc + A[l, i].conjugate() * B[l, j]
                else:
                    for l in range(n):
                        acc = acc + A[i, l] * B[l, j]
                if accumulate:
                    C[i, j] = C[i, j] + alpha * acc
                else:
                    C[i, j] = alpha * acc


cdef void _matvec(cplx[:, ::1] A, cplx[::1] x, cplx[::1] y) noexcept nogil:
    cdef int n = A.shape[0], inc = 1
    cdef char trans = b'T'
    cdef cplx one = 1, zero = 0, acc
    cdef Py_ssize_t i, j
    if cplx is dcomplex:
        zgemv(&trans, &n, &n, &one, &A[0, 0], &n, &x[0], &inc, &zero, &y[0], &inc)
    else:
        for i in range(n):
            acc = 0
            for j in range(n):
                acc = acc + A[i, j] * x[j]
            y[i] = acc


cdef cplx _dot(cplx[::1] a, cplx[::1] b) noexcept nogil:
    # a^dagger b
    cdef Py_ssize_t i
    cdef cplx acc = 0
    for i in range(a.shape[0]):
        acc = acc + a[i].conjugate() * b[i]
    return acc


cdef void _mf(cplx[:, ::1] hq, cplx[:, :, ::1] ops, cplx[::1] coeffs, cplx[::1] psi, cplx fac,
              cplx[::1] dpsi, cplx[::1] work, cplx[::1] expval) noexcept nogil:
    cdef Py_ssize_t n = psi.shape[0], i, k
    _matvec(hq, psi, dpsi)
    for k in range(ops.shape[0]):
        _matvec(ops[k], psi, work)
        for i in range(n):
            dpsi[i] = dpsi[i] + coeffs[k] * work[i]
        expval[k] = _dot(psi, work)
    for i in range(n):
        dpsi[i] = fac * dpsi[i]


cdef void _conj_exp(cplx[:, ::1] U, cplx[:, :, ::1] ops, cplx[::1] ket,
                    cplx[:, ::1] W, cplx[:, ::1] C, cplx[::1] v, cplx[::1] expval) noexcept nogil:
    cdef Py_ssize_t k
    cdef cplx one = 1
    for k in range(ops.shape[0]):
        _matmul(ops[k], U, W, one, False, False)
        _matmul(U, W, C, one, False, True)
        _matvec(C, ket, v)
        expval[k] = _dot(ket, v)


cdef void _assemble(cplx[:, ::1] base, cplx[:, :, ::1] ops, Py_ssize_t K, cplx[::1] coeffs, cplx[:, ::1] H) noexcept nogil:
    cdef Py_ssize_t n = base.shape[0], i, j, k
    for i in range(n):
        for j in range(n):
            H[i, j] = base[i, j]
    for k in range(K):
        for i in range(n):
            for j in range(n):
                H[i, j] = H[i, j] + coeffs[k] * ops[k, i, j]


cdef void _unitary(cplx[:, ::1] hq, cplx[:, :, ::1] ops, cplx[::1] coeffs, cplx[:, ::1] U, cplx fac,
                   cplx[:, ::1] H, cplx[:, ::1] dU) noexcept nogil:
    _assemble(hq, ops, ops.shape[0], coeffs, H)
    _matmul(H, U, dU, fac, False, False)


cdef void _operator(cplx[:, :, ::1] xs, Py_ssize_t K, cplx[::1] coeffs, cplx[::1] ket, cplx fac,
                    cplx[:, ::1] H, cplx[:, :, ::1] dxs, cplx[::1] v, cplx[::1] expval) noexcept nogil:
    cdef Py_ssize_t k
    _assemble(xs[0], xs[1:], K, coeffs, H)
    for k in range(xs.shape[0]):
        _matmul(xs[k], H, dxs[k], fac, False, False)
        _matmul(H, xs[k], dxs[k], -fac, True, False)
        _matvec(xs[k], ket, v)
        expval[k] = _dot(ket, v)


# ---- double-precision entry points ----

def _meanfield_d(dcomplex[:, ::1] hq, dcomplex[:, :, ::1] ops, dcomplex[::1] coeffs, dcomplex[::1] psi, double hbar):
    n, K = psi.shape[0], ops.shape[0]
    dpsi = np.empty(n, dtype=np.complex128)
    work = np.empty(n, dtype=np.complex128)
    expval = np.empty(K, dtype=np.complex128)
    _mf[dcomplex](hq, ops, coeffs, psi, -1j / hbar, dpsi, work, expval)
    return dpsi, expval


def _conj_d(dcomplex[:, ::1] U, dcomplex[:, :, ::1] ops, dcomplex[::1] ket):
    n, K = U.shape[0], ops.shape[0]
    expval = np.empty(K, dtype=np.complex128)
    W = np.empty((n, n), dtype=np.complex128)
    C = np.empty((n, n), dtype=np.complex128)
    v = np.empty(n, dtype=np.complex128)
    _conj_exp[dcomplex](U, ops, ket, W, C, v, expval)
    return expval


def _unitary_d(dcomplex[:, ::1] hq, dcomplex[:, :, ::1] ops, dcomplex[::1] coeffs, dcomplex[:, ::1] U, dcomplex[::1] ket, double hbar, obs):
    n = U.shape[0]
    dU = np.empty((n, n), dtype=np.complex128)
    H = np.empty((n, n), dtype=np.complex128)
    _unitary[dcomplex](hq, ops, coeffs, U, -1j / hbar, H, dU)
    return dU, _conj_d(U, ops if obs is None else obs, ket)


def _operator_d(dcomplex[:, :, ::1] xs, Py_ssize_t n_coupling, dcomplex[::1] coeffs, dcomplex[::1] ket, double hbar):
    J, n = xs.shape[0], xs.shape[1]
    dxs = np.empty((J, n, n), dtype=np.complex128)
    H = np.empty((n, n), dtype=np.complex128)
    v = np.empty(n, dtype=np.complex128)
    expval = np.empty(J, dtype=np.complex128)
    _operator[dcomplex](xs, n_coupling, coeffs, ket, -1j / hbar, H, dxs, v, expval)
    return dxs, expval


# ---- extended-precision entry points ----

cdef ldcomplex _ld_fac(double hbar):
    cdef ldcomplex fac = -1j
    return fac / <long double>hbar


def _meanfield_ld(ldcomplex[:, ::1] hq, ldcomplex[:, :, ::1] ops, ldcomplex[::1] coeffs, ldcomplex[::1] psi, double hbar):
    n, K = psi.shape[0], ops.shape[0]
    dpsi = np.empty(n, dtype=_LD)
    work = np.empty(n, dtype=_LD)
    expval = np.empty(K, dtype=_LD)
    _mf[ldcomplex](hq, ops, coeffs, psi, _ld_fac(hbar), dpsi, work, expval)
    return dpsi, expval


def _conj_ld(ldcomplex[:, ::1] U, ldcomplex[:, :, ::1] ops, ldcomplex[::1] ket):
    n, K = U.shape[0], ops.shape[0]
    expval = np.empty(K, dtype=_LD)
    W = np.empty((n, n), dtype=_LD)
    C = np.empty((n, n), dtype=_LD)
    v = np.empty(n, dtype=_LD)
    _conj_exp[ldcomplex](U, ops, ket, W, C, v, expval)
    return expval


def _unitary_ld(ldcomplex[:, ::1] hq, ldcomplex[:, :, ::1] ops, ldcomplex[::1] coeffs, ldcomplex[:, ::1] U, ldcomplex[::1] ket, double hbar, obs):
    n = U.shape[0]
    dU = np.empty((n, n), dtype=_LD)
    H = np.empty((n, n), dtype=_LD)
    _unitary[ldcomplex](hq, ops, coeffs, U, _ld_fac(hbar), H, dU)
    return dU, _conj_ld(U, ops if obs is None else obs, ket)


def _operator_ld(ldcomplex[:, :, ::1] xs, Py_ssize_t n_coupling, ldcomplex[::1] coeffs, ldcomplex[::1] ket, double hbar):
    J, n = xs.shape[0], xs.shape[1]
    dxs = np.empty((J, n, n), dtype=_LD)
    H = np.empty((n, n), dtype=_LD)
    v = np.empty(n, dtype=_LD)
    expval = np.empty(J, dtype=_LD)
    _operator[ldcomplex](xs, n_coupling, coeffs, ket, _ld_fac(hbar), H, dxs, v, expval)
    return dxs, expval


def meanfield_derivative(hq, ops, coeffs, psi, double hbar):
    if psi.dtype == _LD:
        return _meanfield_ld(hq, ops, coeffs, psi, hbar)
    return _meanfield_d(hq, ops, coeffs, psi, hbar)


def unitary_derivative(hq, ops, coeffs, U, ket, double hbar, obs=None):
    if ket.dtype == _LD:
        return _unitary_ld(hq, ops, coeffs, U, ket, hbar, obs)
    return _unitary_d(hq, ops, coeffs, U, ket, hbar, obs)


def operator_derivative(xs, Py_ssize_t n_coupling, coeffs, ket, double hbar):
    if ket.dtype == _LD:
        return _operator_ld(xs, n_coupling, coeffs, ket, hbar)
    return _operator_d(xs, n_coupling, coeffs, ket, hbar)


def conjugated_expectations(U, ops, ket):
    if ket.dtype == _LD:
        return _conj_ld(U, ops, ket)
    return _conj_d(U, ops, ket)
