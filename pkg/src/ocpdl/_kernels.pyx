# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Semantics match ocpdl._kernels_py exactly."""
import numpy as np

from libc.math cimport sqrt, isfinite


def pgd_code(double[:, ::1] G, double[:, ::1] P, C0, double lam, double eta,
             double cmax, double tol, Py_ssize_t max_iters):
    cdef Py_ssize_t R = G.shape[0]
    cdef Py_ssize_t b = P.shape[1]
    cdef Py_ssize_t it, r, s, k
    cdef double grad, v, d, diff2, norm2
    C_arr = np.array(C0, dtype=np.float64, order="C", copy=True)
    N_arr = np.empty_like(C_arr)
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] Cn = N_arr
    cdef double[:, ::1] tmp
    cdef Py_ssize_t n_done = 0
    for it in range(max_iters):
        diff2 = 0.0
        norm2 = 0.0
        for r in range(R):
            for s in range(b):
                grad = 0.0
                for k in range(R):
                    grad += G[r, k] * C[k, s]
                grad = 2.0 * grad - 2.0 * P[r, s] + lam
                v = C[r, s] - eta * grad
                if v < 0.0:
                    v = 0.0
                elif v > cmax:
                    v = cmax
                d = v - C[r, s]
                diff2 += d * d
                norm2 += v * v
                Cn[r, s] = v
        tmp = C
        C = Cn
        Cn = tmp
        n_done = it + 1
        if not isfinite(diff2):
            raise FloatingPointError("non-finite values in coding iteration")
        if sqrt(diff2) <= tol * (1.0 + sqrt(norm2)):
            break
    return np.asarray(C).copy(), n_done


def cyclic_columns(U0, double[:, ::1] A, double[:, ::1] B, double umax,
                   double tol, Py_ssize_t max_iters):
    cdef Py_ssize_t I = B.shape[0]
    cdef Py_ssize_t R = B.shape[1]
    cdef Py_ssize_t sweep, i, p, k
    cdef double g, v, step, d, diff2, norm2
    U_arr = np.array(U0, dtype=np.float64, order="C", copy=True)
    prev_arr = np.empty_like(U_arr)
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] prev = prev_arr
    cdef Py_ssize_t n_done = 0
    for sweep in range(max_iters):
        prev[:, :] = U
        for i in range(R):
            step = 1.0 / (A[i, i] + 1.0)
            for p in range(I):
                g = 0.0
                for k in range(R):
                    g += U[p, k] * A[k, i]
                g -= B[p, i]
                v = U[p, i] - step * g
                if v < 0.0:
                    v = 0.0
                elif v > umax:
                    v = umax
                U[p, i] = v
        diff2 = 0.0
        norm2 = 0.0
        for p in range(I):
            for k in range(R):
                d = U[p, k] - prev[p, k]
                diff2 += d * d
                norm2 += U[p, k] * U[p, k]
        n_done = sweep + 1
        if not isfinite(diff2):
            raise FloatingPointError("non-finite values in factor update")
        if sqrt(diff2) <= tol * (1.0 + sqrt(norm2)):
            break
    return U_arr, n_done
