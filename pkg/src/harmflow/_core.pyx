# cython: boundscheck=False, wraparound=False, cdivision=True
"""Batched dense complex solver on LAPACK zgesv.

One harmonic study is thousands of small independent complex systems
(one per timestep per order, one per scan point). Calling zgesv per
system from C avoids the per-call numpy overhead that dominates at these
sizes. Matrices are copied transposed into column-major scratch so the
originals stay intact for the residual check.
"""

import numpy as np

from scipy.linalg.cython_lapack cimport zgesv


def solve_shunted_batch(base, shunts, rhs):
    """Solve (base[k] + diag(shunts[k])) x[k] = rhs[k] for every k.

    base: (K, N, N) complex128; shunts, rhs: (K, N) complex128.
    Returns (x (K, N), residual (K,) max-abs, info (K,) int32) where
    info[k] != 0 marks a singular system (x[k] zeroed, residual[k] inf).
    """
    cdef double complex[:, :, ::1] a = np.ascontiguousarray(base, dtype=np.complex128)
    cdef double complex[:, ::1] d = np.ascontiguousarray(shunts, dtype=np.complex128)
    cdef double complex[:, ::1] b0 = np.ascontiguousarray(rhs, dtype=np.complex128)
    b_arr = np.array(b0, dtype=np.complex128, order="C", copy=True)
    cdef double complex[:, ::1] x = b_arr

    cdef int k = a.shape[0]
    cdef int n = a.shape[1]
    cdef int nrhs = 1
    cdef int lapack_info = 0

    work_arr = np.empty((n, n), dtype=np.complex128)
    ipiv_arr = np.empty(n, dtype=np.intc)
    resid_arr = np.empty(k, dtype=np.float64)
    info_arr = np.zeros(k, dtype=np.int32)
    cdef double complex[:, ::1] work = work_arr
    cdef int[::1] ipiv = ipiv_arr
    cdef double[::1] resid = resid_arr
    cdef int[::1] info = info_arr

    cdef Py_ssize_t s, i, j
    cdef double complex acc
    cdef double r, rmax

    for s in range(k):
        # column-major copy of base[s] + diag(d[s]) for LAPACK
        for i in range(n):
            for j in range(n):
                work[j, i] = a[s, i, j]
            work[i, i] = work[i, i] + d[s, i]
        zgesv(&n, &nrhs, &work[0, 0], &n, &ipiv[0], &x[s, 0], &n, &lapack_info)
        if lapack_info != 0:
            info[s] = lapack_info
            for i in range(n):
                x[s, i] = 0
            resid[s] = float("inf")
            continue
        rmax = 0.0
        for i in range(n):
            acc = d[s, i] * x[s, i] - b0[s, i]
            for j in range(n):
                acc = acc + a[s, i, j] * x[s, j]
            r = abs(acc)
            if r > rmax:
                rmax = r
        resid[s] = rmax

    return b_arr, resid_arr, info_arr
