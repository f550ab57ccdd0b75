# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the eps-geodesic Newton solver.

Same signatures and semantics as ``_kernels_py``; periodic neighbours are
resolved with explicit index wrap instead of ``np.roll`` temporaries.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def geodesic_coefficients(double[:, :, ::1] phi):
    cdef Py_ssize_t M = phi.shape[0] - 1
    cdef Py_ssize_t N = phi.shape[1]
    cdef double invh2 = <double>(N * N)
    cdef double half_invh = 0.5 * N
    cdef double MM = <double>(M * M)
    cdef double halfM = 0.5 * M
    rho_a = np.empty((M - 1, N, N))
    a_a = np.empty((M - 1, N, N))
    gx_a = np.empty((M - 1, N, N))
    gy_a = np.empty((M - 1, N, N))
    cdef double[:, :, ::1] rho = rho_a
    cdef double[:, :, ::1] a = a_a
    cdef double[:, :, ::1] gx = gx_a
    cdef double[:, :, ::1] gy = gy_a
    cdef Py_ssize_t k, i, j, ip, im, jp, jm
    cdef double lap
    for k in range(1, M):
        for i in range(N):
            ip = i + 1 if i + 1 < N else 0
            im = i - 1 if i > 0 else N - 1
            for j in range(N):
                jp = j + 1 if j + 1 < N else 0
                jm = j - 1 if j > 0 else N - 1
                lap = (phi[k, ip, j] + phi[k, im, j] + phi[k, i, jp] + phi[k, i, jm]
                       - 4.0 * phi[k, i, j]) * invh2
                rho[k - 1, i, j] = 1.0 + 0.5 * lap
                a[k - 1, i, j] = (phi[k + 1, i, j] - 2.0 * phi[k, i, j] + phi[k - 1, i, j]) * MM
                gx[k - 1, i, j] = ((phi[k + 1, ip, j] - phi[k - 1, ip, j])
                                   - (phi[k + 1, im, j] - phi[k - 1, im, j])) * halfM * half_invh
                gy[k - 1, i, j] = ((phi[k + 1, i, jp] - phi[k - 1, i, jp])
                                   - (phi[k + 1, i, jm] - phi[k - 1, i, jm])) * halfM * half_invh
    return rho_a, a_a, gx_a, gy_a


def geodesic_residual(double[:, :, ::1] phi, double eps):
    rho_a, a_a, gx_a, gy_a = geodesic_coefficients(phi)
    cdef double[:, :, ::1] rho = rho_a
    cdef double[:, :, ::1] a = a_a
    cdef double[:, :, ::1] gx = gx_a
    cdef double[:, :, ::1] gy = gy_a
    cdef Py_ssize_t K = rho.shape[0]
    cdef Py_ssize_t N = rho.shape[1]
    out_a = np.empty((K, N, N))
    cdef double[:, :, ::1] out = out_a
    cdef Py_ssize_t k, i, j
    for k in range(K):
        for i in range(N):
            for j in range(N):
                out[k, i, j] = (rho[k, i, j] * a[k, i, j]
                                - 0.5 * (gx[k, i, j] * gx[k, i, j] + gy[k, i, j] * gy[k, i, j])
                                - eps)
    return out_a


def geodesic_matvec(double[:, :, ::1] psi, double[:, :, ::1] rho, double[:, :, ::1] a,
                    double[:, :, ::1] gx, double[:, :, ::1] gy):
    cdef Py_ssize_t M = psi.shape[0] - 1
    cdef Py_ssize_t N = psi.shape[1]
    cdef double invh2 = <double>(N * N)
    cdef double half_invh = 0.5 * N
    cdef double MM = <double>(M * M)
    cdef double halfM = 0.5 * M
    out_a = np.empty((M - 1, N, N))
    cdef double[:, :, ::1] out = out_a
    cdef Py_ssize_t k, i, j, ip, im, jp, jm
    cdef double lap, ptt, dxt, dyt
    for k in range(1, M):
        for i in range(N):
            ip = i + 1 if i + 1 < N else 0
            im = i - 1 if i > 0 else N - 1
            for j in range(N):
                jp = j + 1 if j + 1 < N else 0
                jm = j - 1 if j > 0 else N - 1
                lap = (psi[k, ip, j] + psi[k, im, j] + psi[k, i, jp] + psi[k, i, jm]
                       - 4.0 * psi[k, i, j]) * invh2
                ptt = (psi[k + 1, i, j] - 2.0 * psi[k, i, j] + psi[k - 1, i, j]) * MM
                dxt = ((psi[k + 1, ip, j] - psi[k - 1, ip, j])
                       - (psi[k + 1, im, j] - psi[k - 1, im, j])) * halfM * half_invh
                dyt = ((psi[k + 1, i, jp] - psi[k - 1, i, jp])
                       - (psi[k + 1, i, jm] - psi[k - 1, i, jm])) * halfM * half_invh
                out[k - 1, i, j] = (0.5 * lap * a[k - 1, i, j] + rho[k - 1, i, j] * ptt
                                    - gx[k - 1, i, j] * dxt - gy[k - 1, i, j] * dyt)
    return out_a
