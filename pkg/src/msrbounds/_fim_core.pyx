# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernel: fused 6x6 position/velocity FIM per target draw."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef double C = 299792458.0


def fused_fim(
    double[:, ::1] nodes,
    double[:, ::1] p,
    double[:, ::1] v,
    double snr_const,
    double[:, ::1] a_unit,
    double wavelength,
    double[::1] lam_t,
    double[::1] lam_f,
    unsigned char[::1] perfect,
    bint diagonal,
):
    cdef Py_ssize_t M = p.shape[0]
    cdef Py_ssize_t N = nodes.shape[0]
    out = np.zeros((M, 6, 6), dtype=np.float64)
    cdef double[:, :, ::1] J = out
    cdef Py_ssize_t m, i, k, l
    cdef double ut[3]
    cdef double ui[3]
    cdef double a[3]
    cdef double b[3]
    cdef double e[3]
    cdef double dt[3]
    cdef double r_t, r_i, snr, s, dot_t, dot_i
    cdef double A11, A12, A22, M11, M12, M22, det, l1, l2
    cdef double X11, X12, X21, X22, W11, W12, W22
    cdef double inv_lam = 1.0 / wavelength
    cdef double u11 = a_unit[0, 0], u12 = a_unit[0, 1], u22 = a_unit[1, 1]
    if diagonal:
        u12 = 0.0

    with nogil:
        for m in range(M):
            for k in range(3):
                dt[k] = p[m, k] - nodes[0, k]
            r_t = sqrt(dt[0] * dt[0] + dt[1] * dt[1] + dt[2] * dt[2])
            for k in range(3):
                ut[k] = dt[k] / r_t
            dot_t = ut[0] * v[m, 0] + ut[1] * v[m, 1] + ut[2] * v[m, 2]

            for i in range(N):
                if i == 0:
                    r_i = r_t
                    for k in range(3):
                        ui[k] = ut[k]
                    dot_i = dot_t
                else:
                    for k in range(3):
                        ui[k] = p[m, k] - nodes[i, k]
                    r_i = sqrt(ui[0] * ui[0] + ui[1] * ui[1] + ui[2] * ui[2])
                    for k in range(3):
                        ui[k] = ui[k] / r_i
                    dot_i = ui[0] * v[m, 0] + ui[1] * v[m, 1] + ui[2] * v[m, 2]

                # G rows: delay row scaled by c -> a; Doppler row -> [b, e]
                for k in range(3):
                    a[k] = ut[k] + ui[k]
                    e[k] = a[k] * inv_lam
                    b[k] = ((v[m, k] - dot_t * ut[k]) / r_t
                            + (v[m, k] - dot_i * ui[k]) / r_i) * inv_lam

                snr = snr_const / (r_t * r_t * r_i * r_i)
                A11 = snr * u11
                A12 = snr * u12
                A22 = snr * u22
                if perfect[i]:
                    W11 = A11
                    W12 = A12
                    W22 = A22
                else:
                    # A (A + L)^-1 L, closed form for 2x2
                    l1 = lam_t[i]
                    l2 = lam_f[i]
                    M11 = A11 + l1
                    M12 = A12
                    M22 = A22 + l2
                    det = M11 * M22 - M12 * M12
                    X11 = M22 * l1 / det
                    X12 = -M12 * l2 / det
                    X21 = -M12 * l1 / det
                    X22 = M11 * l2 / det
                    W11 = A11 * X11 + A12 * X21
                    W22 = A12 * X12 + A22 * X22
                    W12 = 0.5 * ((A11 * X12 + A12 * X22) + (A12 * X11 + A22 * X21))
                W11 = W11 / (C * C)
                W12 = W12 / C

                for k in range(3):
                    for l in range(3):
                        J[m, k, l] += (W11 * a[k] * a[l]
                                       + W12 * (a[k] * b[l] + b[k] * a[l])
                                       + W22 * b[k] * b[l])
                        s = (W12 * a[k] + W22 * b[k]) * e[l]
                        J[m, k, 3 + l] += s
                        J[m, 3 + l, k] += s
                        J[m, 3 + k, 3 + l] += W22 * e[k] * e[l]
    return out
