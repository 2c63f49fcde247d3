"""Pure-numpy implementation of the batch FIM kernel.

Same contract as the compiled ``_fim_core.fused_fim``; vectorised over
(draw, radar) instead of looping.
"""

import numpy as np

from .constants import SPEED_OF_LIGHT as C


def fused_fim(nodes, p, v, snr_const, a_unit, wavelength, lam_t, lam_f, perfect, diagonal):
    d = p[:, None, :] - nodes[None, :, :]  # (M, N, 3)
    r = np.sqrt(np.einsum("mnk,mnk->mn", d, d))
    u = d / r[..., None]
    u_t, r_t = u[:, :1, :], r[:, :1]
    dots = np.einsum("mnk,mk->mn", u, v)

    a = u_t + u
    e = a / wavelength
    proj = v[:, None, :] - dots[..., None] * u
    b = ((v[:, None, :] - dots[:, :1, None] * u_t) / r_t[..., None] + proj / r[..., None]) / wavelength

    snr = snr_const / (r_t**2 * r**2)
    u12 = 0.0 if diagonal else a_unit[0, 1]
    A11, A12, A22 = snr * a_unit[0, 0], snr * u12, snr * a_unit[1, 1]

    l1 = np.broadcast_to(lam_t, A11.shape)
    l2 = np.broadcast_to(lam_f, A11.shape)
    M11, M22 = A11 + l1, A22 + l2
    det = M11 * M22 - A12 * A12
    with np.errstate(invalid="ignore", divide="ignore"):
        X11, X12 = M22 * l1 / det, -A12 * l2 / det
        X21, X22 = -A12 * l1 / det, M11 * l2 / det
    W11 = A11 * X11 + A12 * X21
    W22 = A12 * X12 + A22 * X22
    W12 = 0.5 * ((A11 * X12 + A12 * X22) + (A12 * X11 + A22 * X21))
    pf = np.asarray(perfect, dtype=bool)[None, :]
    W11 = np.where(pf, A11, W11) / C**2
    W12 = np.where(pf, A12, W12) / C
    W22 = np.where(pf, A22, W22)

    J = np.zeros((p.shape[0], 6, 6))
    ab = np.einsum("mn,mnk,mnl->mkl", W12, a, b)
    J[:, :3, :3] = (
        np.einsum("mn,mnk,mnl->mkl", W11, a, a) + ab + ab.transpose(0, 2, 1)
        + np.einsum("mn,mnk,mnl->mkl", W22, b, b)
    )
    pv = np.einsum("mnk,mnl->mkl", W12[..., None] * a + W22[..., None] * b, e)
    J[:, :3, 3:] = pv
    J[:, 3:, :3] = pv.transpose(0, 2, 1)
    J[:, 3:, 3:] = np.einsum("mn,mnk,mnl->mkl", W22, e, e)
    return J
