"""Batched bound evaluation for many target draws.

The inner loop (per draw, per radar: geometry, SNR, Schur-reduced 2x2
information, rank-2 update of the 6x6 FIM) runs in a compiled Cython
kernel when the extension is built, and in a vectorised numpy fallback
otherwise.  Set ``MSRBOUNDS_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _fim_fallback
from .bounds import COND_LIMIT
from .constants import MIN_RANGE_M
from .errors import DegenerateGeometryError
from .radar_link import LfmPulseTrain, LinkBudget, lfm_unit_fim

_KNOWN_OFFSET_PRIOR = 1e200

if os.environ.get("MSRBOUNDS_PURE_PYTHON", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _fim_core as _core
    except ImportError:  # extension not built
        _core = None

BACKEND = "cython" if _core is not None else "numpy"

_IMPLS = {"numpy": _fim_fallback.fused_fim}
if _core is not None:
    _IMPLS["cython"] = _core.fused_fim


def available_backends() -> list[str]:
    return list(_IMPLS)


@dataclass(frozen=True)
class BatchBounds:
    """PEB/VEB for a batch of draws; ``singular`` rows carry inf bounds."""

    J: np.ndarray
    peb: np.ndarray
    veb: np.ndarray
    condition_number: np.ndarray
    singular: np.ndarray
    peb_pinv: np.ndarray
    veb_pinv: np.ndarray


def prior_arrays(priors, n_radars: int):
    """Turn per-radar (σ_t, σ_f) into prior precisions and perfect-sync flags."""
    lam_t = np.ones(n_radars)
    lam_f = np.ones(n_radars)
    perfect = np.ones(n_radars, dtype=np.uint8)
    if priors is None:
        return lam_t, lam_f, perfect
    for i, pr in enumerate(priors):
        st, sf = pr.sigma_t, pr.sigma_f
        if st == 0 and sf == 0:
            continue
        perfect[i] = 0
        lam_t[i] = _KNOWN_OFFSET_PRIOR if st == 0 else 1.0 / st**2
        lam_f[i] = _KNOWN_OFFSET_PRIOR if sf == 0 else 1.0 / sf**2
    return lam_t, lam_f, perfect


def fused_fim(
    node_pos,
    p,
    v,
    waveform: LfmPulseTrain,
    budget: LinkBudget,
    priors=None,
    diagonal_fim: bool = False,
    backend: str | None = None,
) -> np.ndarray:
    """(M, 6, 6) fused FIMs for M target draws."""
    node_pos = np.ascontiguousarray(node_pos, dtype=float)
    p = np.ascontiguousarray(np.atleast_2d(p), dtype=float)
    v = np.ascontiguousarray(np.atleast_2d(v), dtype=float)
    if p.shape != v.shape or p.shape[1] != 3:
        raise ValueError("p and v must both be (M, 3)")
    d = p[:, None, :] - node_pos[None, :, :]
    rmin = np.sqrt(np.einsum("mnk,mnk->mn", d, d)).min() if p.size else math.inf
    if rmin < MIN_RANGE_M:
        raise DegenerateGeometryError(f"a target lies within {MIN_RANGE_M} m of a radar")
    lam_t, lam_f, perfect = prior_arrays(priors, len(node_pos))
    impl = _IMPLS[backend or BACKEND]
    return impl(
        node_pos, p, v,
        float(budget.snr_constant(waveform.wavelength)),
        np.ascontiguousarray(lfm_unit_fim(waveform)),
        float(waveform.wavelength),
        lam_t, lam_f, perfect, bool(diagonal_fim),
    )


def invert_batch(J: np.ndarray) -> BatchBounds:
    """Guarded inversion of a stack of 6x6 FIMs (equilibrated eigendecomposition)."""
    J = 0.5 * (J + J.transpose(0, 2, 1))
    diag = np.diagonal(J, axis1=1, axis2=2)
    dscale = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    Js = J * dscale[:, :, None] * dscale[:, None, :]
    w, V = np.linalg.eigh(Js)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(w[:, 0] > 0, w[:, -1] / w[:, 0], np.inf)
    singular = ~(cond < COND_LIMIT)
    cutoff = w[:, -1:] / COND_LIMIT
    keep = w > cutoff
    winv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    inv = np.einsum("mij,mj,mkj->mik", V, winv, V) * dscale[:, :, None] * dscale[:, None, :]
    pos = np.einsum("mii->m", inv[:, :3, :3])
    vel = np.einsum("mii->m", inv[:, 3:, 3:])
    peb_p = np.sqrt(np.maximum(pos, 0.0))
    veb_p = np.sqrt(np.maximum(vel, 0.0))
    peb = np.where(singular, np.inf, peb_p)
    veb = np.where(singular, np.inf, veb_p)
    return BatchBounds(J, peb, veb, cond, singular, peb_p, veb_p)


def batch_bounds(node_pos, p, v, waveform, budget, priors=None, diagonal_fim=False, backend=None) -> BatchBounds:
    return invert_batch(fused_fim(node_pos, p, v, waveform, budget, priors, diagonal_fim, backend))
