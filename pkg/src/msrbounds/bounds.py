"""Bayesian delay-Doppler information, nuisance elimination and fusion.

Per radar, the delay/Doppler FIM ``A`` is augmented with Gaussian priors
on the residual clock and carrier offsets.  Eliminating the offsets by
Schur complement gives the equivalent information ``J_eq``, whose inverse
is that radar's TOA/FOA measurement covariance.  Radars are fused by
summing G^T Σ^{-1} G over the network.

The delay and Doppler axes differ by ~20 orders of magnitude in Fisher
units, so every inversion here runs on a diagonally equilibrated copy and
is mapped back afterwards.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import SPEED_OF_LIGHT
from .errors import ConfigurationError, UnidentifiableLinkError
from .geometry import (
    MeasurementJacobian,
    RadarNode,
    TargetState,
    compute_geometry,
    jacobian,
)
from .radar_link import LfmPulseTrain, LinkBudget, bistatic_snr, lfm_fim

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12
RANK_RTOL = 1e-10
_KNOWN_OFFSET_RATIO = 1e30


@dataclass(frozen=True)
class BayesianInfo:
    """Delay-Doppler FIM, offset prior and the equivalent information.

    ``Lambda`` is None on the perfect-sync path.
    """

    A: np.ndarray
    Lambda: np.ndarray | None
    J_eq: np.ndarray

    @property
    def perfect_sync(self) -> bool:
        return self.Lambda is None


@dataclass(frozen=True)
class MeasurementCovariance:
    """Σ = J_eq^-1 for one radar; ``precision`` keeps J_eq itself."""

    Sigma: np.ndarray
    precision: np.ndarray


@dataclass(frozen=True)
class RankReport:
    rank: int
    rank_A: int
    singular_values: np.ndarray
    block: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class BoundResult:
    """Fused position/velocity bound for one target.

    When ``singular`` is set the FIM could not be inverted within the
    condition guard: ``crlb`` then holds the pseudo-inverse, ``peb``/``veb``
    are infinite and ``peb_pinv``/``veb_pinv`` carry the pseudo-inverse
    values for inspection.
    """

    J: np.ndarray
    crlb: np.ndarray
    peb: float
    veb: float
    condition_number: float
    singular: bool = False
    peb_pinv: float = math.nan
    veb_pinv: float = math.nan
    n_radars: int = 0


@dataclass(frozen=True)
class MonostaticBaseline:
    """Range and range-rate error bounds of the leader on its own."""

    sigma_tau: float
    sigma_f: float
    range_error: float
    range_rate_error: float


def _equilibrate(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (D M D, d) with D = diag(d) scaling the diagonal to ones."""
    diag = np.diagonal(M, axis1=-2, axis2=-1)
    d = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 1.0)
    return M * d[..., :, None] * d[..., None, :], d


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def prior_matrix(sigma_t: float, sigma_f: float) -> np.ndarray:
    """diag(σ_t^-2, σ_f^-2); an infinite σ contributes zero information."""
    sig = np.array([sigma_t, sigma_f], dtype=float)
    with np.errstate(divide="ignore"):
        return np.diag(1.0 / sig**2)


def schur_eq(A: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    """A - A (A + Λ)^-1 A, evaluated as A (A + Λ)^-1 Λ on a scaled system.

    Both forms are algebraically equal; the second avoids the cancellation
    of the first when Λ is small compared with A.
    """
    _, d = _equilibrate(A + Lam)
    As = A * d[:, None] * d[None, :]
    Ls = Lam * d[:, None] * d[None, :]
    Js = As @ np.linalg.solve(As + Ls, Ls)
    return _sym(Js / d[:, None] / d[None, :])


def equivalent_bim(
    A: np.ndarray,
    sigma_t: float = 0.0,
    sigma_f: float = 0.0,
    perfect_sync: bool = False,
) -> BayesianInfo:
    """Equivalent BIM for [τ, f] after eliminating the sync offsets.

    ``sigma_t == sigma_f == 0`` is treated as perfect synchronization, the
    Λ -> ∞ limit in which J_eq = A.
    """
    A = np.asarray(A, dtype=float)
    if perfect_sync or (sigma_t == 0 and sigma_f == 0):
        return BayesianInfo(A, None, A.copy())
    if sigma_t < 0 or sigma_f < 0:
        raise ValueError("prior standard deviations must be non-negative")
    Lam = prior_matrix(sigma_t, sigma_f)
    if sigma_t == 0 or sigma_f == 0:
        # One offset known exactly: stand in a prior far stronger than A.
        for k, sig in enumerate((sigma_t, sigma_f)):
            if sig == 0:
                Lam[k, k] = _KNOWN_OFFSET_RATIO * (A[k, k] if A[k, k] > 0 else 1.0)
    return BayesianInfo(A, Lam, schur_eq(A, Lam))


def full_bim_rank_check(A: np.ndarray) -> RankReport:
    """Numerical rank of the offset-augmented FIM [[A, A], [A, A]].

    Rank is counted on the equilibrated block with a relative singular
    value threshold of 1e-10.
    """
    A = np.asarray(A, dtype=float)
    block = np.block([[A, A], [A, A]])

    def rank(M):
        Ms, _ = _equilibrate(M)
        s = np.linalg.svd(Ms, compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0, s
        return int(np.sum(s > RANK_RTOL * s[0])), s

    r_block, s_block = rank(block)
    r_a, _ = rank(A)
    return RankReport(r_block, r_a, s_block, block)


def _spd_inverse(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse of a symmetric PSD matrix and its equilibrated condition number."""
    Ms, d = _equilibrate(M)
    w = np.linalg.eigvalsh(Ms)
    cond = math.inf if w[0] <= 0 else float(w[-1] / w[0])
    if not cond < COND_LIMIT:
        return np.full_like(M, np.nan), cond
    L = np.linalg.cholesky(Ms)
    Linv = np.linalg.solve(L, np.eye(len(M)))
    inv = (Linv.T @ Linv) * d[:, None] * d[None, :]
    return _sym(inv), cond


def measurement_covariance(info: BayesianInfo) -> MeasurementCovariance:
    Sigma, cond = _spd_inverse(info.J_eq)
    if not np.all(np.isfinite(Sigma)):
        raise UnidentifiableLinkError(
            f"equivalent delay-Doppler information is singular (condition {cond:.3g})"
        )
    return MeasurementCovariance(Sigma, info.J_eq.copy())


def _bounds_from_crlb(crlb: np.ndarray) -> tuple[float, float]:
    peb = math.sqrt(max(float(np.trace(crlb[:3, :3])), 0.0))
    veb = math.sqrt(max(float(np.trace(crlb[3:, 3:])), 0.0))
    return peb, veb


def invert_fim(J: np.ndarray, n_radars: int = 0) -> BoundResult:
    """CRLB and PEB/VEB from a fused 6x6 FIM, with the condition guard."""
    J = _sym(np.asarray(J, dtype=float))
    crlb, cond = _spd_inverse(J)
    if np.all(np.isfinite(crlb)):
        peb, veb = _bounds_from_crlb(crlb)
        return BoundResult(J, crlb, peb, veb, cond, False, peb, veb, n_radars)
    Js, d = _equilibrate(J)
    pinv = _sym(np.linalg.pinv(Js, rcond=1.0 / COND_LIMIT, hermitian=True) * d[:, None] * d[None, :])
    peb_p, veb_p = _bounds_from_crlb(pinv)
    return BoundResult(J, pinv, math.inf, math.inf, cond, True, peb_p, veb_p, n_radars)


def fuse(
    jacobians: Sequence[MeasurementJacobian],
    covs: Sequence[MeasurementCovariance],
    balanced: bool = True,
) -> BoundResult:
    """Sum per-radar information G^T Σ^-1 G and invert.

    With ``balanced`` the delay rows are expressed in metres (scaled by c)
    before accumulation; the result is mathematically identical.
    """
    if len(jacobians) != len(covs):
        raise ConfigurationError("one covariance per Jacobian is required")
    if not jacobians:
        raise ConfigurationError("fusion needs at least one radar")
    s = np.array([SPEED_OF_LIGHT, 1.0]) if balanced else np.ones(2)
    J = np.zeros((6, 6))
    for jac, cov in zip(jacobians, covs):
        G = jac.G * s[:, None]
        W = cov.precision / s[:, None] / s[None, :]
        J += G.T @ W @ G
    return invert_fim(J, len(jacobians))


def radar_information(
    nodes: Sequence[RadarNode],
    target: TargetState,
    waveform: LfmPulseTrain,
    budget: LinkBudget,
    priors=None,
    diagonal_fim: bool = False,
) -> tuple[list[MeasurementJacobian], list[MeasurementCovariance]]:
    """Per-radar Jacobians and measurement covariances for one target.

    ``priors`` is a sequence of objects with ``sigma_t``/``sigma_f``
    (index-aligned with ``nodes``) or None for ideal synchronization.
    Radars whose equivalent information is singular are skipped with a
    warning.  ``diagonal_fim`` drops the delay-Doppler coupling term of
    each A, which decouples velocity information from clock errors.
    """
    lam = waveform.wavelength
    cache = compute_geometry(nodes, target)
    jacs, covs = [], []
    for i in range(len(nodes)):
        snr = bistatic_snr(budget, cache.r_t, cache.r_r[i], lam)
        A = lfm_fim(waveform, snr)
        if diagonal_fim:
            A = np.diag(np.diag(A))
        if priors is None:
            info = equivalent_bim(A, perfect_sync=True)
        else:
            info = equivalent_bim(A, priors[i].sigma_t, priors[i].sigma_f)
        try:
            cov = measurement_covariance(info)
        except UnidentifiableLinkError as exc:
            logger.warning("radar %d dropped from fusion: %s", i, exc)
            continue
        jacs.append(jacobian(cache, i, target.v, lam))
        covs.append(cov)
    return jacs, covs


def network_bound(
    nodes: Sequence[RadarNode],
    target: TargetState,
    waveform: LfmPulseTrain,
    budget: LinkBudget,
    priors=None,
    diagonal_fim: bool = False,
) -> BoundResult:
    """End-to-end PEB/VEB for one target through the reference (per-radar) path."""
    jacs, covs = radar_information(nodes, target, waveform, budget, priors, diagonal_fim)
    return fuse(jacs, covs)


def monostatic_baseline(
    node: RadarNode,
    target: TargetState,
    waveform: LfmPulseTrain,
    budget: LinkBudget,
) -> MonostaticBaseline:
    """Range / range-rate bounds of the leader alone (perfectly synchronized)."""
    if not node.is_leader:
        raise ConfigurationError("the monostatic baseline is defined for the leader only")
    cache = compute_geometry([node], target)
    snr = bistatic_snr(budget, cache.r_t, cache.r_t, waveform.wavelength)
    A = lfm_fim(waveform, snr)
    cov = measurement_covariance(equivalent_bim(A, perfect_sync=True))
    s_tau = math.sqrt(cov.Sigma[0, 0])
    s_f = math.sqrt(cov.Sigma[1, 1])
    return MonostaticBaseline(
        s_tau, s_f, SPEED_OF_LIGHT * s_tau / 2.0, waveform.wavelength * s_f / 2.0
    )
