"""Radar link budget and LFM pulse-train delay-Doppler Fisher information."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import NOISE_DENSITY_REF, SPEED_OF_LIGHT


@dataclass(frozen=True)
class LfmPulseTrain:
    """Train of P identical up-chirps.

    Attributes:
        f_B: Sweep bandwidth [Hz].
        T_0: Single-pulse duration [s].
        T_R: Pulse repetition interval [s].
        P: Number of pulses.
        f_c: Carrier frequency [Hz].
    """

    f_B: float = 50e6
    T_0: float = 100e-6
    T_R: float = 1e-3
    P: int = 20
    f_c: float = 2.4e9

    def __post_init__(self):
        if not (self.f_B > 0 and self.T_0 > 0 and self.f_c > 0):
            raise ValueError("f_B, T_0 and f_c must be positive")
        if self.T_R < self.T_0:
            raise ValueError(f"T_R ({self.T_R}) must be >= T_0 ({self.T_0})")
        if int(self.P) != self.P or self.P < 1:
            raise ValueError(f"P must be a positive integer, got {self.P}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c


@dataclass(frozen=True)
class LinkBudget:
    """Free-space radar equation inputs, all linear.

    ``array_gain`` stands in for a(θ)^H N^-1 a(θ) under spatially white
    noise (16 for a 4x2x2 array).  ``bandwidth`` is the receiver noise
    bandwidth; setting it to 1/T_0 turns the SNR into the pulse energy
    ratio E_s/N_0 instead.
    """

    tx_power: float = 10 ** (3.3) / 1000.0
    tx_gain: float = 10.0
    rx_gain: float = 10.0
    rcs: float = 0.1
    noise_figure: float = 10 ** 0.4
    array_gain: float = 16.0
    bandwidth: float = 50e6

    def __post_init__(self):
        for name in ("tx_power", "tx_gain", "rx_gain", "rcs", "noise_figure", "array_gain", "bandwidth"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"LinkBudget.{name} must be positive and finite, got {value}")

    def snr_constant(self, wavelength: float) -> float:
        """SNR * r_t^2 * r_r^2; the range-independent part of the radar equation."""
        num = (
            self.tx_power * self.tx_gain * self.rx_gain * wavelength**2
            * self.rcs * self.array_gain
        )
        den = (4 * math.pi) ** 3 * NOISE_DENSITY_REF * self.noise_figure * self.bandwidth
        return num / den


def bistatic_snr(budget: LinkBudget, r_t: float, r_r: float, wavelength: float) -> float:
    """Single-pulse post-array SNR for the leader -> target -> receiver path.

    For the monostatic leader pass ``r_r = r_t``.
    """
    if not (r_t > 0 and r_r > 0):
        raise ValueError(f"ranges must be positive, got r_t={r_t}, r_r={r_r}")
    return budget.snr_constant(wavelength) / (r_t**2 * r_r**2)


def lfm_unit_fim(w: LfmPulseTrain) -> np.ndarray:
    """Delay-Doppler FIM of the pulse train at unit single-pulse SNR."""
    f_B, T_0, T_R, P = w.f_B, w.T_0, w.T_R, w.P
    a11 = math.pi**2 * f_B**2 / 3.0
    a12 = -math.pi * f_B * T_0 / 6.0
    a22 = T_0**2 / 12.0 * (1.0 + (T_R / T_0) ** 2 * (P**2 - 1))
    return 2.0 * P * np.array([[a11, a12], [a12, a22]])


def lfm_fim(w: LfmPulseTrain, snr1: float) -> np.ndarray:
    """Fisher information for [delay, Doppler] of an LFM pulse train.

    Returns the symmetric 2x2 matrix in units [[s^-2, 1], [1, Hz^-2]].  It is
    positive definite for P >= 2; a single chirp (P = 1) has the familiar
    delay-Doppler ridge and a rank-one FIM.
    """
    if not snr1 > 0:
        raise ValueError(f"snr1 must be positive, got {snr1}")
    return snr1 * lfm_unit_fim(w)
