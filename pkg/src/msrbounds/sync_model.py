"""Error models for the leader-follower wireless synchronization links.

Time alignment uses a bidirectional LFM waveform exchange whose accuracy is
set by the first-path delay CRLB.  Frequency alignment extracts the tone
spacing of a two-tone broadcast; the spacing error is multiplied up to the
carrier by the follower's PLL.  Both error standard deviations become the
Gaussian priors on each follower's residual clock and carrier offsets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import NOISE_DENSITY_REF, SPEED_OF_LIGHT
from .geometry import RadarNode

logger = logging.getLogger(__name__)

PATH_LOSS_MODELS = ("uma", "free_space")
CLOCK_RULES = ("std", "variance")

# Faded tone gains are clipped here so deep fades give large but finite errors.
_TONE_GAIN_FLOOR = 1e-12


@dataclass(frozen=True)
class SyncLinkConfig:
    """Sync-link channel and transmit parameters (linear SI units).

    ``time_bandwidth`` fixes B_sync * T_sync, so sweeping ``bandwidth``
    keeps the waveform's time-bandwidth product constant.  The two-tone
    estimator integrates over ``tone_observation`` seconds, independent of
    the delay-estimation waveform.  ``channel_resolution`` is the delay
    grid on which the physical multipath is drawn; the delay estimator
    sees it binned to 1/B_sync.

    ``outage_threshold`` applies to the first-path power and
    ``tone_outage_threshold`` to each tone power; draws below either are
    sync outages, excluded from the corresponding variance average.
    """

    tx_power: float = 10 ** (3.3) / 1000.0
    tx_gain: float = 10 ** 0.1
    rx_gain: float = 10 ** 0.1
    f_c: float = 2.4e9
    bandwidth: float = 50e6
    time_bandwidth: float = 1.0
    noise_figure: float = 10 ** 0.4
    rician_k: float = 3.0
    rms_delay_spread: float = 100e-9
    max_doppler: float = 0.1
    tone_separation: float = 10e6
    pll_factor: float | None = None
    tone_observation: float = 1e-3
    channel_resolution: float = 10e-9
    path_loss: str = "uma"
    clock_rule: str = "std"
    outage_threshold: float = 1e-6
    tone_outage_threshold: float = 1e-2

    def __post_init__(self):
        positive = (
            "tx_power", "tx_gain", "rx_gain", "f_c", "bandwidth", "time_bandwidth",
            "noise_figure", "tone_separation", "tone_observation", "channel_resolution",
        )
        for name in positive:
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"SyncLinkConfig.{name} must be positive and finite, got {value}")
        if not self.tone_outage_threshold >= 0:
            raise ValueError(f"tone_outage_threshold must be >= 0, got {self.tone_outage_threshold}")
        if not self.rician_k >= 0:
            raise ValueError(f"rician_k must be >= 0, got {self.rician_k}")
        if not (self.rms_delay_spread >= 0 and math.isfinite(self.rms_delay_spread)):
            raise ValueError(f"rms_delay_spread must be >= 0, got {self.rms_delay_spread}")
        if not (self.max_doppler >= 0 and math.isfinite(self.max_doppler)):
            raise ValueError(f"max_doppler must be >= 0, got {self.max_doppler}")
        if self.pll_factor is not None and not self.pll_factor > 0:
            raise ValueError(f"pll_factor must be positive, got {self.pll_factor}")
        if self.path_loss not in PATH_LOSS_MODELS:
            raise ValueError(f"path_loss must be one of {PATH_LOSS_MODELS}, got {self.path_loss!r}")
        if self.clock_rule not in CLOCK_RULES:
            raise ValueError(f"clock_rule must be one of {CLOCK_RULES}, got {self.clock_rule!r}")

    @property
    def T_sync(self) -> float:
        return self.time_bandwidth / self.bandwidth

    @property
    def pll(self) -> float:
        """Reference-to-carrier multiplication ratio."""
        if self.pll_factor is not None:
            return self.pll_factor
        return self.f_c / self.tone_separation

    @property
    def noise_power(self) -> float:
        return NOISE_DENSITY_REF * self.noise_figure * self.bandwidth


@dataclass(frozen=True)
class SyncChannelRealization:
    """One draw of the leader-follower sync channel.

    Attributes:
        taps: Complex gains of the delay-resolvable taps (spacing 1/B_sync).
        tap_delays: Delays of ``taps`` [s].
        tone_gains: |H(f)|^2 at the two tone offsets -Δ/2 and +Δ/2.
    """

    taps: np.ndarray
    tap_delays: np.ndarray
    tone_gains: np.ndarray

    @property
    def dominant_gain(self) -> float:
        """|h^1_sync|^2, power of the first resolvable path."""
        return float(abs(self.taps[0]) ** 2)


@dataclass(frozen=True)
class SyncPriors:
    """Residual offset standard deviations for one radar.

    The leader carries zeros: offsets are defined relative to it.
    """

    radar_id: int
    distance: float
    sigma_t: float
    sigma_f: float
    outage_fraction: float = 0.0


# --------------------------------------------------------------------------
# Link budget
# --------------------------------------------------------------------------

def free_space_loss_db(distance: float, f_c: float) -> float:
    return 20.0 * math.log10(4.0 * math.pi * distance * f_c / SPEED_OF_LIGHT)


def uma_los_loss_db(distance: float, f_c: float, h_bs: float = 10.0, h_ut: float = 10.0) -> float:
    """3GPP TR 38.901 UMa-LOS path loss with an effective environment height of 1 m.

    ``distance`` is the 3-D separation; the break point uses the effective
    antenna heights h - 1 m.
    """
    fc_ghz = f_c / 1e9
    dh = h_bs - h_ut
    d2d = math.sqrt(max(distance**2 - dh**2, 0.0))
    d_bp = 4.0 * max(h_bs - 1.0, 0.0) * max(h_ut - 1.0, 0.0) * f_c / SPEED_OF_LIGHT
    if d2d <= d_bp:
        return 28.0 + 22.0 * math.log10(distance) + 20.0 * math.log10(fc_ghz)
    return (
        28.0 + 40.0 * math.log10(distance) + 20.0 * math.log10(fc_ghz)
        - 9.0 * math.log10(d_bp**2 + dh**2)
    )


def path_loss_db(cfg: SyncLinkConfig, distance: float, h_tx: float = 10.0, h_rx: float = 10.0) -> float:
    if cfg.path_loss == "free_space":
        return free_space_loss_db(distance, cfg.f_c)
    return uma_los_loss_db(distance, cfg.f_c, h_tx, h_rx)


def sync_link_snr(cfg: SyncLinkConfig, distance: float, h_tx: float = 10.0, h_rx: float = 10.0) -> float:
    """Pre-processing SNR P_sync / σ_n^2 after large-scale loss (no fading)."""
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    loss = 10.0 ** (path_loss_db(cfg, distance, h_tx, h_rx) / 10.0)
    return cfg.tx_power * cfg.tx_gain * cfg.rx_gain / (loss * cfg.noise_power)


# --------------------------------------------------------------------------
# Channel sampling
# --------------------------------------------------------------------------

def path_delays(cfg: SyncLinkConfig) -> np.ndarray:
    """Delay grid of the physical multipath, truncated at 5 τ_rms."""
    if cfg.rms_delay_spread == 0:
        return np.zeros(1)
    n = int(math.floor(5.0 * cfg.rms_delay_spread / cfg.channel_resolution + 1e-9)) + 1
    return np.arange(n) * cfg.channel_resolution


def power_delay_profile(cfg: SyncLinkConfig) -> np.ndarray:
    delays = path_delays(cfg)
    if len(delays) == 1:
        return np.ones(1)
    p = np.exp(-delays / cfg.rms_delay_spread)
    return p / p.sum()


def draw_path_gains(cfg: SyncLinkConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, L) complex path gains: Rician first path, Rayleigh elsewhere.

    Expected total power is 1; the first path splits its profile power
    K/(K+1) LOS (zero phase) and 1/(K+1) diffuse.
    """
    pdp = power_delay_profile(cfg)
    k = cfg.rician_k
    diffuse = pdp.copy()
    diffuse[0] = 0.0 if math.isinf(k) else pdp[0] / (k + 1.0)
    los = math.sqrt(pdp[0] - diffuse[0])
    z = rng.standard_normal((n, len(pdp), 2))
    h = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(diffuse / 2.0)
    h[:, 0] += los
    return h


def _resolve(cfg: SyncLinkConfig, gains: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bin physical paths into taps spaced 1/B_sync (nearest bin)."""
    delays = path_delays(cfg)
    bins = np.floor(delays * cfg.bandwidth + 0.5).astype(int)
    n_taps = int(bins[-1]) + 1
    taps = np.zeros(gains.shape[:-1] + (n_taps,), dtype=complex)
    for b in np.unique(bins):
        taps[..., b] = gains[..., bins == b].sum(axis=-1)
    return taps, np.arange(n_taps) / cfg.bandwidth


def _tone_gains(cfg: SyncLinkConfig, gains: np.ndarray) -> np.ndarray:
    delays = path_delays(cfg)
    offsets = np.array([-0.5, 0.5]) * cfg.tone_separation
    steer = np.exp(-2j * np.pi * np.outer(delays, offsets))  # (L, 2)
    return np.abs(gains @ steer) ** 2


def sample_sync_channels(cfg: SyncLinkConfig, rng, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised sampler.

    Returns:
        dominant: (n,) first resolvable tap powers |h^1|^2.
        tones: (n, 2) per-tone power gains.
    """
    rng = np.random.default_rng(rng)
    gains = draw_path_gains(cfg, rng, n)
    taps, _ = _resolve(cfg, gains)
    return np.abs(taps[:, 0]) ** 2, _tone_gains(cfg, gains)


def sample_sync_channel(cfg: SyncLinkConfig, rng_seed=None) -> SyncChannelRealization:
    """Draw a single channel realization (seed, SeedSequence or Generator)."""
    rng = np.random.default_rng(rng_seed)
    gains = draw_path_gains(cfg, rng, 1)
    taps, delays = _resolve(cfg, gains)
    return SyncChannelRealization(taps[0], delays, _tone_gains(cfg, gains)[0])


def los_channel(cfg: SyncLinkConfig) -> SyncChannelRealization:
    """Unit-gain, non-fading channel."""
    return SyncChannelRealization(np.ones(1, dtype=complex), np.zeros(1), np.ones(2))


# --------------------------------------------------------------------------
# Error models
# --------------------------------------------------------------------------

def mean_squared_bandwidth(bandwidth: float) -> float:
    """ζ_f^2 of an LFM pulse sweeping ``bandwidth`` Hz."""
    return (math.pi * bandwidth) ** 2 / 3.0


def delay_crlb_var(cfg: SyncLinkConfig, snr, dominant_gain):
    """First-path delay CRLB [s^2]; infinite where the gain is zero."""
    zeta2 = mean_squared_bandwidth(cfg.bandwidth)
    with np.errstate(divide="ignore"):
        return 1.0 / (2.0 * zeta2 * np.asarray(snr) * cfg.time_bandwidth * np.asarray(dominant_gain, dtype=float))


def clock_factor(cfg: SyncLinkConfig) -> float:
    """Clock error / delay error ratio: 2 in std, or sqrt(2) ("twice the variance")."""
    return 2.0 if cfg.clock_rule == "std" else math.sqrt(2.0)


def clock_error_std(cfg: SyncLinkConfig, snr: float, channel: SyncChannelRealization) -> float:
    """Residual clock-offset standard deviation [s] after the BDW exchange."""
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    var = float(delay_crlb_var(cfg, snr, channel.dominant_gain))
    return clock_factor(cfg) * math.sqrt(var)


def tone_frequency_var(cfg: SyncLinkConfig, snr, tone_gain):
    """Single-tone frequency CRLB [Hz^2] for half the sync power over T_obs.

    ``snr * bandwidth`` recovers received power over noise density, so the
    result does not depend on the sync bandwidth.
    """
    t_obs = cfg.tone_observation
    g = np.maximum(np.asarray(tone_gain, dtype=float), _TONE_GAIN_FLOOR)
    energy = 0.5 * np.asarray(snr) * cfg.bandwidth * t_obs * g
    return 3.0 / (2.0 * math.pi**2 * energy * t_obs**2)


def doppler_var(cfg: SyncLinkConfig) -> float:
    """Differential Doppler uniform on ±max_doppler."""
    return cfg.max_doppler**2 / 3.0


def reference_to_carrier_cfo(reference_error_hz, pll_factor: float):
    """Carrier offset produced by a reference-frequency error through the PLL."""
    return pll_factor * reference_error_hz


def reference_var(cfg: SyncLinkConfig, snr, tone_gains):
    tone_gains = np.asarray(tone_gains, dtype=float)
    return (
        tone_frequency_var(cfg, snr, tone_gains[..., 0])
        + tone_frequency_var(cfg, snr, tone_gains[..., 1])
        + doppler_var(cfg)
    )


def cfo_error_std(cfg: SyncLinkConfig, snr: float, channel: SyncChannelRealization) -> float:
    """Residual carrier-frequency-offset standard deviation [Hz]."""
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    return float(reference_to_carrier_cfo(math.sqrt(reference_var(cfg, snr, channel.tone_gains)), cfg.pll))


def follower_seed(master_seed: int, follower_id: int) -> np.random.SeedSequence:
    """Independent, scheduling-free stream per follower."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(follower_id,))


def follower_priors(
    cfg: SyncLinkConfig,
    distance: float,
    n_realizations: int,
    rng,
    h_tx: float = 10.0,
    h_rx: float = 10.0,
    radar_id: int = -1,
) -> SyncPriors:
    """Average error variances over channel draws at one leader distance.

    Draws whose first-path power falls below ``cfg.outage_threshold`` are
    left out of the clock-variance mean, and draws with a tone below
    ``cfg.tone_outage_threshold`` out of the frequency-variance mean.  The
    per-tone CRLB grows as 1/gain, so without the tone rule a Rayleigh-like
    tone makes the average hinge on the single deepest fade.
    ``outage_fraction`` counts draws in outage on either account.
    """
    if n_realizations < 1:
        raise ValueError("n_realizations must be >= 1")
    snr = sync_link_snr(cfg, distance, h_tx, h_rx)
    dominant, tones = sample_sync_channels(cfg, rng, n_realizations)
    ok_t = dominant >= cfg.outage_threshold
    ok_f = np.all(tones >= cfg.tone_outage_threshold, axis=1)
    outage = 1.0 - (ok_t & ok_f).mean()
    if ok_t.any():
        var_t = clock_factor(cfg) ** 2 * delay_crlb_var(cfg, snr, dominant[ok_t]).mean()
        sigma_t = math.sqrt(var_t)
    else:
        sigma_t = math.inf
    if ok_f.any():
        sigma_f = cfg.pll * math.sqrt(reference_var(cfg, snr, tones[ok_f]).mean())
    else:
        sigma_f = math.inf
    return SyncPriors(radar_id, distance, sigma_t, sigma_f, float(outage))


def compute_priors(
    nodes: Sequence[RadarNode],
    cfg: SyncLinkConfig,
    n_realizations: int,
    rng_seed: int = 0,
) -> list[SyncPriors]:
    """Per-radar sync priors, leader first with zero offsets."""
    leader = nodes[0]
    out = [SyncPriors(0, 0.0, 0.0, 0.0, 0.0)]
    for node in nodes[1:]:
        d = float(np.linalg.norm(node.position - leader.position))
        pri = follower_priors(
            cfg, d, n_realizations, follower_seed(rng_seed, node.id),
            h_tx=float(leader.position[2]), h_rx=float(node.position[2]), radar_id=node.id,
        )
        if math.isinf(pri.sigma_t) or math.isinf(pri.sigma_f):
            logger.warning("follower %d: every sync realization in outage", node.id)
        out.append(pri)
    return out
