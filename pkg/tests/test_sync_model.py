import math
from dataclasses import replace

import numpy as np
import pytest

from msrbounds.geometry import build_layout, nodes_from_positions
from msrbounds.sync_model import (
    SyncChannelRealization,
    SyncLinkConfig,
    clock_error_std,
    cfo_error_std,
    compute_priors,
    delay_crlb_var,
    draw_path_gains,
    follower_priors,
    free_space_loss_db,
    los_channel,
    path_loss_db,
    reference_to_carrier_cfo,
    sample_sync_channel,
    sample_sync_channels,
    sync_link_snr,
    uma_los_loss_db,
)

LOS = dict(rician_k=math.inf, rms_delay_spread=0.0)


def db(x):
    return 10 * math.log10(x)


class TestLinkBudget:
    def test_free_space_oracle(self):
        cfg = SyncLinkConfig(path_loss="free_space", bandwidth=10e6)
        assert free_space_loss_db(500.0, 2.4e9) == pytest.approx(94.0314, abs=1e-4)
        assert sync_link_snr(cfg, 500.0) == pytest.approx(12427.33212411264, rel=1e-12)

    def test_free_space_doubling(self):
        cfg = SyncLinkConfig(path_loss="free_space")
        assert db(sync_link_snr(cfg, 300.0)) - db(sync_link_snr(cfg, 600.0)) == pytest.approx(6.0206, abs=1e-4)

    def test_uma_excess(self):
        excess = uma_los_loss_db(500.0, 2.4e9) - free_space_loss_db(500.0, 2.4e9)
        assert uma_los_loss_db(500.0, 2.4e9) == pytest.approx(94.9816, abs=1e-4)
        assert excess == pytest.approx(0.95016, abs=1e-4)
        uma, fs = SyncLinkConfig(), SyncLinkConfig(path_loss="free_space")
        assert db(sync_link_snr(fs, 500.0)) - db(sync_link_snr(uma, 500.0)) == pytest.approx(excess, abs=1e-9)

    def test_uma_beyond_breakpoint_is_steeper(self):
        # breakpoint 4 (h-1)^2 f_c / c ≈ 2.6 km for 10 m masts
        near = uma_los_loss_db(2000.0, 2.4e9) - uma_los_loss_db(1000.0, 2.4e9)
        far = uma_los_loss_db(8000.0, 2.4e9) - uma_los_loss_db(4000.0, 2.4e9)
        assert near == pytest.approx(6.6227, abs=1e-3)
        assert far > near

    def test_path_loss_dispatch(self):
        assert path_loss_db(SyncLinkConfig(path_loss="free_space"), 800.0) == free_space_loss_db(800.0, 2.4e9)


class TestChannel:
    def test_los_only_single_tap(self):
        ch = sample_sync_channel(SyncLinkConfig(**LOS), 3)
        assert len(ch.taps) == 1
        assert ch.dominant_gain == 1.0
        np.testing.assert_allclose(ch.tone_gains, [1.0, 1.0], rtol=1e-15)

    def test_zero_spread_single_tap(self):
        ch = sample_sync_channel(SyncLinkConfig(rms_delay_spread=0.0), 3)
        assert len(ch.taps) == 1

    def test_tap_grid(self):
        cfg = SyncLinkConfig(bandwidth=50e6, rms_delay_spread=100e-9)
        ch = sample_sync_channel(cfg, 0)
        np.testing.assert_allclose(np.diff(ch.tap_delays), 1 / 50e6)
        assert ch.tap_delays[-1] <= 5 * 100e-9 + 1e-15

    def test_narrow_band_collapses_to_one_tap(self):
        cfg = SyncLinkConfig(bandwidth=1e6, rms_delay_spread=50e-9)
        assert len(sample_sync_channel(cfg, 0).taps) == 1

    def test_mean_total_power(self):
        cfg = SyncLinkConfig()
        g = draw_path_gains(cfg, np.random.default_rng(1), 100_000)
        assert np.mean(np.sum(np.abs(g) ** 2, axis=1)) == pytest.approx(1.0, rel=0.01)

    def test_empirical_rician_k(self):
        cfg = SyncLinkConfig(rician_k=3.0)
        g = draw_path_gains(cfg, np.random.default_rng(2), 100_000)[:, 0]
        los = abs(np.mean(g)) ** 2
        diffuse = np.var(g)
        assert los / diffuse == pytest.approx(3.0, rel=0.05)

    def test_deterministic(self):
        cfg = SyncLinkConfig()
        a = sample_sync_channels(cfg, np.random.SeedSequence(5), 50)
        b = sample_sync_channels(cfg, np.random.SeedSequence(5), 50)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


class TestClockError:
    def test_delay_crlb_oracle(self):
        # SNR·BT·|h|^2 = 1000 at B = 50 MHz
        cfg = SyncLinkConfig(bandwidth=50e6)
        s_tau = math.sqrt(float(delay_crlb_var(cfg, 1000.0, 1.0)))
        assert s_tau == pytest.approx(2.465617776246e-10, rel=1e-12)
        assert clock_error_std(cfg, 1000.0, los_channel(cfg)) == pytest.approx(4.931235552492e-10, rel=1e-12)

    def test_variance_rule(self):
        cfg = SyncLinkConfig(clock_rule="variance")
        s_tau = math.sqrt(float(delay_crlb_var(cfg, 1000.0, 1.0)))
        assert clock_error_std(cfg, 1000.0, los_channel(cfg)) == pytest.approx(math.sqrt(2) * s_tau)

    def test_distance_doubling(self):
        cfg = SyncLinkConfig(path_loss="free_space", **LOS)
        a = follower_priors(cfg, 400.0, 1, 0).sigma_t
        b = follower_priors(cfg, 800.0, 1, 0).sigma_t
        assert b / a == pytest.approx(2.0, rel=1e-12)

    def test_wider_band_is_better(self):
        s = [follower_priors(SyncLinkConfig(bandwidth=b, **LOS), 500.0, 1, 0).sigma_t for b in (10e6, 50e6, 100e6)]
        assert s[0] > s[1] > s[2]


class TestCfo:
    def test_pll_scaling(self):
        assert reference_to_carrier_cfo(1.0, 240.0) == 240.0
        assert SyncLinkConfig(f_c=2.4e9, tone_separation=10e6).pll == 240.0
        assert SyncLinkConfig(f_c=2.4e9, tone_separation=20e6).pll == 120.0
        assert SyncLinkConfig(pll_factor=17.0).pll == 17.0

    def test_pll_rescales_error(self):
        ch = sample_sync_channel(SyncLinkConfig(), 9)
        a = cfo_error_std(SyncLinkConfig(tone_separation=10e6), 1e4, ch)
        b = cfo_error_std(SyncLinkConfig(tone_separation=20e6), 1e4, ch)
        assert a / b == pytest.approx(2.0, rel=1e-12)

    def test_vanishes_without_error_sources(self):
        cfg = SyncLinkConfig(max_doppler=0.0, **LOS)
        assert cfo_error_std(cfg, 1e30, los_channel(cfg)) < 1e-9

    def test_doppler_floor(self):
        cfg = SyncLinkConfig(**LOS)
        assert cfo_error_std(cfg, 1e30, los_channel(cfg)) == pytest.approx(240 * 0.1 / math.sqrt(3), rel=1e-9)

    def test_bandwidth_invariant(self):
        vals = [
            follower_priors(SyncLinkConfig(bandwidth=b), 700.0, 200, np.random.SeedSequence(4)).sigma_f
            for b in (10e6, 50e6, 100e6)
        ]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-12)

    def test_deep_fade_is_finite(self):
        cfg = SyncLinkConfig()
        ch = replace(sample_sync_channel(cfg, 0), tone_gains=np.array([0.0, 1.0]))
        assert math.isfinite(cfo_error_std(cfg, 1e3, ch))

    def test_delay_spread_paired_seed(self):
        snr = 1e3
        out = []
        for tau in (10e-9, 100e-9):
            cfg = SyncLinkConfig(rms_delay_spread=tau)
            _, tones = sample_sync_channels(cfg, np.random.SeedSequence(11), 1000)
            out.append(np.median([cfo_error_std(cfg, snr, SyncChannelRealization(np.ones(1), np.zeros(1), t)) for t in tones]))
        assert out[1] > out[0]


class TestPriors:
    def test_leader_zero(self, grid25):
        pr = compute_priors(grid25, SyncLinkConfig(), 10, 0)
        assert (pr[0].sigma_t, pr[0].sigma_f) == (0.0, 0.0)
        assert len(pr) == 25
        assert all(p.sigma_t > 0 and p.sigma_f > 0 for p in pr[1:])

    def test_equal_distance_symmetry(self):
        nodes = nodes_from_positions([(0, 0, 10), (500, 0, 10), (0, 500, 10), (-500, 0, 10)])
        pr = compute_priors(nodes, SyncLinkConfig(**LOS), 5, 0)
        assert pr[1].sigma_t == pr[2].sigma_t == pr[3].sigma_t

    def test_corner_worse_than_edge(self, grid25):
        pr = compute_priors(grid25, SyncLinkConfig(), 200, 0)
        # follower 7 sits at (-500, -500), 8 at (0, -500)
        assert pr[7].sigma_t > pr[8].sigma_t

    def test_reproducible(self, grid25):
        a = compute_priors(grid25, SyncLinkConfig(), 1, 42)
        b = compute_priors(grid25, SyncLinkConfig(), 1, 42)
        assert a == b

    def test_frozen_follower(self):
        # regression anchor for the sampler and averaging chain
        pr = follower_priors(SyncLinkConfig(), 500.0, 200, np.random.SeedSequence(0), radar_id=8)
        assert pr.outage_fraction == pytest.approx(0.035)
        assert pr.sigma_t == pytest.approx(1.4896927389322253e-09, rel=1e-9)
        assert pr.sigma_f == pytest.approx(40.01187194492392, rel=1e-9)

    def test_tone_outage_tames_average(self):
        # followers at equal distance get matching σ_f once deep tone fades
        # are counted as outages instead of averaged
        cfg = SyncLinkConfig()
        vals = [follower_priors(cfg, 1000.0, 2000, np.random.SeedSequence(s)).sigma_f for s in range(4)]
        assert max(vals) / min(vals) < 1.1
        raw = replace(cfg, tone_outage_threshold=0.0)
        vals = [follower_priors(raw, 1000.0, 2000, np.random.SeedSequence(s)).sigma_f for s in range(4)]
        assert max(vals) / min(vals) > 1.1

    def test_all_outage(self):
        cfg = SyncLinkConfig(outage_threshold=1e9)
        pr = follower_priors(cfg, 500.0, 20, 0)
        assert math.isinf(pr.sigma_t) and pr.outage_fraction == 1.0

    def test_needs_realizations(self):
        with pytest.raises(ValueError):
            follower_priors(SyncLinkConfig(), 500.0, 0, 0)
