import math

import numpy as np
import pytest
from conftest import random_spd

from msrbounds.bounds import (
    COND_LIMIT,
    equivalent_bim,
    full_bim_rank_check,
    fuse,
    invert_fim,
    measurement_covariance,
    monostatic_baseline,
    network_bound,
    radar_information,
    schur_eq,
)
from msrbounds.constants import SPEED_OF_LIGHT as C
from msrbounds.errors import ConfigurationError, UnidentifiableLinkError
from msrbounds.geometry import TargetState, build_layout
from msrbounds.radar_link import LinkBudget, bistatic_snr, lfm_fim
from msrbounds.sync_model import SyncPriors


FROZEN_RANGE_ERR = 3.6989451388319838
FROZEN_RATE_ERR = 24.239554353039698


def synced_priors(n, st=2e-9, sf=40.0):
    return [SyncPriors(0, 0, 0.0, 0.0)] + [SyncPriors(i, 0, st, sf) for i in range(1, n)]


def loewner_le(X, Y, tol=1e-10):
    """X ⪯ Y on the equilibrated difference."""
    d = 1 / np.sqrt(np.maximum(np.diag(Y), 1e-300))
    D = (Y - X) * d[:, None] * d[None, :]
    return np.linalg.eigvalsh(D).min() >= -tol


class TestEquivalentBim:
    def test_perfect_sync(self, waveform):
        A = lfm_fim(waveform, 0.3)
        info = equivalent_bim(A, perfect_sync=True)
        assert info.perfect_sync and info.Lambda is None
        np.testing.assert_array_equal(info.J_eq, A)
        np.testing.assert_array_equal(equivalent_bim(A, 0.0, 0.0).J_eq, A)

    def test_small_sigma_limit(self, rng):
        for _ in range(100):
            A = random_spd(rng)
            s = 1e-7 / np.sqrt(np.diag(A))
            J = equivalent_bim(A, s[0], s[1]).J_eq
            assert np.linalg.norm(J - A) / np.linalg.norm(A) < 1e-9 * 1e3

    def test_large_sigma_limit(self, rng):
        for _ in range(100):
            A = random_spd(rng)
            s = 1e6 / np.sqrt(np.diag(A))
            J = equivalent_bim(A, s[0], s[1]).J_eq
            assert np.linalg.norm(J) / np.linalg.norm(A) < 1e-5

    def test_harmonic_diagonal(self):
        a, b, l1, l2 = 4.0, 9.0, 12.0, 0.5
        J = equivalent_bim(np.diag([a, b]), 1 / math.sqrt(l1), 1 / math.sqrt(l2)).J_eq
        np.testing.assert_allclose(J, np.diag([a * l1 / (a + l1), b * l2 / (b + l2)]), rtol=1e-14, atol=0)

    def test_textbook_form_agrees(self, rng):
        for _ in range(50):
            A = random_spd(rng, spread=2)
            Lam = np.diag(10 ** rng.uniform(-1, 1, 2))
            ref = A - A @ np.linalg.solve(A + Lam, A)
            np.testing.assert_allclose(schur_eq(A, Lam), ref, rtol=1e-10, atol=1e-12 * np.abs(A).max())

    def test_loewner_below_a(self, rng):
        for _ in range(100):
            A = random_spd(rng)
            s = 10 ** rng.uniform(-2, 2, 2) / np.sqrt(np.diag(A))
            J = equivalent_bim(A, *s).J_eq
            np.testing.assert_array_equal(J, J.T)
            assert loewner_le(J, A)
            assert loewner_le(np.zeros((2, 2)), J)

    def test_monotone_in_sigma(self, rng):
        for _ in range(50):
            A = random_spd(rng)
            s = 10 ** rng.uniform(-1, 1, 2) / np.sqrt(np.diag(A))
            worse = equivalent_bim(A, *(3 * s)).J_eq
            better = equivalent_bim(A, *s).J_eq
            assert loewner_le(worse, better)

    def test_one_known_offset(self, waveform):
        A = lfm_fim(waveform, 1e-3)
        J = equivalent_bim(A, 0.0, 50.0).J_eq
        # delay information survives in full
        assert J[0, 0] == pytest.approx(A[0, 0], rel=1e-6)
        assert J[1, 1] < A[1, 1]

    def test_negative_sigma(self, waveform):
        with pytest.raises(ValueError):
            equivalent_bim(lfm_fim(waveform, 1.0), -1.0, 1.0)


class TestRank:
    def test_random_pd(self, rng):
        for _ in range(100):
            rep = full_bim_rank_check(random_spd(rng))
            assert rep.rank == rep.rank_A == 2
            assert rep.block.shape == (4, 4)

    def test_zero(self):
        assert full_bim_rank_check(np.zeros((2, 2))).rank == 0

    def test_default_waveform_fim(self, waveform):
        assert full_bim_rank_check(lfm_fim(waveform, 1e-2)).rank == 2


class TestCovariance:
    def test_diag_perfect(self):
        cov = measurement_covariance(equivalent_bim(np.diag([4.0, 25.0]), perfect_sync=True))
        np.testing.assert_allclose(cov.Sigma, np.diag([0.25, 0.04]))

    def test_inversion_residual(self, rng):
        for _ in range(100):
            A = random_spd(rng)
            s = 10 ** rng.uniform(-1, 1, 2) / np.sqrt(np.diag(A))
            info = equivalent_bim(A, *s)
            cov = measurement_covariance(info)
            np.testing.assert_array_equal(cov.Sigma, cov.Sigma.T)
            d = np.sqrt(np.diag(info.J_eq))
            R = (cov.Sigma * d[None, :]) @ (info.J_eq / d[:, None])
            assert np.abs(R - np.eye(2)).max() < 1e-9

    def test_worse_clock_larger_delay_variance(self, waveform):
        A = lfm_fim(waveform, 1e-2)
        s = [measurement_covariance(equivalent_bim(A, st, 30.0)).Sigma[0, 0] for st in (1e-9, 2e-9, 4e-9)]
        assert s[0] < s[1] < s[2]

    def test_unidentifiable(self, waveform):
        A = lfm_fim(waveform, 1e-2)
        with pytest.raises(UnidentifiableLinkError):
            measurement_covariance(equivalent_bim(A, math.inf, math.inf))


class TestFusion:
    def test_single_radar_singular(self, grid25, waveform, budget):
        res = network_bound(grid25[:1], TargetState((100, 0, 70), (3, 2, 0)), waveform, budget)
        assert res.singular and math.isinf(res.peb)
        assert np.linalg.matrix_rank(res.J / np.abs(res.J).max(), tol=1e-12) <= 2
        assert res.condition_number >= COND_LIMIT
        assert math.isfinite(res.peb_pinv)

    def test_empty(self):
        with pytest.raises(ConfigurationError):
            fuse([], [])

    def test_duplicate_radar(self, grid25, waveform, budget):
        tgt = TargetState((130, -220, 80), (4, -9, 1))
        jacs, covs = radar_information(grid25, tgt, waveform, budget)
        one = fuse(jacs, covs)
        two = fuse(jacs * 2, covs * 2)
        np.testing.assert_allclose(two.J, 2 * one.J, rtol=1e-14)
        assert two.peb == pytest.approx(one.peb / math.sqrt(2), rel=1e-9)
        assert two.veb == pytest.approx(one.veb / math.sqrt(2), rel=1e-9)

    def test_balanced_matches_unbalanced(self, grid25, waveform, budget):
        tgt = TargetState((-400, 310, 60), (10, 0, -2))
        jacs, covs = radar_information(grid25, tgt, waveform, budget, synced_priors(25))
        a, b = fuse(jacs, covs, balanced=True), fuse(jacs, covs, balanced=False)
        assert a.peb == pytest.approx(b.peb, rel=1e-9)
        assert a.veb == pytest.approx(b.veb, rel=1e-9)

    def test_crlb_properties(self, grid25, waveform, budget):
        res = network_bound(grid25, TargetState((0, 0, 75), (10, 0, 0)), waveform, budget, synced_priors(25))
        assert not res.singular
        np.testing.assert_array_equal(res.crlb, res.crlb.T)
        d = np.sqrt(np.diag(res.J))
        R = (res.crlb * d[None, :]) @ (res.J / d[:, None])
        assert np.abs(R - np.eye(6)).max() < 1e-9
        assert res.peb == pytest.approx(math.sqrt(np.trace(res.crlb[:3, :3])))

    def test_frozen_grid_values(self, grid25, waveform, budget):
        # independent extended-precision evaluation (tests/oracle.py)
        res = network_bound(grid25, TargetState((0, 0, 75), (10, 0, 0)), waveform, budget)
        assert res.peb == pytest.approx(0.16178655025289787, rel=1e-9)
        assert res.veb == pytest.approx(1.0603489613276453, rel=1e-9)

    def test_perfect_priors_equal_bypass(self, grid25, waveform, budget):
        tgt = TargetState((250, 700, 55), (-3, 12, 4))
        a = network_bound(grid25, tgt, waveform, budget)
        b = network_bound(grid25, tgt, waveform, budget, synced_priors(25, 0.0, 0.0))
        assert a.peb == pytest.approx(b.peb, rel=1e-9)
        assert a.veb == pytest.approx(b.veb, rel=1e-9)

    def test_sync_improves_bounds(self, grid25, waveform, budget):
        tgt = TargetState((600, -100, 90), (5, 5, 5))
        ebs = [network_bound(grid25, tgt, waveform, budget, synced_priors(25, st, sf))
               for st, sf in ((4e-9, 80.0), (2e-9, 40.0), (1e-9, 20.0))]
        ideal = network_bound(grid25, tgt, waveform, budget)
        assert ebs[0].peb >= ebs[1].peb >= ebs[2].peb >= ideal.peb
        assert ebs[0].veb >= ebs[1].veb >= ebs[2].veb >= ideal.veb

    def test_unusable_radar_dropped(self, grid25, waveform, budget, caplog):
        pri = synced_priors(25)
        pri[3] = SyncPriors(3, 0, math.inf, math.inf)
        jacs, _ = radar_information(grid25, TargetState((0, 0, 75), (1, 0, 0)), waveform, budget, pri)
        assert len(jacs) == 24
        assert "radar 3 dropped" in caplog.text


class TestVelocityDecoupling:
    def test_static_target_diagonal_fim(self, grid25, waveform, budget):
        # With no velocity the Doppler row carries no position information;
        # then a diagonal A makes VEB depend on σ_f alone.
        tgt = TargetState((320, -450, 65), (0, 0, 0))
        vebs = [network_bound(grid25, tgt, waveform, budget, synced_priors(25, st, 40.0), diagonal_fim=True).veb
                for st in (1e-10, 1e-9, 1e-8)]
        assert vebs[1] == pytest.approx(vebs[0], rel=1e-12)
        assert vebs[2] == pytest.approx(vebs[0], rel=1e-12)

    def test_moving_target_couples(self, grid25, waveform, budget):
        # A moving target ties position (hence delay, hence σ_t) into VEB
        # through the position dependence of the Doppler shift.
        tgt = TargetState((320, -450, 65), (12, -5, 3))
        a = network_bound(grid25, tgt, waveform, budget, synced_priors(25, 1e-10, 40.0), diagonal_fim=True).veb
        b = network_bound(grid25, tgt, waveform, budget, synced_priors(25, 1e-8, 40.0), diagonal_fim=True).veb
        assert b > a * (1 + 1e-6)


class TestMonostaticBaseline:
    def test_scalar_conversion(self, grid25, waveform, budget):
        tgt = TargetState((1000, 0, 10), (20, 0, 0))
        base = monostatic_baseline(grid25[0], tgt, waveform, budget)
        A = lfm_fim(waveform, bistatic_snr(budget, 1000.0, 1000.0, waveform.wavelength))
        Sigma = np.linalg.inv(A)
        assert base.range_error == pytest.approx(C * math.sqrt(Sigma[0, 0]) / 2, rel=1e-9)
        assert base.range_rate_error == pytest.approx(waveform.wavelength * math.sqrt(Sigma[1, 1]) / 2, rel=1e-9)

    def test_frozen_1km(self, grid25, waveform, budget):
        base = monostatic_baseline(grid25[0], TargetState((1000, 0, 10), (0, 0, 0)), waveform, budget)
        # bistatic_snr -> lfm_fim -> inverse -> c σ_τ / 2, evaluated in mpmath
        assert base.range_error == pytest.approx(FROZEN_RANGE_ERR, rel=1e-9)
        assert base.range_rate_error == pytest.approx(FROZEN_RATE_ERR, rel=1e-9)

    def test_snr_doubling(self, grid25, waveform):
        tgt = TargetState((0, 800, 60), (0, 0, 0))
        a = monostatic_baseline(grid25[0], tgt, waveform, LinkBudget(tx_power=1.0))
        b = monostatic_baseline(grid25[0], tgt, waveform, LinkBudget(tx_power=2.0))
        assert b.range_error == pytest.approx(a.range_error / math.sqrt(2), rel=1e-12)

    def test_follower_rejected(self, grid25, waveform, budget):
        with pytest.raises(ConfigurationError):
            monostatic_baseline(grid25[1], TargetState((0, 0, 75), (0, 0, 0)), waveform, budget)


class TestInvert:
    def test_guard(self):
        # two nearly collinear directions; diagonal scaling alone can't fix it
        u = np.array([1.0, 2, 0, 0, 1, 0])
        w = u + 1e-7 * np.array([0, 0, 1.0, 0, 0, 0])
        J = np.diag([1.0, 0, 0, 1, 0, 1]) + np.outer(u, u) + np.outer(w, w)
        res = invert_fim(J)
        assert res.singular and math.isinf(res.veb)
        assert invert_fim(np.diag([1.0, 2, 3, 4, 5, 6])).peb == pytest.approx(math.sqrt(1 + 1 / 2 + 1 / 3))
