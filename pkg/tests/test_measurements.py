import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asv_inekf.inekf import initial_state, orientation_innovation, s_inverse_with_infinite
from asv_inekf.liegroup import ExtendedPose, euler_of, euler_zyx, rot_x, rot_y, rot_z, so3_exp
from asv_inekf.measurements import (
    GpsReading,
    HeadingReading,
    RollPitchReading,
    apply_orientation,
    apply_position,
    make_full_orientation,
    make_gps,
    make_heading,
    make_reconstructed_full,
    make_roll_pitch,
    pair_nearest,
)

from conftest import random_spd

angle = st.floats(-3.1, 3.1, allow_nan=False)
tilt = st.floats(-1.2, 1.2, allow_nan=False)


def innovation_of(update, x):
    meas, rule = update
    return orientation_innovation(meas.z, rule(x))


class TestConstruction:
    def test_full_orientation(self):
        u = make_full_orientation(rot_z(0.1), np.diag([1e-4, 2e-4, 3e-4]))
        assert np.array_equal(u.meas.variances, [1e-4, 2e-4, 3e-4])
        assert u.meas.inf_mask == (False, False, False)
        x = ExtendedPose(rot_x(0.2), np.zeros(3), np.zeros(3))
        assert np.array_equal(u.z_hat_rule(x), x.r)

    def test_full_rejects_non_rotation_and_correlation(self):
        with pytest.raises(ValueError):
            make_full_orientation(2 * np.eye(3), np.eye(3))
        with pytest.raises(ValueError):
            make_full_orientation(np.eye(3), np.ones((3, 3)))

    def test_roll_pitch(self):
        u = make_roll_pitch(RollPitchReading(0.1, -0.2, 0.03, 0.04))
        assert np.allclose(u.meas.z, rot_y(-0.2) @ rot_x(0.1))
        assert u.meas.inf_mask == (False, False, True)
        assert u.meas.variances[:2] == pytest.approx([0.03**2, 0.04**2])
        x = ExtendedPose(euler_zyx(0.1, -0.2, 1.3), np.zeros(3), np.zeros(3))
        assert np.allclose(u.z_hat_rule(x), u.meas.z, atol=1e-15)

    def test_heading(self):
        u = make_heading(HeadingReading(0.0, 0.01))
        assert u.meas.inf_mask == (True, True, False)
        x = ExtendedPose(rot_z(0.2), np.zeros(3), np.zeros(3))
        assert np.allclose(innovation_of(u, x), [0.0, 0.0, 0.2], atol=1e-15)

    def test_gps_defaults(self):
        u = make_gps(GpsReading(np.array([1.0, 2.0, 3.0])))
        assert np.array_equal(u.y, [1.0, 2.0, 3.0])
        assert np.allclose(u.m_pos, np.diag([1.75**2, 1.75**2, 25.0]))

    def test_reconstructed_full(self):
        u = make_reconstructed_full(HeadingReading(0.5, 0.01), RollPitchReading(0.1, 0.2, 0.02, 0.03))
        assert np.allclose(u.meas.z, rot_z(0.5) @ rot_y(0.2) @ rot_x(0.1))
        assert np.allclose(u.meas.variances, [0.02**2, 0.03**2, 0.01**2])


class TestValidation:
    @pytest.mark.parametrize("phi,theta", [(math.pi / 2, 0.0), (0.0, -2.0), (math.nan, 0.0)])
    def test_roll_pitch_range(self, phi, theta):
        with pytest.raises(ValueError):
            RollPitchReading(phi, theta, 0.01, 0.01)

    @pytest.mark.parametrize("psi", [-math.pi, 3.5, math.nan])
    def test_heading_range(self, psi):
        with pytest.raises(ValueError):
            HeadingReading(psi, 0.01)

    def test_heading_accepts_pi(self):
        HeadingReading(math.pi, 0.01)

    @pytest.mark.parametrize("sig", [0.0, -1.0, math.nan])
    def test_non_positive_std(self, sig):
        with pytest.raises(ValueError):
            RollPitchReading(0.0, 0.0, sig, 0.01)
        with pytest.raises(ValueError):
            HeadingReading(0.0, sig)
        with pytest.raises(ValueError):
            GpsReading(np.zeros(3), sig, 1.0)


class TestNoiselessInnovation:
    @given(tilt, tilt, angle)
    def test_roll_pitch_innovation_vanishes_for_any_heading(self, phi, theta, psi):
        x = ExtendedPose(euler_zyx(phi, theta, psi), np.zeros(3), np.zeros(3))
        u = make_roll_pitch(RollPitchReading(phi, theta, 0.01, 0.01))
        assert np.allclose(innovation_of(u, x), 0.0, atol=1e-12)

    @given(tilt, tilt, angle)
    def test_heading_innovation_vanishes_for_any_tilt(self, phi, theta, psi):
        x = ExtendedPose(euler_zyx(phi, theta, psi), np.zeros(3), np.zeros(3))
        u = make_heading(HeadingReading(psi, 0.01))
        assert np.allclose(innovation_of(u, x), 0.0, atol=1e-12)

    @given(tilt, tilt, angle)
    def test_reconstructed_full_innovation_vanishes(self, phi, theta, psi):
        x = ExtendedPose(euler_zyx(phi, theta, psi), np.zeros(3), np.zeros(3))
        u = make_reconstructed_full(HeadingReading(psi, 0.01), RollPitchReading(phi, theta, 0.01, 0.01))
        assert np.allclose(innovation_of(u, x), 0.0, atol=1e-12)


class TestUpdates:
    @given(st.integers(0, 2**32 - 1))
    def test_correction_bounded_by_innovation(self, seed):
        """K V never exceeds V in the rotation block since the gain is a contraction there."""
        rng = np.random.default_rng(seed)
        phi, theta, psi = rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-3, 3)
        x = ExtendedPose(euler_zyx(phi, theta, psi), np.zeros(3), np.zeros(3))
        s = initial_state(x, random_spd(rng, 9, scale=0.1))
        u = make_reconstructed_full(
            HeadingReading(math.remainder(psi + rng.normal(0, 0.2), 2 * math.pi), 0.05),
            RollPitchReading(phi + rng.normal(0, 0.1), theta + rng.normal(0, 0.1), 0.05, 0.05),
        )
        v = innovation_of(u, x)
        out = apply_orientation(s, u)
        rot_corr = euler_of(x.r.T @ out.x_hat.r)
        assert np.linalg.norm(out.x_hat.r - x.r) <= np.linalg.norm(so3_exp(v) - np.eye(3)) + 1e-12
        assert all(np.isfinite(rot_corr))

    def test_heading_update_moves_yaw_only_for_level_belief(self):
        x = ExtendedPose(rot_z(0.3), np.zeros(3), np.zeros(3))
        s = initial_state(x, np.diag([0.01] * 3 + [1.0] * 6))
        out = apply_orientation(s, make_heading(HeadingReading(0.0, 0.1)))
        phi, theta, psi = euler_of(out.x_hat.r)
        assert abs(phi) < 1e-12 and abs(theta) < 1e-12
        assert psi == pytest.approx(0.3 * 0.1**2 / (0.01 + 0.1**2), rel=1e-6)

    def test_gps_covariance_trace_decreases(self, rng):
        s = initial_state(ExtendedPose.identity(), 100.0 * np.eye(9))
        traces = [np.trace(s.sigma)]
        for _ in range(30):
            s = apply_position(s, make_gps(GpsReading(rng.normal(0, [1.75, 1.75, 5.0]))))
            traces.append(np.trace(s.sigma))
        assert all(b < a for a, b in zip(traces, traces[1:]))
        assert np.linalg.norm(s.x_hat.p[:2]) < 1.75

    def test_masked_limit_consistent_with_explicit_variance(self, rng):
        st_ = random_spd(rng, 3, scale=0.01)
        u = make_roll_pitch(RollPitchReading(0.05, -0.02, 0.03, 0.03))
        r = rot_z(0.4)
        masked = s_inverse_with_infinite(st_, u.meas, r)
        direct = np.linalg.inv(st_ + r.T @ np.diag([0.03**2, 0.03**2, 1e9]) @ r)
        assert np.allclose(masked, direct, atol=1e-6 * np.abs(direct).max())


class TestPairing:
    def rp(self, t):
        return RollPitchReading(0.0, 0.0, 0.01, 0.01, t)

    def test_nearest_chosen(self):
        rps = [self.rp(t) for t in (0.0, 0.9, 1.05, 2.0)]
        pairs = pair_nearest([HeadingReading(0.0, 0.01, 1.0)], rps)
        assert pairs[0][1].t == 1.05

    def test_tie_goes_to_earlier(self):
        rps = [self.rp(0.9), self.rp(1.1)]
        pairs = pair_nearest([HeadingReading(0.0, 0.01, 1.0)], rps)
        assert pairs[0][1].t == 0.9

    def test_outside_window_dropped(self):
        rps = [self.rp(0.0), self.rp(5.0)]
        assert pair_nearest([HeadingReading(0.0, 0.01, 2.0)], rps, window=0.5) == []

    def test_empty(self):
        assert pair_nearest([HeadingReading(0.0, 0.01, 2.0)], []) == []

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0, 10))
    def test_matches_brute_force(self, times, th):
        rps = [self.rp(t) for t in sorted(times)]
        pairs = pair_nearest([HeadingReading(0.0, 0.01, th)], rps, window=0.5)
        dists = [abs(r.t - th) for r in rps]
        best = min(dists)
        if best > 0.5:
            assert pairs == []
        else:
            assert abs(pairs[0][1].t - th) == best
