import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asv_inekf.errors import DegenerateOrientationError
from asv_inekf.inekf import ImuSample, ProcessNoise, initial_state, predict
from asv_inekf.liegroup import ExtendedPose, euler_of, euler_zyx, rot_y, so3_exp, so3_log
from asv_inekf.measurements import GpsReading, HeadingReading, RollPitchReading
from asv_inekf.mekf import (
    euler_rate_matrix,
    mekf_initial_state,
    mekf_predict,
    mekf_update_full,
    mekf_update_gps,
    mekf_update_heading,
    mekf_update_rollpitch,
    quat_from_matrix,
    quat_from_rotvec,
    quat_multiply,
    quat_to_euler,
    quat_to_matrix,
)

from conftest import random_rotation, random_spd

Q = ProcessNoise.from_sensor_noise()
LEVEL_ACCEL = np.array([0.0, 0.0, 9.81])
ZERO_Q = ProcessNoise(np.zeros((9, 9)))


def level_state(cov=None):
    return mekf_initial_state(np.eye(3), np.zeros(3), np.zeros(3), np.eye(9) * 0.01 if cov is None else cov)


class TestQuaternions:
    def test_roundtrip(self, rng):
        for _ in range(100):
            r = random_rotation(rng, 3.1)
            q = quat_from_matrix(r)
            assert np.allclose(quat_to_matrix(q), r, atol=1e-12)
            assert q[0] >= 0 and np.linalg.norm(q) == pytest.approx(1.0)

    def test_product_matches_matrix_product(self, rng):
        for _ in range(50):
            a, b = random_rotation(rng), random_rotation(rng)
            q = quat_multiply(quat_from_matrix(a), quat_from_matrix(b))
            assert np.allclose(quat_to_matrix(q), a @ b, atol=1e-12)

    def test_rotvec_matches_so3(self, rng):
        for scale in (1e-10, 1e-3, 1.0, 3.0):
            w = scale * rng.standard_normal(3)
            assert np.allclose(quat_to_matrix(quat_from_rotvec(w)), so3_exp(w), atol=1e-14)

    def test_euler_matches_matrix_euler(self, rng):
        for _ in range(50):
            r = random_rotation(rng, 1.2)
            assert np.allclose(quat_to_euler(quat_from_matrix(r)), euler_of(r), atol=1e-10)


class TestEulerRates:
    def test_matches_finite_difference(self, rng):
        for _ in range(20):
            phi, theta, psi = rng.uniform(-1, 1), rng.uniform(-1.2, 1.2), rng.uniform(-3, 3)
            r = euler_zyx(phi, theta, psi)
            e0 = np.array(euler_of(r))
            h = 1e-6
            fd = np.column_stack(
                [(np.array(euler_of(r @ so3_exp(h * np.eye(3)[i]))) - e0) / h for i in range(3)]
            )
            assert np.allclose(euler_rate_matrix(phi, theta), fd, atol=1e-5)

    def test_gimbal_lock(self):
        with pytest.raises(DegenerateOrientationError):
            euler_rate_matrix(0.0, math.pi / 2)


class TestPredict:
    def test_hover(self):
        s = mekf_predict(level_state(), ImuSample(0.0, np.zeros(3), LEVEL_ACCEL), 0.01, Q)
        assert np.allclose(s.r, np.eye(3), atol=1e-15)
        assert np.allclose(s.v, 0.0) and np.allclose(s.p, 0.0)
        assert np.trace(s.cov) > np.trace(level_state().cov)

    def test_mean_matches_invariant_filter(self, rng):
        r0, v0, p0 = random_rotation(rng), rng.standard_normal(3), rng.standard_normal(3)
        m = mekf_initial_state(r0, v0, p0, np.eye(9))
        s = initial_state(ExtendedPose(r0, v0, p0), np.eye(9))
        for _ in range(200):
            imu = ImuSample(0.0, rng.standard_normal(3) * 0.3, rng.standard_normal(3) * 3 + LEVEL_ACCEL)
            m = mekf_predict(m, imu, 0.01, Q)
            s = predict(s, imu, 0.01, Q)
        assert np.allclose(m.r, s.x_hat.r, atol=1e-9)
        assert np.allclose(m.v, s.x_hat.v, atol=1e-9)
        assert np.allclose(m.p, s.x_hat.p, atol=1e-9)

    def test_transition_matches_nonlinear_error_propagation(self, rng):
        """With unit prior covariance and no process noise the result is Phi Phi^T.

        Phi is recovered column by column by pushing a tiny error through the
        nonlinear mean propagation.
        """
        r0, v0, p0 = random_rotation(rng), rng.standard_normal(3), rng.standard_normal(3)
        imu = ImuSample(0.0, rng.standard_normal(3), rng.standard_normal(3) * 3)
        dt, eps = 0.05, 1e-6
        est = mekf_predict(mekf_initial_state(r0, v0, p0, np.eye(9)), imu, dt, ZERO_Q)
        cols = []
        for dx in eps * np.eye(9):
            truth = mekf_initial_state(r0 @ so3_exp(dx[:3]), v0 + dx[3:6], p0 + dx[6:9], np.eye(9))
            t1 = mekf_predict(truth, imu, dt, ZERO_Q)
            cols.append(np.concatenate([so3_log(est.r.T @ t1.r), t1.v - est.v, t1.p - est.p]) / eps)
        phi_fd = np.column_stack(cols)
        assert np.allclose(phi_fd @ phi_fd.T, est.cov, atol=1e-5)

    def test_yaw_rate_integration(self):
        m = level_state()
        for _ in range(1000):
            m = mekf_predict(m, ImuSample(0.0, np.array([0, 0, 0.1]), LEVEL_ACCEL), 0.01, Q)
        assert quat_to_euler(m.q)[2] == pytest.approx(1.0, abs=1e-9)
        assert np.linalg.norm(m.q) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("dt", [0.0, -1.0, 1.0])
    def test_bad_dt(self, dt):
        with pytest.raises(ValueError):
            mekf_predict(level_state(), ImuSample(0.0, np.zeros(3), LEVEL_ACCEL), dt, Q)


class TestUpdates:
    def test_zero_residual_keeps_mean(self):
        r = euler_zyx(0.1, -0.05, 0.7)
        m = mekf_initial_state(r, np.ones(3), np.ones(3), np.eye(9) * 0.01)
        out = mekf_update_rollpitch(m, RollPitchReading(0.1, -0.05, 0.01, 0.01))
        out = mekf_update_heading(out, HeadingReading(0.7, 0.01))
        out = mekf_update_gps(out, GpsReading(np.ones(3)))
        assert np.allclose(out.r, r, atol=1e-14)
        assert np.allclose(out.p, 1.0) and np.allclose(out.v, 1.0)
        assert np.trace(out.cov) < np.trace(m.cov)

    def test_noiseless_updates_from_truth_stay_at_truth(self):
        truth = (0.2, -0.1, 1.0)
        p = np.array([3.0, -1.0, 0.5])
        m = mekf_initial_state(euler_zyx(*truth), np.zeros(3), p, np.eye(9) * 0.01)
        for _ in range(100):
            m = mekf_update_rollpitch(m, RollPitchReading(truth[0], truth[1], 0.01, 0.01))
            m = mekf_update_heading(m, HeadingReading(truth[2], 0.01))
            m = mekf_update_gps(m, GpsReading(p))
        assert np.allclose(quat_to_euler(m.q), truth, atol=1e-6)
        assert np.allclose(m.p, p, atol=1e-6)

    def test_repeated_noiseless_updates_pull_toward_truth(self):
        truth = np.array([0.2, -0.1, 1.0])
        m = mekf_initial_state(euler_zyx(0.25, -0.15, 0.9), np.zeros(3), np.zeros(3), np.eye(9) * 0.01)
        errs = []
        for _ in range(100):
            m = mekf_update_full(m, HeadingReading(truth[2], 0.01), RollPitchReading(truth[0], truth[1], 0.01, 0.01))
            errs.append(np.abs(np.array(quat_to_euler(m.q)) - truth).max())
        assert errs[-1] < 1e-3 * 0.1
        assert all(b <= a + 1e-12 for a, b in zip(errs[1:], errs[2:]))

    def test_heading_wraps(self):
        m = mekf_initial_state(euler_zyx(0.0, 0.0, 3.1), np.zeros(3), np.zeros(3), np.eye(9) * 0.1)
        out = mekf_update_heading(m, HeadingReading(-3.1, 0.01))
        yaw = quat_to_euler(out.q)[2]
        assert abs(math.remainder(yaw - (-3.1), 2 * math.pi)) < 0.01

    def test_gimbal_lock_rejected(self):
        m = mekf_initial_state(rot_y(math.pi / 2), np.zeros(3), np.zeros(3), np.eye(9))
        with pytest.raises(DegenerateOrientationError):
            mekf_update_heading(m, HeadingReading(0.0, 0.01))

    def test_gps_bad(self):
        with pytest.raises(ValueError):
            mekf_update_gps(level_state(), GpsReading(np.array([math.nan, 0, 0])))

    @given(st.integers(0, 2**32 - 1))
    def test_joseph_keeps_covariance_psd(self, seed):
        rng = np.random.default_rng(seed)
        m = mekf_initial_state(euler_zyx(*rng.uniform(-0.5, 0.5, 3)), np.zeros(3), np.zeros(3), random_spd(rng, 9))
        m = mekf_update_full(m, HeadingReading(0.1, 1e-4), RollPitchReading(0.0, 0.0, 1e-4, 1e-4))
        m = mekf_update_gps(m, GpsReading(rng.standard_normal(3), 1e-3, 1e-3))
        assert np.allclose(m.cov, m.cov.T)
        assert np.linalg.eigvalsh(m.cov).min() > -1e-12
        assert np.linalg.norm(m.q) == pytest.approx(1.0, abs=1e-12)
