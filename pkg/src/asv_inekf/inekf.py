"""Left-invariant EKF on SE_2(3).

The tracked error is ``eta = X^-1 @ X_hat`` with ``xi = log(eta)``, so the
truth is recovered as ``X = X_hat @ exp(-xi)`` and corrections are applied on
the right with a minus sign.

IMU propagation is written as ``X+ = Gamma @ f0(X) @ Upsilon`` where
``Upsilon`` carries the body-frame IMU increments, ``Gamma`` the gravity
increments and ``f0`` the automorphism ``(R, v, p) -> (R, v, p + v dt)``.
Under that factorisation the left error obeys
``xi+ = Ad(Upsilon^-1) F0 xi`` exactly, which depends on the IMU sample and
``dt`` but never on the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchAmbiguityError, MeasurementRejected, UnobservableInnovationError
from .liegroup import ExtendedPose, se23_exp, se23_log, skew, so3_exp, so3_log

GRAVITY = np.array([0.0, 0.0, -9.81])
MAX_DT = 0.1
DEFAULT_GATE = 3.0
MAX_CONDITION = 1e12

H_ORIENTATION = np.hstack([np.eye(3), np.zeros((3, 6))])
H_POSITION = np.hstack([np.zeros((3, 6)), np.eye(3)])

_I9 = np.eye(9)


@dataclass(frozen=True)
class ImuSample:
    """Body-frame gyro (rad/s) and specific force (m/s^2) at time ``t``."""

    t: float
    gyro: np.ndarray
    accel: np.ndarray


@dataclass(frozen=True)
class ProcessNoise:
    """Continuous-time noise density on the ``[rotation, velocity, position]`` blocks."""

    q: np.ndarray

    @classmethod
    def from_sensor_noise(
        cls,
        gyro_std: float = 0.002,
        accel_std: float = 0.04,
        rate_hz: float = 100.0,
        position_rw: float = 1e-4,
    ) -> "ProcessNoise":
        """Convert per-sample IMU standard deviations into densities.

        A white per-sample std ``s`` at rate ``f`` has density ``s**2 / f``.
        """
        q = np.zeros((9, 9))
        q[0:3, 0:3] = np.eye(3) * gyro_std**2 / rate_hz
        q[3:6, 3:6] = np.eye(3) * accel_std**2 / rate_hz
        q[6:9, 6:9] = np.eye(3) * position_rw**2
        return cls(q)


@dataclass(frozen=True)
class FilterState:
    x_hat: ExtendedPose
    sigma: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class OrientationMeasurement:
    """SO(3)-valued reading with per-axis variances.

    Axes flagged in ``inf_mask`` carry infinite variance; their entry in
    ``variances`` is forced to ``inf`` and never read as a number.
    """

    z: np.ndarray
    variances: np.ndarray
    inf_mask: tuple = field(default=(False, False, False))

    def __post_init__(self):
        mask = tuple(bool(b) for b in self.inf_mask)
        if len(mask) != 3:
            raise ValueError("inf_mask needs three entries")
        if all(mask):
            raise ValueError("at least one axis must be observed")
        var = np.array(self.variances, dtype=float).reshape(3)
        for i in range(3):
            if mask[i]:
                var[i] = np.inf
            elif not (np.isfinite(var[i]) and var[i] > 0.0):
                raise ValueError(f"variance on axis {i} must be finite and positive")
        object.__setattr__(self, "inf_mask", mask)
        object.__setattr__(self, "variances", var)

    def information(self) -> np.ndarray:
        """Diagonal of reciprocal variances; masked axes contribute zero."""
        info = np.zeros(3)
        for i in range(3):
            if not self.inf_mask[i]:
                info[i] = 1.0 / self.variances[i]
        return info


def initial_state(x_hat: ExtendedPose, sigma: np.ndarray, t: float = 0.0) -> FilterState:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (9, 9):
        raise ValueError("sigma must be 9x9")
    return FilterState(x_hat, 0.5 * (sigma + sigma.T), t)


def imu_increment(gyro: np.ndarray, accel: np.ndarray, dt: float):
    """Body-frame increment ``(dR, dv, dp)`` for a constant IMU sample over ``dt``."""
    return so3_exp(gyro * dt), accel * dt, 0.5 * dt * dt * accel


def error_transition(gyro, accel, dt: float) -> np.ndarray:
    """State transition of the left-invariant error over one IMU step."""
    dR, dv, dp = imu_increment(np.asarray(gyro, float), np.asarray(accel, float), dt)
    A = dR.T
    phi = np.zeros((9, 9))
    phi[0:3, 0:3] = A
    phi[3:6, 3:6] = A
    phi[6:9, 6:9] = A
    phi[3:6, 0:3] = -A @ skew(dv)
    phi[6:9, 0:3] = -A @ skew(dp)
    phi[6:9, 3:6] = dt * A
    return phi


def propagate_mean(x: ExtendedPose, gyro, accel, dt: float) -> ExtendedPose:
    r = x.r
    world_acc = r @ accel + GRAVITY
    return ExtendedPose(
        r @ so3_exp(gyro * dt),
        x.v + world_acc * dt,
        x.p + x.v * dt + 0.5 * dt * dt * world_acc,
    )


def predict(state: FilterState, imu: ImuSample, dt: float, q: ProcessNoise) -> FilterState:
    if not (dt > 0.0 and dt <= MAX_DT):
        raise ValueError(f"dt must lie in (0, {MAX_DT}], got {dt!r}")
    gyro = np.asarray(imu.gyro, dtype=float)
    accel = np.asarray(imu.accel, dtype=float)
    if not (np.all(np.isfinite(gyro)) and np.all(np.isfinite(accel))):
        raise ValueError("non-finite IMU sample")

    x_new = propagate_mean(state.x_hat, gyro, accel, dt)
    phi = error_transition(gyro, accel, dt)
    sigma = phi @ (state.sigma + q.q * dt) @ phi.T
    return FilterState(x_new, 0.5 * (sigma + sigma.T), state.t + dt)


def s_inverse_with_infinite(
    sigma_tilde: np.ndarray, meas: OrientationMeasurement, r_hat: np.ndarray
) -> np.ndarray:
    """Inverse innovation covariance in the limit of infinite masked variances.

    Evaluates ``St^-1 - St^-1 (St R^T M+ R + I)^-1`` where ``M+`` holds the
    reciprocal variances with masked axes set to zero, which is the limit of
    ``(St + R^T M R)^-1`` as the masked variances grow without bound.
    """
    cond = np.linalg.cond(sigma_tilde)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise UnobservableInnovationError(
            f"projected covariance is singular (condition number {cond:.3g})"
        )
    st_inv = np.linalg.inv(sigma_tilde)
    info = r_hat.T @ (meas.information()[:, None] * r_hat)
    s_inv = st_inv - st_inv @ np.linalg.inv(sigma_tilde @ info + np.eye(3))
    return 0.5 * (s_inv + s_inv.T)


def _correct(state: FilterState, innovation, h_jac, s_inv) -> FilterState:
    sigma = state.sigma
    pht = sigma @ h_jac.T
    gain = pht @ s_inv
    delta = gain @ innovation
    x_new = state.x_hat @ se23_exp(-delta)
    sigma_new = (_I9 - gain @ h_jac) @ sigma
    return FilterState(x_new, 0.5 * (sigma_new + sigma_new.T), state.t)


def orientation_innovation(z: np.ndarray, z_hat: np.ndarray) -> np.ndarray:
    """``log(z^-1 z_hat)`` as a rotation vector."""
    return so3_log(z.T @ z_hat)


def update_orientation(
    state: FilterState,
    meas: OrientationMeasurement,
    z_hat: np.ndarray,
    h_jac: np.ndarray = H_ORIENTATION,
    gate: float = DEFAULT_GATE,
) -> FilterState:
    """Rotation-valued update, ignoring axes with infinite variance.

    Raises:
        MeasurementRejected: if the innovation angle exceeds ``gate`` or sits
            on the log branch cut. The caller keeps its prior state.
    """
    try:
        innovation = orientation_innovation(meas.z, z_hat)
    except BranchAmbiguityError as exc:
        raise MeasurementRejected(str(exc)) from exc
    angle = math.sqrt(float(innovation @ innovation))
    if angle > gate:
        raise MeasurementRejected(f"innovation angle {angle:.3f} rad exceeds gate {gate}")
    sigma_tilde = h_jac @ state.sigma @ h_jac.T
    s_inv = s_inverse_with_infinite(sigma_tilde, meas, state.x_hat.r)
    return _correct(state, innovation, h_jac, s_inv)


def update_position(state: FilterState, y, m_pos: np.ndarray) -> FilterState:
    """Position fix handled as a left-invariant observation of ``X @ [0, 0, 0, 0, 1]``.

    The innovation ``R^T (p_hat - y)`` is linear in the error to first order,
    ``~ xi_p``, so the Jacobian is the constant ``[0 0 I]``.
    """
    y = np.asarray(y, dtype=float)
    m_pos = np.asarray(m_pos, dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(m_pos))):
        raise ValueError("non-finite position measurement")
    rt = state.x_hat.r.T
    innovation = rt @ (state.x_hat.p - y)
    s = state.sigma[6:9, 6:9] + rt @ m_pos @ rt.T
    s_inv = np.linalg.inv(s)
    return _correct(state, innovation, H_POSITION, 0.5 * (s_inv + s_inv.T))


def left_error(truth: ExtendedPose, estimate: ExtendedPose) -> np.ndarray:
    """Vectorised left-invariant error ``log(truth^-1 @ estimate)``."""
    return se23_log(truth.inverse() @ estimate)


def nees(state: FilterState, truth: ExtendedPose) -> float:
    xi = left_error(truth, state.x_hat)
    return float(xi @ np.linalg.solve(state.sigma, xi))
