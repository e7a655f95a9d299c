"""Multiplicative EKF baseline over orientation, velocity and position.

Quaternions are Hamilton ``[w, x, y, z]`` and rotate body vectors into the
world frame. The error state mirrors the invariant filter's ordering,
``[dtheta, dv, dp]``, with the truth recovered as
``R = R_hat @ Exp(dtheta)``, ``v = v_hat + dv``, ``p = p_hat + dp``.

Unlike the invariant filter, the velocity row of the transition matrix
contains ``R_hat @ skew(a)``, so the linearisation depends on the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOrientationError
from .inekf import GRAVITY, MAX_DT, ImuSample, ProcessNoise
from .liegroup import skew, so3_exp, wrap_angle
from .measurements import GpsReading, HeadingReading, RollPitchReading

_I9 = np.eye(9)
GIMBAL_COS = 1e-6


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_rotvec(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    angle = math.sqrt(float(w @ w))
    if angle < 1e-8:
        q = np.array([1.0, 0.5 * w[0], 0.5 * w[1], 0.5 * w[2]])
        return q / np.linalg.norm(q)
    s = math.sin(0.5 * angle) / angle
    return np.array([math.cos(0.5 * angle), s * w[0], s * w[1], s * w[2]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Shepperd's method; the result has non-negative scalar part."""
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2])
        q = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
    elif r[1, 1] > r[2, 2]:
        s = 2.0 * math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2])
        q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1])
        q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quat_to_euler(q: np.ndarray) -> tuple[float, float, float]:
    """Z-Y-X ``(roll, pitch, yaw)`` of the body-to-world rotation."""
    w, x, y, z = q
    roll = math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2 * (w * y - z * x))))
    yaw = math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z))
    return roll, pitch, yaw


def euler_rate_matrix(roll: float, pitch: float) -> np.ndarray:
    """Maps a body-frame rotation increment to Z-Y-X Euler angle increments."""
    cp = math.cos(pitch)
    if abs(cp) < GIMBAL_COS:
        raise DegenerateOrientationError("Euler rates undefined at pitch = +/- pi/2")
    sr, cr, tp = math.sin(roll), math.cos(roll), math.tan(pitch)
    return np.array(
        [
            [1.0, sr * tp, cr * tp],
            [0.0, cr, -sr],
            [0.0, sr / cp, cr / cp],
        ]
    )


@dataclass(frozen=True)
class MekfState:
    q: np.ndarray
    v: np.ndarray
    p: np.ndarray
    cov: np.ndarray
    t: float = 0.0

    @property
    def r(self) -> np.ndarray:
        return quat_to_matrix(self.q)


def mekf_initial_state(r: np.ndarray, v, p, cov: np.ndarray, t: float = 0.0) -> MekfState:
    cov = np.asarray(cov, dtype=float)
    return MekfState(
        quat_from_matrix(np.asarray(r, float)),
        np.asarray(v, float).copy(),
        np.asarray(p, float).copy(),
        0.5 * (cov + cov.T),
        t,
    )


def mekf_predict(state: MekfState, imu: ImuSample, dt: float, q_noise: ProcessNoise) -> MekfState:
    if not (dt > 0.0 and dt <= MAX_DT):
        raise ValueError(f"dt must lie in (0, {MAX_DT}], got {dt!r}")
    gyro = np.asarray(imu.gyro, dtype=float)
    accel = np.asarray(imu.accel, dtype=float)
    if not (np.all(np.isfinite(gyro)) and np.all(np.isfinite(accel))):
        raise ValueError("non-finite IMU sample")

    r = quat_to_matrix(state.q)
    world_acc = r @ accel + GRAVITY
    q_new = quat_multiply(state.q, quat_from_rotvec(gyro * dt))
    q_new /= np.linalg.norm(q_new)
    v_new = state.v + world_acc * dt
    p_new = state.p + state.v * dt + 0.5 * dt * dt * world_acc

    ra = r @ skew(accel)
    phi = np.eye(9)
    phi[0:3, 0:3] = so3_exp(-gyro * dt)
    phi[3:6, 0:3] = -ra * dt
    phi[6:9, 0:3] = -0.5 * dt * dt * ra
    phi[6:9, 3:6] = dt * np.eye(3)

    qd = q_noise.q * dt
    g = np.eye(9)
    g[3:6, 3:6] = r
    cov = phi @ state.cov @ phi.T + g @ qd @ g.T
    return MekfState(q_new, v_new, p_new, 0.5 * (cov + cov.T), state.t + dt)


def _update(state: MekfState, residual, h, noise) -> MekfState:
    """Joseph-form error-state update followed by multiplicative injection."""
    P = state.cov
    pht = P @ h.T
    s = h @ pht + noise
    gain = np.linalg.solve(s, pht.T).T
    dx = gain @ residual
    q = quat_multiply(state.q, quat_from_rotvec(dx[0:3]))
    q /= np.linalg.norm(q)
    a = _I9 - gain @ h
    cov = a @ P @ a.T + gain @ noise @ gain.T
    return MekfState(q, state.v + dx[3:6], state.p + dx[6:9], 0.5 * (cov + cov.T), state.t)


def _euler_rows(state: MekfState, rows):
    roll, pitch, yaw = quat_to_euler(state.q)
    h = np.zeros((len(rows), 9))
    h[:, 0:3] = euler_rate_matrix(roll, pitch)[list(rows), :]
    return (roll, pitch, yaw), h


def mekf_update_rollpitch(state: MekfState, reading: RollPitchReading) -> MekfState:
    (roll, pitch, _), h = _euler_rows(state, (0, 1))
    residual = np.array([wrap_angle(reading.phi - roll), wrap_angle(reading.theta - pitch)])
    return _update(state, residual, h, np.diag([reading.sigma_phi**2, reading.sigma_theta**2]))


def mekf_update_heading(state: MekfState, reading: HeadingReading) -> MekfState:
    (_, _, yaw), h = _euler_rows(state, (2,))
    residual = np.array([wrap_angle(reading.psi - yaw)])
    return _update(state, residual, h, np.array([[reading.sigma_psi**2]]))


def mekf_update_full(state: MekfState, heading: HeadingReading, rp: RollPitchReading) -> MekfState:
    (roll, pitch, yaw), h = _euler_rows(state, (0, 1, 2))
    residual = np.array(
        [wrap_angle(rp.phi - roll), wrap_angle(rp.theta - pitch), wrap_angle(heading.psi - yaw)]
    )
    noise = np.diag([rp.sigma_phi**2, rp.sigma_theta**2, heading.sigma_psi**2])
    return _update(state, residual, h, noise)


def mekf_update_gps(state: MekfState, reading: GpsReading) -> MekfState:
    y = np.asarray(reading.xyz, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite GPS reading")
    h = np.zeros((3, 9))
    h[:, 6:9] = np.eye(3)
    noise = np.diag([reading.sigma_xy**2, reading.sigma_xy**2, reading.sigma_z**2])
    return _update(state, y - state.p, h, noise)
