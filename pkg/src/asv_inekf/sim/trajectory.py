"""Analytic straight-line trajectory with wave-induced roll, pitch and heave."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..inekf import GRAVITY
from ..liegroup import ExtendedPose, euler_zyx


@dataclass(frozen=True)
class TruthState:
    t: float
    pose: ExtendedPose
    omega_body: np.ndarray
    accel_body: np.ndarray
    euler: tuple


@dataclass(frozen=True)
class WaveParams:
    speed: float = 100.0 / 30.0
    heading: float = 0.6
    roll_amp_deg: float = 5.0
    roll_period: float = 4.0
    roll_phase: float = 0.0
    pitch_amp_deg: float = 5.0
    pitch_period: float = 6.0
    pitch_phase: float = 0.7
    heave_amp: float = 0.2
    heave_period: float = 5.0
    start: tuple = (0.0, 0.0, 0.0)


class WaveTrajectory:
    """Constant heading and speed; roll, pitch and heave are sinusoids.

    Body rates follow from the Z-Y-X Euler rates and the specific force is
    ``R^T (p_ddot - g)``, so both are exact derivatives of the pose.
    """

    def __init__(self, params: WaveParams | None = None):
        self.params = params or WaveParams()
        self._cache: dict[float, TruthState] = {}

    def _angles(self, t: float):
        pr = self.params
        wr = 2 * math.pi / pr.roll_period
        wp = 2 * math.pi / pr.pitch_period
        ar = math.radians(pr.roll_amp_deg)
        ap = math.radians(pr.pitch_amp_deg)
        phi = ar * math.sin(wr * t + pr.roll_phase)
        theta = ap * math.sin(wp * t + pr.pitch_phase)
        dphi = ar * wr * math.cos(wr * t + pr.roll_phase)
        dtheta = ap * wp * math.cos(wp * t + pr.pitch_phase)
        return phi, theta, pr.heading, dphi, dtheta

    def state_at(self, t: float) -> TruthState:
        try:
            return self._cache[t]
        except KeyError:
            pass
        state = self._evaluate(t)
        self._cache[t] = state
        return state

    def _evaluate(self, t: float) -> TruthState:
        pr = self.params
        phi, theta, psi, dphi, dtheta = self._angles(t)
        r = euler_zyx(phi, theta, psi)

        wh = 2 * math.pi / pr.heave_period
        ch, sh = math.cos(psi), math.sin(psi)
        p = np.array(
            [
                pr.start[0] + pr.speed * t * ch,
                pr.start[1] + pr.speed * t * sh,
                pr.start[2] + pr.heave_amp * math.sin(wh * t),
            ]
        )
        v = np.array([pr.speed * ch, pr.speed * sh, pr.heave_amp * wh * math.cos(wh * t)])
        acc_world = np.array([0.0, 0.0, -pr.heave_amp * wh * wh * math.sin(wh * t)])

        # Z-Y-X Euler rates to body rates, with zero yaw rate.
        omega = np.array(
            [dphi, dtheta * math.cos(phi), -dtheta * math.sin(phi)]
        )
        accel = r.T @ (acc_world - GRAVITY)
        return TruthState(t, ExtendedPose(r, v, p), omega, accel, (phi, theta, psi))


def generate_trajectory(duration: float, dt: float, params: WaveParams | None = None) -> list[TruthState]:
    """Truth sampled at ``k * dt`` for ``k = 0 .. round(duration / dt)``."""
    if not (duration > 0 and dt > 0):
        raise ValueError("duration and dt must be positive")
    traj = WaveTrajectory(params)
    n = int(round(duration / dt))
    return [traj.state_at(t) for t in sample_times(n + 1, 1.0 / dt)]


def sample_times(n: int, rate_hz: float) -> list[float]:
    """``k / rate`` for ``k < n``; integral rates divide exactly so streams line up."""
    if abs(rate_hz - round(rate_hz)) < 1e-9:
        r = int(round(rate_hz))
        return [k / r for k in range(n)]
    return [k / rate_hz for k in range(n)]
