"""Sensor readings and their conversion into filter updates.

Each ``make_*`` constructor returns the measurement together with the rule
that produces the predicted measurement from the current estimate. All
orientation updates share the Jacobian ``[I 0 0]``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import inekf
from .inekf import FilterState, OrientationMeasurement
from .liegroup import (
    ExtendedPose,
    euler_zyx,
    homomorphism_h,
    is_rotation,
    roll_pitch_projection,
    rot_x,
    rot_y,
    rot_z,
    yaw_of,
)

ZHatRule = Callable[[ExtendedPose], np.ndarray]

PAIRING_WINDOW = 0.5


@dataclass(frozen=True)
class RollPitchReading:
    phi: float
    theta: float
    sigma_phi: float
    sigma_theta: float
    t: float = 0.0

    def __post_init__(self):
        if not (abs(self.phi) < math.pi / 2 and abs(self.theta) < math.pi / 2):
            raise ValueError("roll and pitch must lie inside (-pi/2, pi/2)")
        if not (self.sigma_phi > 0 and self.sigma_theta > 0):
            raise ValueError("standard deviations must be positive")


@dataclass(frozen=True)
class HeadingReading:
    psi: float
    sigma_psi: float
    t: float = 0.0

    def __post_init__(self):
        if not (-math.pi < self.psi <= math.pi):
            raise ValueError("heading must lie in (-pi, pi]")
        if not self.sigma_psi > 0:
            raise ValueError("standard deviation must be positive")


@dataclass(frozen=True)
class GpsReading:
    xyz: np.ndarray
    sigma_xy: float = 1.75
    sigma_z: float = 5.0
    t: float = 0.0

    def __post_init__(self):
        if not (self.sigma_xy > 0 and self.sigma_z > 0):
            raise ValueError("standard deviations must be positive")


class OrientationUpdate(NamedTuple):
    meas: OrientationMeasurement
    z_hat_rule: ZHatRule


class PositionUpdate(NamedTuple):
    y: np.ndarray
    m_pos: np.ndarray


def _planar_frame(x: ExtendedPose) -> np.ndarray:
    return rot_z(yaw_of(x.r))


def _planar_attitude(x: ExtendedPose) -> np.ndarray:
    return roll_pitch_projection(x.r)


def make_full_orientation(r_meas: np.ndarray, m: np.ndarray) -> OrientationUpdate:
    if not is_rotation(r_meas):
        raise ValueError("r_meas is not a rotation matrix")
    m = np.asarray(m, dtype=float)
    if np.any(m - np.diag(np.diag(m))):
        raise ValueError("orientation covariance must be diagonal")
    return OrientationUpdate(OrientationMeasurement(np.asarray(r_meas, float), np.diag(m)), homomorphism_h)


def make_roll_pitch(reading: RollPitchReading) -> OrientationUpdate:
    z = rot_y(reading.theta) @ rot_x(reading.phi)
    meas = OrientationMeasurement(
        z,
        np.array([reading.sigma_phi**2, reading.sigma_theta**2, np.inf]),
        (False, False, True),
    )
    return OrientationUpdate(meas, _planar_attitude)


def make_heading(reading: HeadingReading) -> OrientationUpdate:
    meas = OrientationMeasurement(
        rot_z(reading.psi),
        np.array([np.inf, np.inf, reading.sigma_psi**2]),
        (True, True, False),
    )
    return OrientationUpdate(meas, _planar_frame)


def make_gps(reading: GpsReading) -> PositionUpdate:
    xyz = np.asarray(reading.xyz, dtype=float)
    return PositionUpdate(xyz, np.diag([reading.sigma_xy**2, reading.sigma_xy**2, reading.sigma_z**2]))


def make_reconstructed_full(heading: HeadingReading, rp: RollPitchReading) -> OrientationUpdate:
    """Full orientation assembled from one heading and one roll/pitch reading."""
    r = euler_zyx(rp.phi, rp.theta, heading.psi)
    m = np.diag([rp.sigma_phi**2, rp.sigma_theta**2, heading.sigma_psi**2])
    return make_full_orientation(r, m)


def pair_nearest(
    headings: Sequence[HeadingReading],
    rollpitch: Sequence[RollPitchReading],
    window: float = PAIRING_WINDOW,
) -> list[tuple[HeadingReading, RollPitchReading]]:
    """Pair every heading with the roll/pitch reading closest in time.

    Headings without a roll/pitch reading inside ``window`` seconds are
    dropped. Ties go to the earlier reading. ``rollpitch`` must be sorted by time.
    """
    times = [r.t for r in rollpitch]
    pairs = []
    for h in headings:
        i = bisect.bisect_left(times, h.t)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(times):
                d = abs(times[j] - h.t)
                if d <= window and (best is None or d < best[0]):
                    best = (d, j)
        if best is not None:
            pairs.append((h, rollpitch[best[1]]))
    return pairs


def apply_orientation(
    state: FilterState, update: OrientationUpdate, gate: float = inekf.DEFAULT_GATE
) -> FilterState:
    meas, rule = update
    return inekf.update_orientation(state, meas, rule(state.x_hat), inekf.H_ORIENTATION, gate)


def apply_position(state: FilterState, update: PositionUpdate) -> FilterState:
    return inekf.update_position(state, update.y, update.m_pos)
