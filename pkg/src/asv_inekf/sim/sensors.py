"""Noisy sensor streams and synthetic horizon segments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import HorizonOutOfFrameError
from ..horizon import CameraIntrinsics, HorizonGeometry, Segment, horizon_dip, horizon_to_reading
from ..liegroup import rot_y, wrap_angle
from ..measurements import GpsReading, HeadingReading, RollPitchReading
from .trajectory import WaveTrajectory, sample_times

# Body (forward-left-up) vectors expressed in camera (right-down-forward) axes.
CAMERA_FROM_BODY = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class SensorSchedule:
    """Rates in Hz and per-sample noise standard deviations. A rate of 0 disables the sensor."""

    imu_rate: float = 100.0
    gyro_std: float = 0.002
    accel_std: float = 0.04
    gps_rate: float = 1.0
    gps_std_xy: float = 1.75
    gps_std_z: float = 5.0
    heading_rate: float = 1.0
    heading_std_deg: float = 1.0
    rollpitch_rate: float = 30.0
    rollpitch_std_deg: float = 2.0
    rollpitch_source: str = "direct"

    def __post_init__(self):
        if not self.imu_rate > 0:
            raise ValueError("imu_rate must be positive")
        for name in ("gps_rate", "heading_rate", "rollpitch_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.rollpitch_source not in ("direct", "horizon"):
            raise ValueError("rollpitch_source must be 'direct' or 'horizon'")


@dataclass
class SensorStream:
    imu_t: list
    gyro: np.ndarray
    accel: np.ndarray
    gps: list = field(default_factory=list)
    heading: list = field(default_factory=list)
    rollpitch: list = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, SensorStream):
            return NotImplemented
        return (
            self.imu_t == other.imu_t
            and np.array_equal(self.gyro, other.gyro)
            and np.array_equal(self.accel, other.accel)
            and _readings_equal(self.gps, other.gps)
            and self.heading == other.heading
            and self.rollpitch == other.rollpitch
        )


def _readings_equal(a, b) -> bool:
    return len(a) == len(b) and all(
        x.t == y.t and np.array_equal(x.xyz, y.xyz) and x.sigma_xy == y.sigma_xy and x.sigma_z == y.sigma_z
        for x, y in zip(a, b)
    )


def measurement_times(duration: float, rate: float) -> list[float]:
    if rate <= 0:
        return []
    n = int(math.floor(duration * rate + 1e-9))
    return sample_times(n + 1, rate)[1:]


def project_horizon_segment(
    r_body: np.ndarray,
    cam: CameraIntrinsics,
    geom: HorizonGeometry,
    mount_pitch: float = 0.0,
) -> Segment:
    """Image of the geometric horizon as a segment from ``x = 0`` to ``x = width``.

    The horizon is the cone of sight lines depressed by the dip angle below
    the local horizontal; its image is a conic, nearly straight. The segment
    is the tangent to that conic where it crosses the image centerline.

    Raises:
        HorizonOutOfFrameError: if the horizon does not cross the image centerline.
    """
    sin_dip = math.sin(math.pi / 2 - horizon_dip(geom))
    # Camera-to-world rotation; mount_pitch tilts the camera bow-up.
    m = r_body @ rot_y(-mount_pitch) @ CAMERA_FROM_BODY.T
    b = m @ np.array([0.0, 1.0 / cam.f_y, 0.0])

    def row_at(u: float) -> float:
        a = m @ np.array([(u - cam.c_x) / cam.f_x, -cam.c_y / cam.f_y, 1.0])
        s2 = sin_dip * sin_dip
        qa = b[2] * b[2] - s2 * (b @ b)
        qb = 2.0 * (a[2] * b[2] - s2 * (a @ b))
        qc = a[2] * a[2] - s2 * (a @ a)
        if abs(qa) < 1e-18:
            roots = [-qc / qb] if qb != 0 else []
        else:
            disc = qb * qb - 4 * qa * qc
            if disc < 0:
                raise HorizonOutOfFrameError("camera ray never meets the horizon")
            sq = math.sqrt(disc)
            roots = [(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)]
        # Keep the solution below the horizontal; the other lies on the mirrored cone.
        below = [v for v in roots if a[2] + v * b[2] < 0]
        if not below:
            raise HorizonOutOfFrameError("horizon not visible in this column")
        return min(below, key=lambda v: abs(v - cam.c_y))

    xc = 0.5 * cam.image_width
    yc = row_at(xc)
    if not 0.0 <= yc <= cam.image_height:
        raise HorizonOutOfFrameError(f"horizon crosses the centerline at row {yc:.1f}, outside the image")
    # Tangent at the centerline, extended across the full width.
    slope = 0.5 * (row_at(xc + 1.0) - row_at(xc - 1.0))
    width = float(cam.image_width)
    return Segment((0.0, yc - slope * xc), (width, yc + slope * (width - xc)))


def simulate_sensors(
    trajectory: WaveTrajectory,
    schedule: SensorSchedule,
    duration: float,
    rng: np.random.Generator | int,
    noise_free: bool = False,
    cam: CameraIntrinsics | None = None,
    geom: HorizonGeometry | None = None,
) -> SensorStream:
    """Sample every sensor on its own clock and add independent Gaussian noise.

    IMU samples are taken at the midpoint of each IMU interval. Noise is
    drawn in a fixed order (gyro, accel, GPS, heading, roll/pitch) so the
    IMU, GPS and heading streams do not depend on the roll/pitch rate.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    scale = 0.0 if noise_free else 1.0

    n_imu = int(round(duration * schedule.imu_rate)) + 1
    imu_t = sample_times(n_imu, schedule.imu_rate)
    # The filter holds each IMU sample until the next tick, so the sample
    # stamped t stands for the interval [t, t + dt]; report its midpoint.
    half = 0.5 / schedule.imu_rate
    truth = [trajectory.state_at(t + half) for t in imu_t]
    gyro = np.array([s.omega_body for s in truth])
    accel = np.array([s.accel_body for s in truth])
    gyro = gyro + scale * schedule.gyro_std * rng.standard_normal(gyro.shape)
    accel = accel + scale * schedule.accel_std * rng.standard_normal(accel.shape)

    gps_t = measurement_times(duration, schedule.gps_rate)
    gps_noise = rng.standard_normal((len(gps_t), 3)) * scale
    gps = []
    for t, n in zip(gps_t, gps_noise):
        p = trajectory.state_at(t).pose.p
        noise = n * np.array([schedule.gps_std_xy, schedule.gps_std_xy, schedule.gps_std_z])
        gps.append(GpsReading(p + noise, schedule.gps_std_xy, schedule.gps_std_z, t))

    heading_t = measurement_times(duration, schedule.heading_rate)
    heading_noise = rng.standard_normal(len(heading_t)) * scale
    sig_h = math.radians(schedule.heading_std_deg)
    heading = [
        HeadingReading(wrap_angle(trajectory.state_at(t).euler[2] + sig_h * n), sig_h, t)
        for t, n in zip(heading_t, heading_noise)
    ]

    rp_t = measurement_times(duration, schedule.rollpitch_rate)
    rp_noise = rng.standard_normal((len(rp_t), 2)) * scale
    sig_rp = math.radians(schedule.rollpitch_std_deg)
    rollpitch = []
    for t, n in zip(rp_t, rp_noise):
        st = trajectory.state_at(t)
        if schedule.rollpitch_source == "horizon":
            cam = cam or CameraIntrinsics()
            geom = geom or HorizonGeometry()
            seg = project_horizon_segment(st.pose.r, cam, geom)
            base = horizon_to_reading([seg], cam, geom, sig_rp, t)
            phi, theta = base.phi, base.theta
        else:
            phi, theta = st.euler[0], st.euler[1]
        rollpitch.append(RollPitchReading(phi + sig_rp * n[0], theta + sig_rp * n[1], sig_rp, sig_rp, t))

    return SensorStream(imu_t, gyro, accel, gps, heading, rollpitch)
