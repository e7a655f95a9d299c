"""Roll and pitch from a detected horizon line segment.

Frames: the body is forward-left-up, the camera looks along body ``+x`` with
image ``x`` to the right and image ``y`` down. A vessel rolled starboard-down
(positive roll about body ``x``) sees the horizon rise toward the right edge
of the image, i.e. a negative image angle.

Pitch is first formed bow-up positive and then negated, because a positive
rotation about the body's left-pointing ``y`` axis pitches the bow down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoHorizonError
from .measurements import RollPitchReading

EARTH_RADIUS = 6.371e6
DEFAULT_VERTICAL_CUTOFF_DEG = 45.0


@dataclass(frozen=True)
class CameraIntrinsics:
    f_y: float = 800.0
    c_y: float = 360.0
    image_height: int = 720
    image_width: int = 1280
    f_x: float = 800.0
    c_x: float = 640.0

    def __post_init__(self):
        if not self.f_y > 0 or not self.f_x > 0:
            raise ValueError("focal lengths must be positive")
        if not 0 <= self.c_y <= self.image_height:
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class HorizonGeometry:
    camera_height_v: float = 2.0
    earth_radius_re: float = EARTH_RADIUS

    def __post_init__(self):
        if not 0 < self.camera_height_v < self.earth_radius_re:
            raise ValueError("camera height must be positive and below the Earth radius")


@dataclass(frozen=True)
class Segment:
    """Pixel endpoints ``(x, y)``, x to the right and y down."""

    p0: tuple
    p1: tuple

    def __post_init__(self):
        p0 = (float(self.p0[0]), float(self.p0[1]))
        p1 = (float(self.p1[0]), float(self.p1[1]))
        if p0 == p1:
            raise ValueError("segment endpoints coincide")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    def ordered(self) -> "Segment":
        """Same segment with the left-most endpoint first; vertical ones run top to bottom."""
        if (self.p1[0], self.p1[1]) < (self.p0[0], self.p0[1]):
            return Segment(self.p1, self.p0)
        return self

    def tilt(self) -> float:
        """Unsigned angle from the image horizontal, in [0, pi/2]."""
        return math.atan2(abs(self.p1[1] - self.p0[1]), abs(self.p1[0] - self.p0[0]))


def filter_and_select(
    segments: Sequence[Segment], vertical_cutoff_deg: float = DEFAULT_VERTICAL_CUTOFF_DEG
) -> Segment:
    """Drop near-vertical segments and return the longest survivor.

    A segment survives when its tilt from horizontal is at most
    ``90 - vertical_cutoff_deg`` degrees. Ties in length go to the flatter one.
    """
    max_tilt = math.radians(90.0 - vertical_cutoff_deg)
    survivors = [s for s in segments if s.tilt() <= max_tilt]
    if not survivors:
        raise NoHorizonError(f"no segment within {90.0 - vertical_cutoff_deg:g} deg of horizontal")
    return min(survivors, key=lambda s: (-s.length, s.tilt()))


def roll_from_segment(s: Segment) -> float:
    """Image-plane angle ``atan2(dy, dx)`` of the segment, endpoints ordered left to right."""
    s = s.ordered()
    dx = s.p1[0] - s.p0[0]
    dy = s.p1[1] - s.p0[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError("degenerate segment")
    return math.atan2(dy, dx)


def declination_from_pixel(p_hy: float, cam: CameraIntrinsics) -> float:
    """Angle of an image row below the optical axis (positive down)."""
    return math.atan2(p_hy - cam.c_y, cam.f_y)


def horizon_dip(geom: HorizonGeometry) -> float:
    """Angle between the local vertical and the line of sight to the horizon.

    Returned as ``asin(Re / (Re + V))``, just under pi/2; the dip below the
    horizontal is ``pi/2`` minus this value.
    """
    re = geom.earth_radius_re
    return math.asin(re / (re + geom.camera_height_v))


def pitch_from_horizon(alpha: float, theta_c: float) -> float:
    """Bow-up pitch from the horizon angle ``alpha`` and its observed inclination ``theta_c``."""
    return alpha - theta_c - math.pi / 2


def centerline_crossing(s: Segment, cam: CameraIntrinsics) -> float:
    """Row where the infinite extension of ``s`` crosses ``x = width / 2``."""
    (x0, y0), (x1, y1) = s.p0, s.p1
    if x1 == x0:
        raise NoHorizonError("vertical segment never crosses the centerline")
    xc = 0.5 * cam.image_width
    return y0 + (y1 - y0) * (xc - x0) / (x1 - x0)


def horizon_to_reading(
    segments: Sequence[Segment],
    cam: CameraIntrinsics,
    geom: HorizonGeometry,
    sigma: float,
    t: float = 0.0,
    vertical_cutoff_deg: float = DEFAULT_VERTICAL_CUTOFF_DEG,
    mount_pitch: float = 0.0,
) -> RollPitchReading:
    """Full pipeline from candidate segments to a body roll/pitch reading.

    ``mount_pitch`` is the camera's bow-up tilt relative to the body.

    Raises:
        NoHorizonError: if no segment survives the vertical filter.
    """
    if not segments:
        raise NoHorizonError("no segments supplied")
    seg = filter_and_select(segments, vertical_cutoff_deg)
    image_angle = roll_from_segment(seg)
    p_hy = centerline_crossing(seg, cam)
    # Use the perpendicular offset from the principal point; along the
    # centerline the offset is stretched by 1 / cos(image_angle).
    offset = (p_hy - cam.c_y) * math.cos(image_angle)
    theta_c = -declination_from_pixel(cam.c_y + offset, cam)
    bow_up = pitch_from_horizon(horizon_dip(geom), theta_c) - mount_pitch
    return RollPitchReading(-image_angle, -bow_up, sigma, sigma, t)
