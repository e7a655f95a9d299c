"""SO(3) and SE_2(3) primitives.

Rotations are plain 3x3 numpy arrays and tangent vectors are plain numpy
vectors. Only the extended pose gets its own type, because it bundles three
blocks that always travel together.

Tangent ordering for SE_2(3) is ``[rotation, velocity, position]``, so that
the orientation block of any Jacobian sits in the first three columns.

The 5x5 embedding used throughout is::

    X = [[R, v, p],
         [0, 1, 0],
         [0, 0, 1]]
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchAmbiguityError, DegenerateOrientationError

SMALL_ANGLE = 1e-5
# Below this distance from pi the rotation axis sign is unrecoverable.
PI_TOLERANCE = 1e-9

_I3 = np.eye(3)


def rot_x(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_zyx(phi: float, theta: float, psi: float) -> np.ndarray:
    """Body-to-world rotation ``rot_z(psi) @ rot_y(theta) @ rot_x(phi)``."""
    return rot_z(psi) @ rot_y(theta) @ rot_x(phi)


def skew(w) -> np.ndarray:
    return np.array(
        [[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]]
    )


def vee3(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def is_rotation(m: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(m)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    return (
        np.linalg.norm(m.T @ m - _I3) <= tol
        and abs(np.linalg.det(m) - 1.0) <= tol
    )


def so3_exp(w) -> np.ndarray:
    """Rodrigues formula with a Taylor branch for tiny angles."""
    w = np.asarray(w, dtype=float)
    theta2 = float(w @ w)
    K = skew(w)
    if theta2 < SMALL_ANGLE**2:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        theta = math.sqrt(theta2)
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / theta2
    return _I3 + a * K + b * (K @ K)


def so3_log(r: np.ndarray) -> np.ndarray:
    """Principal logarithm, returning the rotation vector.

    Raises:
        BranchAmbiguityError: if the rotation angle is (numerically) pi.
    """
    r = np.asarray(r, dtype=float)
    s_vec = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    sin_t = math.sqrt(float(s_vec @ s_vec))
    cos_t = 0.5 * (r[0, 0] + r[1, 1] + r[2, 2] - 1.0)
    theta = math.atan2(sin_t, cos_t)

    if theta < SMALL_ANGLE:
        # theta / sin(theta) ~ 1 + theta^2 / 6
        return (1.0 + theta * theta / 6.0) * s_vec
    if cos_t > -0.9:
        return (theta / sin_t) * s_vec

    # Near pi the skew part vanishes; recover the axis from the symmetric part.
    if math.pi - theta < PI_TOLERANCE:
        raise BranchAmbiguityError(
            f"rotation angle {theta!r} is at the log branch cut (pi)"
        )
    B = 0.5 * (r + r.T) - cos_t * _I3
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / math.sqrt(B[k, k] * (1.0 - cos_t))
    axis /= np.linalg.norm(axis)
    if axis @ s_vec < 0.0:
        axis = -axis
    return theta * axis


def so3_left_jacobian(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta2 = float(w @ w)
    K = skew(w)
    if theta2 < SMALL_ANGLE**2:
        return _I3 + 0.5 * K + (K @ K) / 6.0
    theta = math.sqrt(theta2)
    a = (1.0 - math.cos(theta)) / theta2
    b = (theta - math.sin(theta)) / (theta2 * theta)
    return _I3 + a * K + b * (K @ K)


def so3_left_jacobian_inv(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta2 = float(w @ w)
    K = skew(w)
    if theta2 < SMALL_ANGLE**2:
        return _I3 - 0.5 * K + (K @ K) / 12.0
    theta = math.sqrt(theta2)
    c = 1.0 / theta2 - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    return _I3 - 0.5 * K + c * (K @ K)


@dataclass(frozen=True)
class ExtendedPose:
    """Element of SE_2(3): rotation ``r``, world velocity ``v``, world position ``p``."""

    r: np.ndarray
    v: np.ndarray
    p: np.ndarray

    @classmethod
    def identity(cls) -> "ExtendedPose":
        return cls(np.eye(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "ExtendedPose":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3].copy(), m[:3, 3].copy(), m[:3, 4].copy())

    def matrix(self) -> np.ndarray:
        m = np.eye(5)
        m[:3, :3] = self.r
        m[:3, 3] = self.v
        m[:3, 4] = self.p
        return m

    def inverse(self) -> "ExtendedPose":
        rt = self.r.T
        return ExtendedPose(rt, -rt @ self.v, -rt @ self.p)

    def __matmul__(self, other: "ExtendedPose") -> "ExtendedPose":
        r = self.r
        return ExtendedPose(r @ other.r, self.v + r @ other.v, self.p + r @ other.p)

    def is_valid(self, tol: float = 1e-9) -> bool:
        return (
            is_rotation(self.r, tol)
            and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.p))
        )


def se23_hat(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    m = np.zeros((5, 5))
    m[:3, :3] = skew(xi[:3])
    m[:3, 3] = xi[3:6]
    m[:3, 4] = xi[6:9]
    return m


def se23_vee(m: np.ndarray) -> np.ndarray:
    return np.concatenate([vee3(m[:3, :3]), m[:3, 3], m[:3, 4]])


def se23_exp(xi) -> ExtendedPose:
    xi = np.asarray(xi, dtype=float)
    w = xi[:3]
    J = so3_left_jacobian(w)
    return ExtendedPose(so3_exp(w), J @ xi[3:6], J @ xi[6:9])


def se23_log(x: ExtendedPose) -> np.ndarray:
    w = so3_log(x.r)
    Jinv = so3_left_jacobian_inv(w)
    return np.concatenate([w, Jinv @ x.v, Jinv @ x.p])


def adjoint(x: ExtendedPose) -> np.ndarray:
    """9x9 adjoint with ``x @ hat(xi) @ x^-1 == hat(adjoint(x) @ xi)``."""
    r = x.r
    ad = np.zeros((9, 9))
    ad[0:3, 0:3] = r
    ad[3:6, 3:6] = r
    ad[6:9, 6:9] = r
    ad[3:6, 0:3] = skew(x.v) @ r
    ad[6:9, 0:3] = skew(x.p) @ r
    return ad


def homomorphism_h(x: ExtendedPose) -> np.ndarray:
    """Group homomorphism SE_2(3) -> SO(3) keeping the rotation block."""
    return x.r


def yaw_of(r: np.ndarray) -> float:
    """Yaw of the Z-Y-X decomposition, in (-pi, pi].

    Raises:
        DegenerateOrientationError: at gimbal lock (pitch of +/- pi/2).
    """
    r10, r00 = r[1, 0], r[0, 0]
    if math.hypot(r10, r00) < 1e-12:
        raise DegenerateOrientationError("yaw undefined at pitch = +/- pi/2")
    psi = math.atan2(r10, r00)
    return math.pi if psi == -math.pi else psi


def roll_pitch_of(r: np.ndarray) -> tuple[float, float]:
    """Roll and pitch of the Z-Y-X decomposition."""
    r20 = min(1.0, max(-1.0, float(r[2, 0])))
    return math.atan2(r[2, 1], r[2, 2]), -math.asin(r20)


def euler_of(r: np.ndarray) -> tuple[float, float, float]:
    """``(roll, pitch, yaw)`` such that ``euler_zyx(roll, pitch, yaw) == r``."""
    phi, theta = roll_pitch_of(r)
    return phi, theta, yaw_of(r)


def roll_pitch_projection(r: np.ndarray) -> np.ndarray:
    """Strip the yaw: ``rot_z(yaw_of(r)).T @ r``, an X-then-Y rotation."""
    return rot_z(yaw_of(r)).T @ r


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation, in [0, pi]."""
    c = 0.5 * (r[0, 0] + r[1, 1] + r[2, 2] - 1.0)
    s = 0.5 * math.sqrt(
        (r[2, 1] - r[1, 2]) ** 2 + (r[0, 2] - r[2, 0]) ** 2 + (r[1, 0] - r[0, 1]) ** 2
    )
    return math.atan2(s, c)
