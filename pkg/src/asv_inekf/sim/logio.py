"""Plain-text sensor logs for replay.

One CSV row per sample, header ``t,sensor,v0,...,v14``. Unused trailing
value columns are left empty. Row kinds and their values:

========== =============================================================
init       R (9, row-major), v (3), p (3): the filter's initial guess
imu        gyro (3) in rad/s, accel (3) in m/s^2
gps        x, y, z, sigma_xy, sigma_z
heading    psi, sigma_psi
rollpitch  phi, theta, sigma_phi, sigma_theta
========== =============================================================

Floats are written with ``repr`` so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import LogFormatError
from ..liegroup import ExtendedPose
from ..measurements import GpsReading, HeadingReading, RollPitchReading
from .sensors import SensorStream

N_VALUES = 15
HEADER = ["t", "sensor"] + [f"v{i}" for i in range(N_VALUES)]
ROW_WIDTH = {"init": 15, "imu": 6, "gps": 5, "heading": 2, "rollpitch": 4}


def _row(t: float, kind: str, values) -> list[str]:
    vals = [repr(float(v)) for v in values]
    return [repr(float(t)), kind] + vals + [""] * (N_VALUES - len(vals))


def write_log(path, stream: SensorStream, x0: ExtendedPose | None = None) -> None:
    """Write ``stream`` (and optionally the initial guess) in time order."""
    rows = []
    if x0 is not None:
        rows.append((stream.imu_t[0], -1, _row(stream.imu_t[0], "init", [*x0.r.ravel(), *x0.v, *x0.p])))
    for t, g, a in zip(stream.imu_t, stream.gyro, stream.accel):
        rows.append((t, 0, _row(t, "imu", [*g, *a])))
    for r in stream.gps:
        rows.append((r.t, 1, _row(r.t, "gps", [*r.xyz, r.sigma_xy, r.sigma_z])))
    for r in stream.heading:
        rows.append((r.t, 2, _row(r.t, "heading", [r.psi, r.sigma_psi])))
    for r in stream.rollpitch:
        rows.append((r.t, 3, _row(r.t, "rollpitch", [r.phi, r.theta, r.sigma_phi, r.sigma_theta])))
    rows.sort(key=lambda item: (item[0], item[1]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(r for _, _, r in rows)


def read_log(path) -> tuple[SensorStream, ExtendedPose | None]:
    """Parse a log written by :func:`write_log` (or by hand in the same format).

    Raises:
        LogFormatError: on a bad header, unknown sensor, wrong value count,
            unparsable number, or a log without IMU rows. Messages carry the
            1-based line number.
    """
    path = Path(path)
    imu_t, gyro, accel, gps, heading, rollpitch = [], [], [], [], [], []
    x0 = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise LogFormatError(f"{path}: empty log")
        if [h.strip() for h in header[:2]] != ["t", "sensor"]:
            raise LogFormatError(f"{path}:1: header must start with 't,sensor'")
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            kind = row[1].strip() if len(row) > 1 else ""
            if kind not in ROW_WIDTH:
                raise LogFormatError(f"{path}:{line_no}: unknown sensor {kind!r}")
            try:
                t = float(row[0])
                vals = [float(c) for c in row[2:] if c.strip() != ""]
            except ValueError as exc:
                raise LogFormatError(f"{path}:{line_no}: {exc}") from None
            if len(vals) != ROW_WIDTH[kind]:
                raise LogFormatError(
                    f"{path}:{line_no}: {kind} row needs {ROW_WIDTH[kind]} values, got {len(vals)}"
                )
            try:
                if kind == "imu":
                    imu_t.append(t)
                    gyro.append(vals[0:3])
                    accel.append(vals[3:6])
                elif kind == "gps":
                    gps.append(GpsReading(np.array(vals[0:3]), vals[3], vals[4], t))
                elif kind == "heading":
                    heading.append(HeadingReading(vals[0], vals[1], t))
                elif kind == "rollpitch":
                    rollpitch.append(RollPitchReading(vals[0], vals[1], vals[2], vals[3], t))
                else:
                    x0 = ExtendedPose(np.array(vals[0:9]).reshape(3, 3), np.array(vals[9:12]), np.array(vals[12:15]))
            except ValueError as exc:
                raise LogFormatError(f"{path}:{line_no}: {exc}") from None
    if not imu_t:
        raise LogFormatError(f"{path}: log contains no imu rows")
    if any(b <= a for a, b in zip(imu_t, imu_t[1:])):
        raise LogFormatError(f"{path}: imu timestamps must be strictly increasing")
    stream = SensorStream(imu_t, np.array(gyro), np.array(accel), gps, heading, rollpitch)
    return stream, x0


def infer_mode(stream: SensorStream) -> str:
    """Partial roll/pitch mode when roll/pitch rows exist, otherwise ``no-rollpitch``."""
    if not stream.rollpitch:
        return "no-rollpitch"
    if len(stream.rollpitch) > 1:
        dt = float(np.median(np.diff([r.t for r in stream.rollpitch])))
        rate = round(1.0 / dt) if dt > 0 else 1
    else:
        rate = 1
    return f"partial-{max(rate, 1)}Hz"
