"""Monte-Carlo harness: perturb, filter, score.

Every run draws its randomness from ``SeedSequence([seed, run_index])``,
split into one child for the initial perturbation and one for sensor noise.
The perturbation child is shared across filters and measurement modes, so
all variants of run ``k`` start from the same wrong guess and (apart from
the roll/pitch stream) see the same noise.
"""

from __future__ import annotations

import functools
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .. import inekf, mekf
from ..errors import EstimationError
from ..horizon import CameraIntrinsics, HorizonGeometry
from ..inekf import ImuSample, ProcessNoise
from ..liegroup import ExtendedPose, rotation_angle, so3_exp, wrap_angle
from ..measurements import (
    PAIRING_WINDOW,
    apply_orientation,
    apply_position,
    make_gps,
    make_heading,
    make_reconstructed_full,
    make_roll_pitch,
    pair_nearest,
)
from .sensors import SensorSchedule, SensorStream, simulate_sensors
from .trajectory import WaveParams, WaveTrajectory, sample_times

FILTERS = ("inekf", "mekf")
PERTURB_CLIP = math.pi - 0.1
# Lower bounds on the initial standard deviations so the prior stays invertible.
STD_FLOOR = (1e-3, 1e-3, 1e-3)

_MODE_RE = re.compile(r"^(partial|reconstructed-full)-(\d+(?:\.\d+)?)Hz$")


@dataclass(frozen=True)
class InitNoise:
    orientation_deg: float = 60.0
    velocity: float = 4.0
    position_xy: float = 4.0
    position_z: float = 1.0


# Initial guess about as good as one reading of each sensor.
NOMINAL_INIT = InitNoise(orientation_deg=2.0, velocity=1.0, position_xy=1.75, position_z=5.0)


@dataclass(frozen=True)
class FilterTuning:
    """Filter-side noise model; the defaults match the simulated sensors."""

    gyro_std: float = 0.002
    accel_std: float = 0.04
    imu_rate: float = 100.0
    position_rw: float = 1e-4
    gate: float = inekf.DEFAULT_GATE

    def process_noise(self) -> ProcessNoise:
        return ProcessNoise.from_sensor_noise(self.gyro_std, self.accel_std, self.imu_rate, self.position_rw)


@dataclass(frozen=True)
class MonteCarloConfig:
    n_runs: int = 50
    seed: int = 0
    duration: float = 30.0
    init_noise: InitNoise = field(default_factory=InitNoise)
    schedule: SensorSchedule = field(default_factory=SensorSchedule)
    wave: WaveParams = field(default_factory=WaveParams)
    use_gps: bool = True
    use_heading: bool = True
    tuning: FilterTuning = field(default_factory=FilterTuning)
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    geometry: HorizonGeometry = field(default_factory=HorizonGeometry)
    divergence_xy: float = 1e3
    pairing_window: float = PAIRING_WINDOW
    noise_free: bool = False
    compute_nees: bool = False
    record_stride: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be at least 1")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class RunMetrics:
    """Per-timestep absolute errors of one run, sampled at the IMU clock."""

    run: int
    t: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray
    z: np.ndarray
    vel: np.ndarray
    xy: np.ndarray
    rot: np.ndarray
    diverged: bool = False
    skipped_updates: int = 0
    nees: np.ndarray | None = None
    trace: dict | None = None

    def mean(self, name: str) -> float:
        values = getattr(self, name)
        finite = values[np.isfinite(values)]
        return float(finite.mean()) if finite.size else math.nan

    def window_mean(self, name: str, t0: float) -> float:
        values = getattr(self, name)[self.t >= t0 - 1e-9]
        return float(values.mean()) if values.size else math.nan


def parse_mode(mode: str) -> tuple[str, float]:
    """``'partial-30Hz'`` -> ``('partial', 30.0)``; ``'no-rollpitch'`` -> ``('none', 0.0)``."""
    if mode == "no-rollpitch":
        return "none", 0.0
    m = _MODE_RE.match(mode)
    if not m:
        raise ValueError(f"unknown measurement mode {mode!r}")
    kind = "partial" if m.group(1) == "partial" else "full"
    return kind, float(m.group(2))


def schedule_for_mode(schedule: SensorSchedule, mode: str) -> SensorSchedule:
    kind, rate = parse_mode(mode)
    if kind == "partial":
        return replace(schedule, rollpitch_rate=rate)
    if kind == "full":
        # Roll/pitch keep their native rate; pairing happens at the heading rate.
        return replace(schedule, heading_rate=rate)
    return replace(schedule, rollpitch_rate=0.0)


@functools.lru_cache(maxsize=8)
def trajectory_for(params: WaveParams) -> WaveTrajectory:
    return WaveTrajectory(params)


def run_rng(seed: int, run_index: int) -> tuple[np.random.Generator, np.random.Generator]:
    perturb, sensors = np.random.SeedSequence([seed, run_index]).spawn(2)
    return np.random.default_rng(perturb), np.random.default_rng(sensors)


def perturb_initial(truth: ExtendedPose, noise: InitNoise, rng: np.random.Generator) -> ExtendedPose:
    """Random initial guess: body-frame rotation error, world-frame velocity and position errors."""
    dtheta = rng.standard_normal(3) * math.radians(noise.orientation_deg)
    angle = float(np.linalg.norm(dtheta))
    if angle > PERTURB_CLIP:
        dtheta *= PERTURB_CLIP / angle
    dv = rng.standard_normal(3) * noise.velocity
    dp = rng.standard_normal(3) * np.array([noise.position_xy, noise.position_xy, noise.position_z])
    return ExtendedPose(truth.r @ so3_exp(dtheta), truth.v + dv, truth.p + dp)


def _init_stds(noise: InitNoise):
    return (
        max(math.radians(noise.orientation_deg), STD_FLOOR[0]),
        max(noise.velocity, STD_FLOOR[1]),
        np.maximum([noise.position_xy, noise.position_xy, noise.position_z], STD_FLOOR[2]),
    )


def inekf_prior(x0: ExtendedPose, noise: InitNoise) -> np.ndarray:
    """Left-error prior: world-frame velocity/position spreads rotated into the estimated body frame."""
    s_rot, s_vel, s_pos = _init_stds(noise)
    rt = x0.r.T
    sigma = np.zeros((9, 9))
    sigma[0:3, 0:3] = np.eye(3) * s_rot**2
    sigma[3:6, 3:6] = np.eye(3) * s_vel**2
    sigma[6:9, 6:9] = rt @ np.diag(s_pos**2) @ rt.T
    return sigma


def mekf_prior(noise: InitNoise) -> np.ndarray:
    s_rot, s_vel, s_pos = _init_stds(noise)
    return np.diag(np.concatenate([[s_rot**2] * 3, [s_vel**2] * 3, s_pos**2]))


class _InekfAdapter:
    def __init__(self, x0: ExtendedPose, noise: InitNoise, q: ProcessNoise, gate: float):
        self.state = inekf.initial_state(x0, inekf_prior(x0, noise))
        self.q = q
        self.gate = gate

    def predict(self, gyro, accel, dt):
        self.state = inekf.predict(self.state, ImuSample(0.0, gyro, accel), dt, self.q)

    def rollpitch(self, rd):
        self.state = apply_orientation(self.state, make_roll_pitch(rd), self.gate)

    def heading(self, rd):
        self.state = apply_orientation(self.state, make_heading(rd), self.gate)

    def full(self, h, rp):
        self.state = apply_orientation(self.state, make_reconstructed_full(h, rp), self.gate)

    def gps(self, g):
        self.state = apply_position(self.state, make_gps(g))

    def pose(self):
        x = self.state.x_hat
        return x.r, x.v, x.p


class _MekfAdapter:
    def __init__(self, x0: ExtendedPose, noise: InitNoise, q: ProcessNoise, gate: float):
        self.state = mekf.mekf_initial_state(x0.r, x0.v, x0.p, mekf_prior(noise))
        self.q = q

    def predict(self, gyro, accel, dt):
        self.state = mekf.mekf_predict(self.state, ImuSample(0.0, gyro, accel), dt, self.q)

    def rollpitch(self, rd):
        self.state = mekf.mekf_update_rollpitch(self.state, rd)

    def heading(self, rd):
        self.state = mekf.mekf_update_heading(self.state, rd)

    def full(self, h, rp):
        self.state = mekf.mekf_update_full(self.state, h, rp)

    def gps(self, g):
        self.state = mekf.mekf_update_gps(self.state, g)

    def pose(self):
        s = self.state
        return s.r, s.v, s.p


def euler_angles(r: np.ndarray) -> tuple[float, float, float]:
    """Z-Y-X ``(roll, pitch, yaw)`` that never raises; yaw is arbitrary at gimbal lock."""
    r20 = min(1.0, max(-1.0, float(r[2, 0])))
    return math.atan2(r[2, 1], r[2, 2]), -math.asin(r20), math.atan2(r[1, 0], r[0, 0])


def build_events(stream: SensorStream, mode: str, use_gps: bool = True, use_heading: bool = True,
                 pairing_window: float = PAIRING_WINDOW) -> list:
    """Measurement events ``(t, order, kind, payload)`` sorted by time."""
    kind, _ = parse_mode(mode)
    events = []
    if use_gps:
        events += [(g.t, 0, "gps", g) for g in stream.gps]
    if kind == "full":
        pairs = pair_nearest(stream.heading, stream.rollpitch, pairing_window)
        events += [(h.t, 1, "full", (h, rp)) for h, rp in pairs]
    else:
        if use_heading:
            events += [(h.t, 1, "heading", h) for h in stream.heading]
        if kind == "partial":
            events += [(r.t, 2, "rollpitch", r) for r in stream.rollpitch]
    events.sort(key=lambda e: (e[0], e[1]))
    return events


def run_filter(
    filter_kind: str,
    x0: ExtendedPose,
    stream: SensorStream,
    events: list,
    config: MonteCarloConfig,
    truth: WaveTrajectory | None = None,
    run: int = 0,
) -> tuple[RunMetrics | None, list]:
    """Drive one filter through a stream.

    Returns the metrics (``None`` without a truth trajectory) and the estimate
    at every IMU tick as ``(t, R, v, p)`` tuples.
    """
    adapter_cls = {"inekf": _InekfAdapter, "mekf": _MekfAdapter}[filter_kind]
    filt = adapter_cls(x0, config.init_noise, config.tuning.process_noise(), config.tuning.gate)

    imu_t = stream.imu_t
    n = len(imu_t)
    err = np.full((8, n), np.nan)
    nees_vals = np.full(n, np.nan) if (config.compute_nees and filter_kind == "inekf" and truth) else None
    estimates = []
    skipped = 0
    diverged = False
    ev_i = 0
    n_ev = len(events)

    def apply(event):
        nonlocal skipped
        _, _, kind, payload = event
        try:
            if kind == "gps":
                filt.gps(payload)
            elif kind == "heading":
                filt.heading(payload)
            elif kind == "rollpitch":
                filt.rollpitch(payload)
            else:
                filt.full(*payload)
        except (EstimationError, np.linalg.LinAlgError):
            skipped += 1

    def score(k, t):
        r, v, p = filt.pose()
        estimates.append((t, r, v, p))
        if truth is None:
            return True
        ts = truth.state_at(t)
        tp = ts.pose
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v)) and np.all(np.isfinite(p))):
            return False
        e_roll, e_pitch, e_yaw = euler_angles(r)
        t_roll, t_pitch, t_yaw = ts.euler
        err[0, k] = t
        err[1, k] = abs(wrap_angle(e_roll - t_roll))
        err[2, k] = abs(wrap_angle(e_pitch - t_pitch))
        err[3, k] = abs(wrap_angle(e_yaw - t_yaw))
        err[4, k] = abs(p[2] - tp.p[2])
        err[5, k] = float(np.linalg.norm(v - tp.v))
        err[6, k] = math.hypot(p[0] - tp.p[0], p[1] - tp.p[1])
        err[7, k] = rotation_angle(tp.r.T @ r)
        if nees_vals is not None:
            nees_vals[k] = inekf.nees(filt.state, tp)
        return err[6, k] <= config.divergence_xy

    now = imu_t[0]
    while ev_i < n_ev and events[ev_i][0] <= now:
        apply(events[ev_i])
        ev_i += 1
    ok = score(0, now)
    for k in range(n - 1):
        if not ok:
            diverged = True
            break
        gyro, accel = stream.gyro[k], stream.accel[k]
        t_next = imu_t[k + 1]
        try:
            while ev_i < n_ev and events[ev_i][0] <= t_next:
                t_ev = events[ev_i][0]
                if t_ev > now:
                    filt.predict(gyro, accel, t_ev - now)
                    now = t_ev
                apply(events[ev_i])
                ev_i += 1
            if t_next > now:
                filt.predict(gyro, accel, t_next - now)
                now = t_next
        except (ValueError, np.linalg.LinAlgError, FloatingPointError):
            ok = False
            continue
        ok = score(k + 1, now)
    if not ok:
        diverged = True

    if truth is None:
        return None, estimates
    err[0] = imu_t
    metrics = RunMetrics(
        run=run,
        t=err[0],
        roll=err[1],
        pitch=err[2],
        yaw=err[3],
        z=err[4],
        vel=err[5],
        xy=err[6],
        rot=err[7],
        diverged=diverged,
        skipped_updates=skipped,
        nees=nees_vals,
    )
    return metrics, estimates


def simulate_run(config: MonteCarloConfig, mode: str, run_index: int):
    """Initial guess, sensor stream and events for one run of one mode."""
    truth = trajectory_for(config.wave)
    rng_perturb, rng_sensors = run_rng(config.seed, run_index)
    x0 = perturb_initial(truth.state_at(0.0).pose, config.init_noise, rng_perturb)
    schedule = schedule_for_mode(config.schedule, mode)
    stream = simulate_sensors(
        truth, schedule, config.duration, rng_sensors, config.noise_free, config.camera, config.geometry
    )
    events = build_events(stream, mode, config.use_gps, config.use_heading, config.pairing_window)
    return truth, x0, stream, events


def run_single(config: MonteCarloConfig, filter_kind: str, mode: str, run_index: int) -> RunMetrics:
    if filter_kind not in FILTERS:
        raise ValueError(f"unknown filter {filter_kind!r}")
    truth, x0, stream, events = simulate_run(config, mode, run_index)
    metrics, estimates = run_filter(filter_kind, x0, stream, events, config, truth, run_index)
    if config.record_stride > 0:
        metrics.trace = _trace(estimates, config.record_stride)
    return metrics


def _trace(estimates, stride: int) -> dict:
    rows = estimates[::stride]
    out = {k: [] for k in ("t", "roll", "pitch", "yaw", "x", "y", "z")}
    for t, r, _, p in rows:
        roll, pitch, yaw = euler_angles(r)
        out["t"].append(t)
        out["roll"].append(roll)
        out["pitch"].append(pitch)
        out["yaw"].append(yaw)
        out["x"].append(p[0])
        out["y"].append(p[1])
        out["z"].append(p[2])
    return {k: np.array(v) for k, v in out.items()}


def run_monte_carlo(config: MonteCarloConfig, filter_kind: str, measurement_mode: str) -> list[RunMetrics]:
    """Run ``config.n_runs`` independent runs; results are ordered by run index."""
    parse_mode(measurement_mode)
    if filter_kind not in FILTERS:
        raise ValueError(f"unknown filter {filter_kind!r}")
    job = functools.partial(run_single, config, filter_kind, measurement_mode)
    indices = range(config.n_runs)
    if config.workers == 1:
        return [job(i) for i in indices]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(job, indices))


# CSV column name -> RunMetrics field.
METRIC_COLUMNS = (
    ("mean_xy_m", "xy"),
    ("mean_z_m", "z"),
    ("mean_roll_rad", "roll"),
    ("mean_pitch_rad", "pitch"),
    ("mean_yaw_rad", "yaw"),
    ("mean_vel_mps", "vel"),
)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    median: float
    q1: float
    q3: float


@dataclass(frozen=True)
class Summary:
    n_runs: int
    n_diverged: int
    skipped_updates: int
    stats: dict

    def __getitem__(self, column: str) -> MetricSummary:
        return self.stats[column]


def summarize(metrics: list[RunMetrics]) -> Summary:
    """Mean, median and quartiles of the per-run averages over non-diverged runs."""
    if not metrics:
        raise ValueError("summarize needs at least one run")
    kept = [m for m in metrics if not m.diverged]
    stats = {}
    for column, name in METRIC_COLUMNS:
        values = np.array([m.mean(name) for m in kept])
        if values.size:
            q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
            stats[column] = MetricSummary(float(values.mean()), float(median), float(q1), float(q3))
        else:
            stats[column] = MetricSummary(math.nan, math.nan, math.nan, math.nan)
    return Summary(
        n_runs=len(metrics),
        n_diverged=len(metrics) - len(kept),
        skipped_updates=sum(m.skipped_updates for m in metrics),
        stats=stats,
    )


CONVERGED_DEG = 5.0
CONVERGED_WINDOW = 5.0


def converged(m: RunMetrics, duration: float, threshold_deg: float = CONVERGED_DEG,
              window: float = CONVERGED_WINDOW) -> bool:
    """Not diverged, and mean orientation error over the last ``window`` seconds below threshold."""
    if m.diverged:
        return False
    tail = m.window_mean("rot", duration - window)
    return bool(np.isfinite(tail) and tail < math.radians(threshold_deg))


def truth_trace(config: MonteCarloConfig) -> dict:
    """Truth sampled on the recorded IMU ticks, in the same layout as ``RunMetrics.trace``."""
    traj = trajectory_for(config.wave)
    n = int(round(config.duration * config.schedule.imu_rate)) + 1
    stride = max(config.record_stride, 1)
    times = sample_times(n, config.schedule.imu_rate)[::stride]
    out = {k: [] for k in ("t", "roll", "pitch", "yaw", "x", "y", "z")}
    for t in times:
        s = traj.state_at(t)
        out["t"].append(t)
        for k, v in zip(("roll", "pitch", "yaw"), s.euler):
            out[k].append(v)
        for k, v in zip(("x", "y", "z"), s.pose.p):
            out[k].append(v)
    return {k: np.array(v) for k, v in out.items()}
