"""Experiment configuration: a YAML document mapped onto frozen dataclasses.

Every key is optional and falls back to the dataclass default. Unknown keys,
wrong types and invalid values raise :class:`ConfigError` naming the key path
and, when available, the line in the file.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .horizon import CameraIntrinsics, HorizonGeometry
from .sim.montecarlo import (
    FILTERS,
    NOMINAL_INIT,
    FilterTuning,
    InitNoise,
    MonteCarloConfig,
    parse_mode,
)
from .sim.sensors import SensorSchedule
from .sim.trajectory import WaveParams


@dataclass(frozen=True)
class ExperimentSection:
    """One experiment: which ``filter:mode`` variants to run and how."""

    variants: tuple = ()
    n_runs: int = 50
    duration: float = 30.0
    init_noise: InitNoise = field(default_factory=InitNoise)
    record_stride: int = 0
    compute_nees: bool = False

    def __post_init__(self):
        if isinstance(self.n_runs, bool) or not isinstance(self.n_runs, int) or self.n_runs < 1:
            raise ValueError("n_runs must be a positive integer")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.record_stride < 0:
            raise ValueError("record_stride must be non-negative")
        for v in self.variants:
            split_variant(v)


@dataclass(frozen=True)
class ReplaySection:
    filter: str = "inekf"
    mode: typing.Optional[str] = None
    init_noise: InitNoise = field(default_factory=lambda: NOMINAL_INIT)

    def __post_init__(self):
        if self.filter not in FILTERS:
            raise ValueError(f"filter must be one of {FILTERS}")
        if self.mode is not None:
            parse_mode(self.mode)


def _montecarlo_default() -> ExperimentSection:
    return ExperimentSection(
        variants=("inekf:partial-30Hz", "mekf:partial-30Hz", "inekf:reconstructed-full-1Hz"),
        n_runs=50,
        duration=30.0,
        init_noise=NOMINAL_INIT,
    )


def _convergence_default() -> ExperimentSection:
    return ExperimentSection(
        variants=("inekf:partial-6Hz", "mekf:partial-6Hz", "inekf:no-rollpitch", "mekf:no-rollpitch"),
        n_runs=100,
        duration=10.0,
        init_noise=InitNoise(),
        record_stride=10,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    workers: int = 1
    output_dir: str = "results"
    divergence_xy: float = 1e3
    pairing_window: float = 0.5
    sensors: SensorSchedule = field(default_factory=SensorSchedule)
    trajectory: WaveParams = field(default_factory=WaveParams)
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    horizon: HorizonGeometry = field(default_factory=HorizonGeometry)
    filter: FilterTuning = field(default_factory=FilterTuning)
    montecarlo: ExperimentSection = field(default_factory=_montecarlo_default)
    convergence: ExperimentSection = field(default_factory=_convergence_default)
    replay: ReplaySection = field(default_factory=ReplaySection)

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if not self.divergence_xy > 0:
            raise ValueError("divergence_xy must be positive")

    def run_config(self, section: ExperimentSection, **overrides) -> MonteCarloConfig:
        cfg = MonteCarloConfig(
            n_runs=section.n_runs,
            seed=self.seed,
            duration=section.duration,
            init_noise=section.init_noise,
            schedule=self.sensors,
            wave=self.trajectory,
            tuning=self.filter,
            camera=self.camera,
            geometry=self.horizon,
            divergence_xy=self.divergence_xy,
            pairing_window=self.pairing_window,
            compute_nees=section.compute_nees,
            record_stride=section.record_stride,
            workers=self.workers,
        )
        return dataclasses.replace(cfg, **overrides) if overrides else cfg


def split_variant(variant: str) -> tuple[str, str]:
    """``'inekf:partial-30Hz'`` -> ``('inekf', 'partial-30Hz')``."""
    filt, sep, mode = variant.partition(":")
    if not sep or filt not in FILTERS:
        raise ValueError(f"variant {variant!r} must look like '<inekf|mekf>:<mode>'")
    parse_mode(mode)
    return filt, mode


# ---------------------------------------------------------------------------
# Loading


def _node_to_python(node, path: str, lines: dict):
    """Convert a composed YAML node, recording the line of every key path."""
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            sub = f"{path}.{key}" if path else key
            if key in out:
                raise ConfigError(f"line {key_node.start_mark.line + 1}: duplicate key {sub!r}")
            out[key] = _node_to_python(value_node, sub, lines)
            lines[sub] = key_node.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_node_to_python(v, f"{path}[{i}]", lines) for i, v in enumerate(node.value)]
    return yaml.safe_load(yaml.serialize(node))


def _where(path: str, lines: dict) -> str:
    line = lines.get(path)
    return f"line {line}: {path}" if line else path


def _unwrap_optional(tp):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0], True
    return tp, False


def _coerce(value, tp, path: str, lines: dict):
    tp, optional = _unwrap_optional(tp)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{_where(path, lines)}: value must not be null")
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path, lines)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{_where(path, lines)}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{_where(path, lines)}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{_where(path, lines)}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{_where(path, lines)}: expected a string, got {value!r}")
        return value
    if tp is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{_where(path, lines)}: expected a list, got {value!r}")
        return tuple(value)
    return value


def _build(cls, data, path: str, lines: dict):
    if not isinstance(data, dict):
        raise ConfigError(f"{_where(path, lines)}: expected a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"{_where(sub, lines)}: unknown key (allowed: {', '.join(sorted(names))})")
        kwargs[key] = _coerce(value, hints[key], sub, lines)
    if cls is ExperimentSection and path in ("montecarlo", "convergence"):
        base = _montecarlo_default() if path == "montecarlo" else _convergence_default()
        try:
            return dataclasses.replace(base, **kwargs)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{_where(path, lines)}: {exc}") from None
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{_where(path or '<root>', lines)}: {exc}") from None


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{source}: {line}{exc.problem}") from None
    if node is None:
        return ExperimentConfig()
    lines: dict = {}
    data = _node_to_python(node, "", lines)
    try:
        return _build(ExperimentConfig, data, "", lines)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def config_to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: config_to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [config_to_dict(v) for v in obj]
    return obj


def dump_config(cfg: ExperimentConfig) -> str:
    """YAML text of the effective configuration, with every default spelled out."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=False)
