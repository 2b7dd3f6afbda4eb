"""Experiment configuration loaded from a nested YAML file."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from snakedc.admittance import AdmittanceGains
from snakedc.errors import ConfigurationError
from snakedc.gait import GaitParams
from snakedc.loop import ThresholdSettings, Variant
from snakedc.reactive import ReferenceStrategy
from snakedc.simworld import WorldParams
from snakedc.windows import WindowLayout


@dataclass(frozen=True)
class GaitConfig:
    nominal_amplitude: float = math.pi / 5
    eta: float = 3 * math.pi
    omega: float = math.pi / 2
    kappa: float = 0.0

    def params(self, n_joints: int) -> GaitParams:
        return GaitParams(
            kappa=self.kappa,
            nominal_amplitude=self.nominal_amplitude,
            eta=self.eta,
            omega=self.omega,
            n_joints=n_joints,
        )


@dataclass(frozen=True)
class WindowConfig:
    per_body: int = 3
    slope: float = 50.0
    travelling: bool = True

    def layout(self) -> WindowLayout:
        return WindowLayout.tiled(self.per_body, slope=self.slope, travelling=self.travelling)


@dataclass(frozen=True)
class AdmittanceConfig:
    m_gain: float = 1.0
    # a soft spring lets a window's amplitude move far enough within its lifetime to matter
    b_gain: float = 2.0
    k_gain: float = 1.0
    amp_max: float = math.pi / 2

    def gains(self) -> AdmittanceGains:
        return AdmittanceGains(self.m_gain, self.b_gain, self.k_gain, self.amp_max)


@dataclass(frozen=True)
class ReactiveConfig:
    upper_scale: float = 2.0
    lower_scale: float = -2.0
    exit_scale: float = 1e-3
    mean_periods: float = 1.0
    strategy: str = "remap"

    def thresholds(self) -> ThresholdSettings:
        return ThresholdSettings(
            upper_scale=self.upper_scale,
            lower_scale=self.lower_scale,
            exit_scale=self.exit_scale,
            mean_periods=self.mean_periods,
            strategy=ReferenceStrategy(self.strategy),
        )


@dataclass(frozen=True)
class CalibrationConfig:
    enabled: bool = True
    n_cycles: int = 4
    transient_cycles: int = 1


@dataclass(frozen=True)
class PegConfig:
    density: float = 10.0  # pegs per m^2
    min_spacing: float = 0.2
    extent: float = 30.0  # side of the square array, centred on the origin
    pose_region: float = 4.0  # side of the square initial positions are drawn from
    clearance: float = 0.02  # free gap kept around the initial body


@dataclass(frozen=True)
class TrialConfig:
    position_jitter: float = 0.01  # m, per-trial perturbation of the pose
    heading_jitter: float = 0.02  # rad


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/default"
    telemetry: bool = True
    telemetry_stride: int = 20  # control steps between telemetry records


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str = "DS"
    variants: tuple = ("NC", "NDC", "PDC", "DS")
    master_seed: int = 2019
    n_poses: int = 5
    trials_per_pose: int = 4
    trial_duration: float = 120.0
    control_dt: float = 0.005
    gait: GaitConfig = field(default_factory=GaitConfig)
    windows: WindowConfig = field(default_factory=WindowConfig)
    admittance: AdmittanceConfig = field(default_factory=AdmittanceConfig)
    reactive: ReactiveConfig = field(default_factory=ReactiveConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    world: WorldParams = field(default_factory=WorldParams)
    pegs: PegConfig = field(default_factory=PegConfig)
    trial: TrialConfig = field(default_factory=TrialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(Variant(v).value for v in self.variants))
        object.__setattr__(self, "variant", Variant(self.variant).value)
        if not self.trial_duration > 0:
            raise ConfigurationError(f"trial_duration must be positive, got {self.trial_duration}")
        if not self.control_dt > 0:
            raise ConfigurationError(f"control_dt must be positive, got {self.control_dt}")
        if self.n_poses < 1 or self.trials_per_pose < 1:
            raise ConfigurationError("need at least one pose and one trial per pose")

    def gait_params(self) -> GaitParams:
        return self.gait.params(self.world.n_joints)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["variants"] = list(self.variants)
        return out


_SECTIONS = {
    "gait": GaitConfig,
    "windows": WindowConfig,
    "admittance": AdmittanceConfig,
    "reactive": ReactiveConfig,
    "calibration": CalibrationConfig,
    "world": WorldParams,
    "pegs": PegConfig,
    "trial": TrialConfig,
    "output": OutputConfig,
}


def _build(cls, values: dict, where: str):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigurationError(f"section {where!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")}
    unknown = set(values) - names
    if unknown:
        raise ConfigurationError(f"unknown keys in {where!r}: {sorted(unknown)}")
    return cls(**values)


def config_from_dict(data: dict | None) -> ExperimentConfig:
    data = dict(data or {})
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build(cls, data.pop(name), name)
    top = {f.name for f in dataclasses.fields(ExperimentConfig)} - set(_SECTIONS)
    unknown = set(data) - top
    if unknown:
        raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
    if "variants" in data:
        data["variants"] = tuple(data["variants"])
    try:
        return ExperimentConfig(**data, **kwargs)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path) as fh:
        return config_from_dict(yaml.safe_load(fh))


def dump_config(config: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)
