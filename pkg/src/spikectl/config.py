"""TOML configuration with one section per component."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .arm import ArmModel
from .cerebellum import CBConfig
from .controller import ControlConfig
from .diffmap import DMConfig
from .snn import NeuronParams


@dataclass
class ArmConfig:
    l1: float = 0.24
    l2: float = 0.21
    theta_min_deg: tuple = (-110.0, 60.0)
    theta_max_deg: tuple = (-30.0, 150.0)
    thetadot_max: float = 0.5
    delay: int = 1
    sigma_x: float = 0.0005
    sigma_xdot: float = 0.001

    def __post_init__(self):
        if not 0 <= self.delay <= 10:
            raise ValueError("delay must be within 0..10 cycles")

    def model(self) -> ArmModel:
        return ArmModel(self.l1, self.l2,
                        tuple(float(np.deg2rad(v)) for v in self.theta_min_deg),
                        tuple(float(np.deg2rad(v)) for v in self.theta_max_deg),
                        self.thetadot_max)


@dataclass
class TaskConfig:
    babble_iterations: int = 3000
    train_iterations: int = 10000
    eval_reaches: int = 20
    radial_radius: float = 0.10
    radial_repetitions: tuple = (0, 4, 8)
    contour_radius: float = 0.07
    contour_points: int = 80
    contour_tolerance: float = 0.001
    contour_time_limit_s: float = 1.0
    contour_passes: int = 1
    filter_beta: float = 0.1

    def __post_init__(self):
        counts = (self.babble_iterations, self.train_iterations, self.eval_reaches,
                  self.contour_points, self.contour_passes)
        if min(counts) < 1:
            raise ValueError("iteration and point counts must be positive")
        if self.contour_radius <= 0 or self.radial_radius <= 0:
            raise ValueError("radii must be positive")
        if not 0 < self.filter_beta <= 1:
            raise ValueError("filter_beta must be in (0, 1]")


@dataclass
class Config:
    arm: ArmConfig = field(default_factory=ArmConfig)
    dm: DMConfig = field(default_factory=DMConfig)
    cb: CBConfig = field(default_factory=CBConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    task: TaskConfig = field(default_factory=TaskConfig)


SECTIONS = {"arm": ArmConfig, "dm": DMConfig, "cb": CBConfig,
            "control": ControlConfig, "task": TaskConfig}


def _coerce(cls, values: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, val in values.items():
        if key not in known:
            raise KeyError(f"unknown key {cls.__name__}.{key}")
        if key.endswith("_params"):
            val = NeuronParams(*val) if isinstance(val, list) else NeuronParams(**val)
        elif key == "theta_ranges":
            val = [tuple(map(float, r)) for r in val]
        elif isinstance(val, list):
            val = tuple(val)
        kwargs[key] = val
    return cls(**kwargs)


def from_dict(data: dict) -> Config:
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise KeyError(f"unknown config sections: {sorted(unknown)}")
    return Config(**{name: _coerce(cls, data.get(name, {})) for name, cls in SECTIONS.items()})


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    with open(path, "rb") as fh:
        return from_dict(tomllib.load(fh))


def to_dict(cfg: Config) -> dict:
    """Plain nested dict, suitable for JSON run metadata."""
    def plain(v):
        if isinstance(v, NeuronParams):
            return [v.a, v.b, v.c, v.d]
        if isinstance(v, (list, tuple)):
            return [plain(x) for x in v]
        if isinstance(v, np.generic):
            return v.item()
        return v
    return {name: {f.name: plain(getattr(getattr(cfg, name), f.name))
                   for f in dataclasses.fields(getattr(cfg, name))}
            for name in SECTIONS}
