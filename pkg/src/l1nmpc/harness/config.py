"""Scenario configuration: YAML files merged over the reference config."""
import copy
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from ..disturbance import ParamMismatch, WindField
from ..errors import ConfigError, L1NMPCError
from ..l1_adaptive import L1Config
from ..nmpc import OcpConfig
from ..rigid_body import VehicleParams
from ..trajectory import CircleSpec, CircleTrajectory, HoverTrajectory, load_track

CONTROLLERS = ("nmpc", "nmpc_i", "l1_nmpc")
TRAJECTORY_TYPES = ("circle", "hover", "track")


def default_dict():
    text = resources.files("l1nmpc").joinpath("configs/default.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class TrajectoryConfig:
    kind: str
    circle: CircleSpec
    hover_point: tuple
    hover_duration: float
    track_path: str = None

    def build(self, params):
        if self.kind == "circle":
            return CircleTrajectory(self.circle, params)
        if self.kind == "hover":
            return HoverTrajectory(self.hover_point, self.hover_duration, params)
        return load_track(self.track_path, params)


@dataclass(frozen=True)
class ScenarioConfig:
    nominal_params: VehicleParams
    mismatch: ParamMismatch
    wind: WindField
    trajectory: TrajectoryConfig
    controller: str
    ocp: OcpConfig
    l1: L1Config
    sim_dt: float
    control_dt: float
    measurement_noise_std: tuple
    seed: int
    crash_distance: float
    ground_altitude: float = None
    name: str = "scenario"
    raw: dict = field(default=None, compare=False, repr=False)

    @property
    def substeps(self):
        return int(round(self.control_dt / self.sim_dt))

    def with_controller(self, controller):
        if controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {controller!r}")
        return replace(self, controller=controller)

    def with_speed(self, v_peak):
        circle = replace(self.trajectory.circle, v_peak=float(v_peak))
        return replace(self, trajectory=replace(self.trajectory, circle=circle))

    def with_mismatch(self, **changes):
        return replace(self, mismatch=replace(self.mismatch, **changes))


def scenario_from_dict(d, name="scenario", base_dir=None):
    """Build a validated :class:`ScenarioConfig` from a (partial) mapping."""
    merged = _merge(default_dict(), d)
    try:
        params = VehicleParams(**merged["vehicle"])
        mismatch = ParamMismatch(**merged["mismatch"])
        wind = WindField(**merged["wind"])
        tr = merged["trajectory"]
        if tr["type"] not in TRAJECTORY_TYPES:
            raise ConfigError(f"unknown trajectory type {tr['type']!r}")
        track_path = tr["track"]["path"]
        if tr["type"] == "track":
            if not track_path:
                raise ConfigError("track trajectory needs trajectory.track.path")
            if base_dir is not None and not Path(track_path).is_absolute():
                track_path = str(Path(base_dir) / track_path)
        trajectory = TrajectoryConfig(
            kind=tr["type"], circle=CircleSpec(**tr["circle"]),
            hover_point=tuple(float(v) for v in tr["hover"]["point"]),
            hover_duration=float(tr["hover"]["duration"]), track_path=track_path)
        if trajectory.kind == "track":
            trajectory.build(params)  # surface parse errors at load time
        controller = merged["controller"]
        if controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {controller!r}")
        ocp = OcpConfig(**merged["ocp"])
        l1 = L1Config(**merged["l1"])
        sim = merged["sim"]
        sim_dt, control_dt = float(sim["sim_dt"]), float(sim["control_dt"])
        if not (sim_dt > 0 and control_dt > 0):
            raise ConfigError("time steps must be positive")
        ratio = control_dt / sim_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("control_dt must be an integer multiple of sim_dt")
        noise = np.broadcast_to(np.asarray(sim["measurement_noise_std"], dtype=float), (13,))
        if np.any(noise < 0):
            raise ConfigError("measurement noise std must be non-negative")
        return ScenarioConfig(
            nominal_params=params, mismatch=mismatch, wind=wind, trajectory=trajectory,
            controller=controller, ocp=ocp, l1=l1, sim_dt=sim_dt, control_dt=control_dt,
            measurement_noise_std=tuple(noise.tolist()), seed=int(sim["seed"]),
            crash_distance=float(sim["crash_distance"]),
            ground_altitude=None if sim["ground_altitude"] is None else float(sim["ground_altitude"]),
            name=name, raw=merged)
    except ConfigError:
        raise
    except (L1NMPCError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path):
    """Read a scenario file. Unreadable files raise ``OSError``, bad content ``ConfigError``."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    name = data.pop("name", path.stem)
    return scenario_from_dict(data, name=name, base_dir=path.parent)


def default_scenario(**overrides):
    return scenario_from_dict(overrides)
