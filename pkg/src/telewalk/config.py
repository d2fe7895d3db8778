"""Episode configuration: scenario presets, gains, and file loading.

Configs are flat key-value YAML (SI units throughout).  Scenario presets
fill speed segments and duration when the file leaves them out; every key
is overridable.  Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import yaml

from .errors import InvalidInput
from .hlip import HlipParams
from .pilot import ScriptedKind, ScriptedPilotSpec
from .robot import RobotParams, load_robot_params

SCENARIOS = ("stand", "velocity", "backward", "replay")

_SCENARIO_KIND = {
    "stand": ScriptedKind.STAND,
    "velocity": ScriptedKind.VELOCITY_PROFILE,
    "backward": ScriptedKind.BACKWARD,
}


@dataclass(frozen=True)
class EpisodeConfig:
    scenario: str = "stand"
    dt: float = 1e-3
    duration: float = 10.0
    seed: int = 0
    # Scaling: lengths multiply by robot/human CoM height; the calibration
    # factor trims the synthetic pilot's amplitude-to-speed inversion.
    human_com_height: float = 1.0
    speed_calibration: float = 1.0
    replay_path: Optional[str] = None
    robot_params_path: Optional[str] = None
    # Pilot cadence and shape (pilot scale).
    step_period: float = 0.4
    dsp_duration: float = 0.1
    pilot_z_cl: float = 0.08
    feet_width: float = 0.36
    sway_amplitude: Optional[float] = None  # None: follow the stepping rhythm
    noise_z_frac: float = 0.0
    lead_in: float = 1.0
    accel_limit: float = 0.4  # command slew [m/s^2, robot side]
    speed_segments: tuple = ()  # ((duration, speed), ...), robot-side speeds
    # Balance control.
    balance_kp: tuple = (80.0, 120.0, 400.0, 60.0, 80.0, 20.0)
    balance_kd: tuple = (12.0, 18.0, 40.0, 8.0, 10.0, 4.0)
    posture_kp: float = 30.0
    posture_kd: float = 1.0
    qp_w1: float = 1.0
    qp_w2: float = 1e-3
    blend_duration: float = 0.05
    # Swing control.
    swing_kp: tuple = (120.0, 120.0, 160.0, 160.0, 60.0)
    swing_kd: tuple = (8.0, 8.0, 10.0, 10.0, 4.0)
    robot_z_cl: float = 0.04
    # Haptic stand-in law and regression envelope (normalized units).
    haptic_gain: float = 300.0
    haptic_bound: float = 50.0
    dcm_envelope: float = 0.15
    # Online timing estimation.
    t_dsp_smoothing: float = 0.3
    period_smoothing: float = 0.3
    fit_every_ticks: int = 10

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidInput(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.dt <= 0.0:
            raise InvalidInput(f"dt must be > 0, got {self.dt}")
        if self.duration <= 0.0:
            raise InvalidInput(f"duration must be > 0, got {self.duration}")
        if self.human_com_height <= 0.0:
            raise InvalidInput("human_com_height must be > 0")
        if self.scenario == "replay" and not self.replay_path:
            raise InvalidInput("replay scenario requires replay_path")
        object.__setattr__(
            self, "speed_segments", tuple((float(d), float(v)) for d, v in self.speed_segments)
        )
        for name in ("balance_kp", "balance_kd", "swing_kp", "swing_kd"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    def human_params(self) -> HlipParams:
        return HlipParams(
            com_height_h=self.human_com_height,
            t_ssp=self.step_period,
            t_dsp=self.dsp_duration,
        )

    def robot_params(self) -> RobotParams:
        if self.robot_params_path:
            return load_robot_params(self.robot_params_path)
        return RobotParams()

    def length_scale(self, robot: RobotParams) -> float:
        return robot.com_height_nominal / self.human_com_height

    def pilot_spec(self) -> ScriptedPilotSpec:
        if self.scenario == "replay":
            raise InvalidInput("replay scenario has no scripted pilot")
        return ScriptedPilotSpec(
            kind=_SCENARIO_KIND[self.scenario],
            speed_segments=() if self.scenario == "stand" else self.speed_segments,
            step_period=self.step_period,
            dsp_duration=self.dsp_duration,
            z_cl=self.pilot_z_cl,
            feet_width=self.feet_width,
            sway_amplitude=self.sway_amplitude,
            noise_z_frac=self.noise_z_frac,
            lead_in=self.lead_in,
            accel_limit=self.accel_limit,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["speed_segments"] = [list(s) for s in self.speed_segments]
        for name in ("balance_kp", "balance_kd", "swing_kp", "swing_kd"):
            d[name] = list(getattr(self, name))
        return d


_SCENARIO_DEFAULTS = {
    "stand": dict(duration=10.0),
    "velocity": dict(
        speed_segments=((20.0, 0.1), (20.0, 0.2), (20.0, 0.3)),
        duration=63.0,
    ),
    "backward": dict(
        speed_segments=((14.0, -0.25), (12.0, 0.25)),
        duration=28.0,
    ),
    "replay": dict(),
}


def make_config(scenario: str = "stand", **overrides) -> EpisodeConfig:
    """Config from a scenario preset plus explicit overrides."""
    if scenario not in SCENARIOS:
        raise InvalidInput(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    merged = dict(_SCENARIO_DEFAULTS[scenario])
    merged.update(overrides)
    merged["scenario"] = scenario
    return EpisodeConfig(**merged)


def load_episode_config(path) -> EpisodeConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise InvalidInput(f"config root must be a mapping, got {type(raw).__name__}")
    known = {f.name for f in fields(EpisodeConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidInput(f"unknown config keys: {', '.join(unknown)}")
    scenario = raw.pop("scenario", "stand")
    return make_config(scenario, **raw)


def with_overrides(
    config: EpisodeConfig,
    duration: Optional[float] = None,
    seed: Optional[int] = None,
) -> EpisodeConfig:
    """CLI-flag overrides on a loaded config."""
    kw = {}
    if duration is not None:
        kw["duration"] = duration
    if seed is not None:
        kw["seed"] = seed
    return replace(config, **kw) if kw else config
