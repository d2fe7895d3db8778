"""Parametric biped description: mass properties, leg kinematics, Jacobians,
and speed-dependent motor torque limits.

The morphology is deliberately simple: a single rigid torso with two 5-DoF
serial legs (hip yaw, hip roll, hip pitch, knee, ankle pitch) and line feet
with contact points at toe and heel.  Parallel-actuation effects are folded
into a constant topology matrix mapping joint velocities to motor velocities
(identity by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import yaml

from .errors import InvalidInput
from .reference import Side

# Joint order within one leg, used everywhere a 5-vector appears.
JOINT_NAMES = ("hip_yaw", "hip_roll", "hip_pitch", "knee", "ankle_pitch")

_DEFAULT_JOINT_LIMITS = (
    (-0.5, 0.5),  # hip_yaw
    (-0.6, 0.6),  # hip_roll
    (-1.7, 1.7),  # hip_pitch
    (-0.05, 2.5),  # knee
    (-1.2, 1.2),  # ankle_pitch
)


def _default_inertia() -> np.ndarray:
    # Torso treated as a 15.8 kg box roughly 0.2 x 0.3 x 0.4 m.
    return np.diag([0.25, 0.30, 0.15])


@dataclass(frozen=True)
class RobotParams:
    mass_m: float = 15.8
    inertia_body: np.ndarray = field(default_factory=_default_inertia)
    com_height_nominal: float = 0.5
    hip_offset_y: float = 0.09
    hip_offset_z: float = -0.05  # hips sit below the CoM so nominal stance has knee bend
    thigh_len: float = 0.25
    shank_len: float = 0.25
    foot_half_len: float = 0.05
    friction_mu: float = 0.7
    motor_tau_stall: float = 60.0
    motor_speed_at_zero_torque: float = 25.0
    joint_limits: tuple = _DEFAULT_JOINT_LIMITS
    topology_jmj: np.ndarray = field(default_factory=lambda: np.eye(5))
    gravity_g: float = 9.81

    def __post_init__(self):
        if self.mass_m <= 0.0:
            raise InvalidInput(f"mass_m must be > 0, got {self.mass_m}")
        inertia = np.asarray(self.inertia_body, dtype=float)
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, atol=1e-12):
            raise InvalidInput("inertia_body must be a symmetric 3x3 matrix")
        if np.any(np.linalg.eigvalsh(inertia) <= 0.0):
            raise InvalidInput("inertia_body must be positive definite")
        if self.friction_mu <= 0.0:
            raise InvalidInput(f"friction_mu must be > 0, got {self.friction_mu}")
        if self.thigh_len <= 0.0 or self.shank_len <= 0.0:
            raise InvalidInput("link lengths must be > 0")
        object.__setattr__(self, "inertia_body", inertia)
        object.__setattr__(self, "topology_jmj", np.asarray(self.topology_jmj, dtype=float))

    @property
    def leg_reach(self) -> float:
        return self.thigh_len + self.shank_len

    def hip_position_torso(self, side: Side) -> np.ndarray:
        sgn = 1.0 if side is Side.LEFT else -1.0
        return np.array([0.0, sgn * self.hip_offset_y, self.hip_offset_z])


class ContactId(Enum):
    LEFT_TOE = "left_toe"
    LEFT_HEEL = "left_heel"
    RIGHT_TOE = "right_toe"
    RIGHT_HEEL = "right_heel"

    @property
    def side(self) -> Side:
        return Side.LEFT if self in (ContactId.LEFT_TOE, ContactId.LEFT_HEEL) else Side.RIGHT

    @property
    def is_toe(self) -> bool:
        return self in (ContactId.LEFT_TOE, ContactId.RIGHT_TOE)


@dataclass
class ContactPoint:
    id: ContactId
    position_world: np.ndarray
    active: bool = False


@dataclass(frozen=True)
class LegJointState:
    q_j: np.ndarray  # (5,) joint angles, JOINT_NAMES order
    qdot_j: np.ndarray  # (5,) joint velocities

    def __post_init__(self):
        q = np.asarray(self.q_j, dtype=float).reshape(5)
        qd = np.asarray(self.qdot_j, dtype=float).reshape(5)
        object.__setattr__(self, "q_j", q)
        object.__setattr__(self, "qdot_j", qd)


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


@dataclass(frozen=True)
class LegChain:
    """Torso-frame kinematics of one leg: joint frames plus foot geometry."""

    joint_origins: np.ndarray  # (5, 3)
    joint_axes: np.ndarray  # (5, 3)
    ankle: np.ndarray
    toe: np.ndarray
    heel: np.ndarray
    foot_rot: np.ndarray  # 3x3, foot frame in torso frame


def leg_chain(q, side: Side, params: RobotParams) -> LegChain:
    """Serial-chain FK in the torso frame."""
    q = np.asarray(q, dtype=float).reshape(5)
    origins = np.zeros((5, 3))
    axes = np.zeros((5, 3))
    o = params.hip_position_torso(side)
    rot = np.eye(3)
    # hip yaw (z), hip roll (x), hip pitch (y) share the hip origin
    origins[0] = o
    axes[0] = rot[:, 2]
    rot = rot @ _rot_z(q[0])
    origins[1] = o
    axes[1] = rot[:, 0]
    rot = rot @ _rot_x(q[1])
    origins[2] = o
    axes[2] = rot[:, 1]
    rot = rot @ _rot_y(q[2])
    knee_o = o + rot @ np.array([0.0, 0.0, -params.thigh_len])
    origins[3] = knee_o
    axes[3] = rot[:, 1]
    rot = rot @ _rot_y(q[3])
    ankle = knee_o + rot @ np.array([0.0, 0.0, -params.shank_len])
    origins[4] = ankle
    axes[4] = rot[:, 1]
    rot = rot @ _rot_y(q[4])
    toe = ankle + rot @ np.array([params.foot_half_len, 0.0, 0.0])
    heel = ankle + rot @ np.array([-params.foot_half_len, 0.0, 0.0])
    return LegChain(
        joint_origins=origins, joint_axes=axes, ankle=ankle, toe=toe, heel=heel, foot_rot=rot
    )


@dataclass(frozen=True)
class FootFrame:
    """World-frame foot geometry returned by forward kinematics."""

    ankle: np.ndarray
    toe: np.ndarray
    heel: np.ndarray
    rot: np.ndarray


def forward_kinematics(
    torso_pos, torso_rot, leg: LegJointState, side: Side, params: RobotParams
) -> FootFrame:
    """World positions of ankle/toe/heel and the foot rotation."""
    torso_pos = np.asarray(torso_pos, dtype=float).reshape(3)
    torso_rot = np.asarray(torso_rot, dtype=float).reshape(3, 3)
    ch = leg_chain(leg.q_j, side, params)
    return FootFrame(
        ankle=torso_pos + torso_rot @ ch.ankle,
        toe=torso_pos + torso_rot @ ch.toe,
        heel=torso_pos + torso_rot @ ch.heel,
        rot=torso_rot @ ch.foot_rot,
    )


@dataclass(frozen=True)
class IkResult:
    joints: LegJointState
    saturated: bool  # target was clamped to the reachable workspace or joint limits


def leg_ik(
    foot_target_rel_torso,
    side: Side,
    params: RobotParams,
    torso_pitch: float = 0.0,
) -> IkResult:
    """Closed-form IK for the ankle point.

    Hip yaw is held at zero; hip roll tilts the leg plane onto the target,
    hip pitch + knee solve the planar two-link problem, and ankle pitch
    levels the foot sole (compensating torso_pitch when provided).
    Unreachable targets are clamped to the workspace boundary and flagged.
    """
    target = np.asarray(foot_target_rel_torso, dtype=float).reshape(3)
    d = target - params.hip_position_torso(side)
    saturated = False

    roll = math.atan2(d[1], -d[2])
    # Rotate the target into the leg plane: planar coords (x, z').
    xp = d[0]
    zp = -math.sin(roll) * d[1] + math.cos(roll) * d[2]
    r = math.hypot(xp, zp)
    t, s = params.thigh_len, params.shank_len
    r_max = (t + s) * (1.0 - 1e-9)
    r_min = abs(t - s) + 1e-9
    if r > r_max or r < r_min:
        r_cl = min(max(r, r_min), r_max)
        if r > 1e-12:
            xp *= r_cl / r
            zp *= r_cl / r
        else:
            xp, zp = 0.0, -r_cl
        r = r_cl
        saturated = True

    cos_knee = (r * r - t * t - s * s) / (2.0 * t * s)
    knee = math.acos(min(max(cos_knee, -1.0), 1.0))
    # Two-link: hip pitch = target direction angle minus shank correction.
    gamma = math.atan2(-xp, -zp)
    beta = math.atan2(s * math.sin(knee), t + s * math.cos(knee))
    hip_pitch = gamma - beta
    ankle_pitch = -(hip_pitch + knee) - torso_pitch

    q = np.array([0.0, roll, hip_pitch, knee, ankle_pitch])
    lo = np.array([l[0] for l in params.joint_limits])
    hi = np.array([l[1] for l in params.joint_limits])
    q_cl = np.clip(q, lo, hi)
    if np.any(np.abs(q_cl - q) > 1e-12):
        saturated = True
    return IkResult(joints=LegJointState(q_j=q_cl, qdot_j=np.zeros(5)), saturated=saturated)


def contact_point_torso(chain: LegChain, contact: ContactId) -> np.ndarray:
    return chain.toe if contact.is_toe else chain.heel


def contact_jacobian(
    leg: LegJointState, side: Side, contact: ContactId, params: RobotParams
) -> np.ndarray:
    """3x5 positional Jacobian of the contact point in the torso frame.

    Joint torques holding a force f (torso frame) applied at the contact are
    J^T f.
    """
    if contact.side is not side:
        raise InvalidInput(f"contact {contact} does not belong to the {side} leg")
    ch = leg_chain(leg.q_j, side, params)
    p = contact_point_torso(ch, contact)
    jac = np.zeros((3, 5))
    for i in range(5):
        jac[:, i] = np.cross(ch.joint_axes[i], p - ch.joint_origins[i])
    return jac


def motor_torque_limits(leg: LegJointState, params: RobotParams) -> np.ndarray:
    """Per-motor torque bounds from a linear torque-speed law.

    tau_i = max(0, tau_stall * (1 - |qdot_m,i| / speed_at_zero_torque)) with
    motor speeds qdot_m = J_MJ @ qdot_j (identity topology by default).
    """
    qdot_m = params.topology_jmj @ leg.qdot_j
    frac = 1.0 - np.abs(qdot_m) / params.motor_speed_at_zero_torque
    return np.maximum(0.0, params.motor_tau_stall * frac)


_SCALAR_PARAM_KEYS = (
    "mass_m",
    "com_height_nominal",
    "hip_offset_y",
    "hip_offset_z",
    "thigh_len",
    "shank_len",
    "foot_half_len",
    "friction_mu",
    "motor_tau_stall",
    "motor_speed_at_zero_torque",
    "gravity_g",
)


def load_robot_params(path) -> RobotParams:
    """Load robot parameters from a key-value YAML file (SI units).

    Recognized keys: the scalar fields of RobotParams, plus ``inertia_diag``
    (3 values) or ``inertia`` (3x3 row-major) and ``joint_limits`` (5 pairs).
    Missing keys keep their defaults; unknown keys are rejected.
    """
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    if not isinstance(raw, dict):
        raise InvalidInput(f"robot params file {path} must be a mapping")
    kwargs = {}
    for key, val in raw.items():
        if key in _SCALAR_PARAM_KEYS:
            kwargs[key] = float(val)
        elif key == "inertia_diag":
            kwargs["inertia_body"] = np.diag(np.asarray(val, dtype=float).reshape(3))
        elif key == "inertia":
            kwargs["inertia_body"] = np.asarray(val, dtype=float).reshape(3, 3)
        elif key == "joint_limits":
            lims = tuple((float(lo), float(hi)) for lo, hi in val)
            if len(lims) != 5:
                raise InvalidInput("joint_limits must list 5 (lo, hi) pairs")
            kwargs["joint_limits"] = lims
        elif key == "topology_jmj":
            kwargs["topology_jmj"] = np.asarray(val, dtype=float).reshape(5, 5)
        else:
            raise InvalidInput(f"unknown robot parameter {key!r}")
    return RobotParams(**kwargs)
