"""Swing-leg control: task-space swing trajectories, IK joint targets, and
joint-space PD torques.

The swing foot follows a half-cosine interpolation from its lift-off
position to the commanded foothold, with a full-cosine vertical clearance
bump that returns to the lift-off height at touch-down.  Targets are
converted to joint space through the closed-form leg IK and tracked with a
diagonal PD law; desired joint velocities come from central finite
differences of the IK targets one tick apart (the legs are massless in the
plant, so no inverse dynamics is needed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from . import robot
from .errors import InvalidInput
from .reference import Side
from .robot import LegJointState, RobotParams

# Per-tick cap on foothold replanning motion [m].  Tunable; keeps mid-swing
# target updates from yanking the leg.
FOOT_TARGET_RATE_LIMIT = 0.02


def clamp_phase(s: float) -> Tuple[float, bool]:
    """Clamp the swing phase to [0, 1]; flags when clamping happened."""
    if 0.0 <= s <= 1.0:
        return float(s), False
    return min(max(float(s), 0.0), 1.0), True


def swing_xy(s: float, p_i_xy, p_f_xy, t_ssp_est: float):
    """Horizontal swing interpolation.

    p(s) = 1/2 [(1 + cos pi s) p_i + (1 - cos pi s) p_f]; the velocity uses
    sdot = 1 / t_ssp_est.  Returns (position, velocity, clamped).
    """
    if t_ssp_est <= 0.0:
        raise InvalidInput(f"t_ssp_est must be > 0, got {t_ssp_est}")
    s, clamped = clamp_phase(s)
    p_i = np.asarray(p_i_xy, dtype=float)
    p_f = np.asarray(p_f_xy, dtype=float)
    c = math.cos(math.pi * s)
    pos = 0.5 * ((1.0 + c) * p_i + (1.0 - c) * p_f)
    vel = 0.5 * math.pi * math.sin(math.pi * s) * (p_f - p_i) / t_ssp_est
    return pos, vel, clamped


def swing_z(s: float, p_i_z: float, z_cl: float, t_ssp_est: float):
    """Vertical clearance bump: z(s) = p_i_z + (z_cl/2)(1 - cos 2 pi s).

    Height returns to p_i_z at s=1 (touch-down) with apex z_cl at s=0.5.
    Returns (height, vertical velocity, clamped).
    """
    if t_ssp_est <= 0.0:
        raise InvalidInput(f"t_ssp_est must be > 0, got {t_ssp_est}")
    if z_cl < 0.0:
        raise InvalidInput(f"z_cl must be >= 0, got {z_cl}")
    s, clamped = clamp_phase(s)
    z = p_i_z + 0.5 * z_cl * (1.0 - math.cos(2.0 * math.pi * s))
    zdot = z_cl * math.pi * math.sin(2.0 * math.pi * s) / t_ssp_est
    return z, zdot, clamped


@dataclass(frozen=True)
class SwingPlan:
    """One swing phase: fixed lift-off point, replannable foothold."""

    side: Side
    p_i: np.ndarray  # (3,) lift-off foot position, fixed for the swing
    p_f_xy: np.ndarray  # (2,) commanded foothold; landing height is p_i[2]
    z_cl: float
    t_ssp_est: float
    start_time: float

    def __post_init__(self):
        object.__setattr__(self, "p_i", np.asarray(self.p_i, dtype=float).reshape(3).copy())
        object.__setattr__(
            self, "p_f_xy", np.asarray(self.p_f_xy, dtype=float).reshape(2).copy()
        )
        if self.z_cl < 0.0:
            raise InvalidInput(f"z_cl must be >= 0, got {self.z_cl}")
        if self.t_ssp_est <= 0.0:
            raise InvalidInput(f"t_ssp_est must be > 0, got {self.t_ssp_est}")

    def phase(self, now: float) -> float:
        return (now - self.start_time) / self.t_ssp_est

    def with_timing(self, t_ssp_est: float) -> "SwingPlan":
        """New plan with an updated duration estimate (phase is recomputed
        against it, so s may jump by the estimator's per-update clamp)."""
        return replace(self, t_ssp_est=t_ssp_est)


def update_foothold(plan: SwingPlan, p_f_new_xy) -> Tuple[SwingPlan, bool]:
    """Move the foothold toward a new target, rate-limited per tick.

    The commanded move is clamped to FOOT_TARGET_RATE_LIMIT in the plane;
    returns (updated plan, True when the clamp engaged).
    """
    target = np.asarray(p_f_new_xy, dtype=float).reshape(2)
    step = target - plan.p_f_xy
    dist = float(np.linalg.norm(step))
    if dist <= FOOT_TARGET_RATE_LIMIT:
        return replace(plan, p_f_xy=target), False
    return replace(plan, p_f_xy=plan.p_f_xy + step * (FOOT_TARGET_RATE_LIMIT / dist)), True


def trajectory_point(plan: SwingPlan, now: float):
    """World-frame swing-foot position/velocity at time ``now``.

    Returns (position (3,), velocity (3,), clamped).
    """
    s = plan.phase(now)
    xy, xy_dot, cl1 = swing_xy(s, plan.p_i[:2], plan.p_f_xy, plan.t_ssp_est)
    z, z_dot, cl2 = swing_z(s, plan.p_i[2], plan.z_cl, plan.t_ssp_est)
    pos = np.array([xy[0], xy[1], z])
    vel = np.array([xy_dot[0], xy_dot[1], z_dot])
    return pos, vel, cl1 or cl2


@dataclass(frozen=True)
class SwingGains:
    kp: np.ndarray  # (5,) diagonal
    kd: np.ndarray  # (5,) diagonal

    def __post_init__(self):
        kp = np.asarray(self.kp, dtype=float).reshape(5)
        kd = np.asarray(self.kd, dtype=float).reshape(5)
        if np.any(kp < 0.0) or np.any(kd < 0.0):
            raise InvalidInput("swing PD gains must be non-negative")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)


@dataclass(frozen=True)
class SwingCommand:
    tau_j: np.ndarray  # (5,)
    q_des: np.ndarray  # (5,)
    qdot_des: np.ndarray  # (5,)
    saturated: bool  # IK clamped somewhere along the FD stencil
    clamped: bool  # phase left [0, 1] somewhere along the FD stencil


def _torso_pitch(torso_rot: np.ndarray) -> float:
    return math.asin(min(1.0, max(-1.0, -float(torso_rot[2, 0]))))


def _ik_targets(plan, t, torso_pos, torso_rot, params):
    pos, _, clamped = trajectory_point(plan, t)
    rel = torso_rot.T @ (pos - torso_pos)
    ik = robot.leg_ik(rel, plan.side, params, torso_pitch=_torso_pitch(torso_rot))
    return ik.joints.q_j, ik.saturated, clamped


def swing_torques(
    plan: SwingPlan,
    now: float,
    torso_pos,
    torso_rot,
    leg: LegJointState,
    gains: SwingGains,
    params: RobotParams,
    tick_dt: float = 1e-3,
) -> SwingCommand:
    """Joint-space PD torques tracking the swing trajectory.

    Desired joint positions come from IK at ``now``; desired velocities from
    a central difference of the IK targets one tick to either side.  IK
    saturation is flagged and the torque still drives toward the clamped
    target.
    """
    if tick_dt <= 0.0:
        raise InvalidInput(f"tick_dt must be > 0, got {tick_dt}")
    torso_pos = np.asarray(torso_pos, dtype=float).reshape(3)
    torso_rot = np.asarray(torso_rot, dtype=float).reshape(3, 3)
    q_des, sat0, cl0 = _ik_targets(plan, now, torso_pos, torso_rot, params)
    q_plus, sat1, cl1 = _ik_targets(plan, now + tick_dt, torso_pos, torso_rot, params)
    q_minus, sat2, cl2 = _ik_targets(plan, now - tick_dt, torso_pos, torso_rot, params)
    qdot_des = (q_plus - q_minus) / (2.0 * tick_dt)
    tau = gains.kp * (q_des - leg.q_j) + gains.kd * (qdot_des - leg.qdot_j)
    return SwingCommand(
        tau_j=tau,
        q_des=q_des,
        qdot_des=qdot_des,
        saturated=sat0 or sat1 or sat2,
        clamped=cl0 or cl1 or cl2,
    )
