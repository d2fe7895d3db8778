"""Stance balance control: task-space PD wrench, actuation-aware GRF
distribution QP, stance joint torques, and stance/swing torque blending.

The controller treats the torso as a floating rigid body.  A diagonal PD law
on CoM position and yaw-pitch-roll orientation (plus gravity feedforward)
produces a desired net wrench; a strictly convex QP distributes it over the
active contact points subject to motor torque limits (speed-dependent,
mapped through the actuation topology), a friction pyramid, and no ground
pulling.  The previous solution regularizes the new one, acting as a filter
on the commanded GRFs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import qpsolver, robot
from .errors import ContractViolation, GimbalLockError, InvalidInput
from .qpsolver import INFEASIBLE, MAX_ITER, OPTIMAL
from .reference import Side
from .robot import ContactId, LegJointState, RobotParams
from .sim import SrbState, Wrench, hat

_GIMBAL_MARGIN = 1e-3

# Indices of posture-controlled joints: hip yaw and ankle pitch.
_POSTURE_JOINTS = (0, 4)


def euler_zyx_from_rot(rot) -> np.ndarray:
    """(roll, pitch, yaw) with R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    rot = np.asarray(rot, dtype=float).reshape(3, 3)
    sp = -rot[2, 0]
    if abs(sp) >= 1.0 - 1e-12:
        raise GimbalLockError(f"pitch at +/-90 deg (sin pitch = {sp:.6f})")
    pitch = math.asin(sp)
    roll = math.atan2(rot[2, 1], rot[2, 2])
    yaw = math.atan2(rot[1, 0], rot[0, 0])
    return np.array([roll, pitch, yaw])


def euler_rate_matrix(theta) -> np.ndarray:
    """E such that omega_world = E @ [roll_dot, pitch_dot, yaw_dot]."""
    roll, pitch, yaw = theta
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    # Columns: roll axis after yaw+pitch, pitch axis after yaw, yaw axis.
    return np.array(
        [
            [cy * cp, -sy, 0.0],
            [sy * cp, cy, 0.0],
            [-sp, 0.0, 1.0],
        ]
    )


@dataclass(frozen=True)
class TaskSpaceState:
    """Floating-base pose/twist as [p, (roll, pitch, yaw)] and its rate."""

    q_s: np.ndarray  # (6,)
    qdot_s: np.ndarray  # (6,)

    def __post_init__(self):
        q = np.asarray(self.q_s, dtype=float).reshape(6)
        qd = np.asarray(self.qdot_s, dtype=float).reshape(6)
        if abs(q[4]) >= math.pi / 2 - _GIMBAL_MARGIN:
            raise GimbalLockError(f"pitch {q[4]:.4f} rad within gimbal margin")
        object.__setattr__(self, "q_s", q)
        object.__setattr__(self, "qdot_s", qd)


def task_state_from_srb(state: SrbState) -> TaskSpaceState:
    theta = euler_zyx_from_rot(state.rot_r)
    omega_world = state.rot_r @ state.omega_body
    theta_dot = np.linalg.solve(euler_rate_matrix(theta), omega_world)
    return TaskSpaceState(
        q_s=np.concatenate([state.p, theta]),
        qdot_s=np.concatenate([state.pdot, theta_dot]),
    )


def task_state_target(
    com, com_vel=(0.0, 0.0, 0.0), theta=(0.0, 0.0, 0.0), theta_dot=(0.0, 0.0, 0.0)
) -> TaskSpaceState:
    return TaskSpaceState(
        q_s=np.concatenate([np.asarray(com, dtype=float), np.asarray(theta, dtype=float)]),
        qdot_s=np.concatenate(
            [np.asarray(com_vel, dtype=float), np.asarray(theta_dot, dtype=float)]
        ),
    )


@dataclass(frozen=True)
class PdGains:
    kp: np.ndarray  # (6,) diagonal
    kd: np.ndarray  # (6,) diagonal

    def __post_init__(self):
        kp = np.asarray(self.kp, dtype=float).reshape(6)
        kd = np.asarray(self.kd, dtype=float).reshape(6)
        if np.any(kp < 0.0) or np.any(kd < 0.0):
            raise InvalidInput("PD gains must be non-negative")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)


def desired_wrench(
    state: TaskSpaceState,
    desired: TaskSpaceState,
    gains: PdGains,
    params: RobotParams,
) -> Wrench:
    """PD wrench toward the desired pose plus weight-support feedforward."""
    w6 = gains.kp * (desired.q_s - state.q_s) + gains.kd * (desired.qdot_s - state.qdot_s)
    force = w6[:3] + np.array([0.0, 0.0, params.mass_m * params.gravity_g])
    return Wrench(force_f=force, torque_tau=w6[3:])


@dataclass(frozen=True)
class QpProblem:
    """Force-distribution instance over stacked per-contact GRF variables."""

    contact_ids: tuple
    contact_rel_com: np.ndarray  # (n_c, 3) world-frame lever arms
    f_desired: Wrench
    f0: np.ndarray  # (3 n_c,) previous GRFs (stacked, world frame)
    motor_rows: np.ndarray  # (n_m, 3 n_c) rows of J_MJ^T J_JT^T R^T
    tau_m: np.ndarray  # (n_m,) motor torque bounds
    friction_mu: float
    weight_mg: float
    w1: float = 1.0
    w2: float = 1e-3

    def __post_init__(self):
        if self.w1 <= 0.0 or self.w2 <= 0.0:
            raise InvalidInput("QP weights must be > 0")
        if len(self.contact_ids) < 1:
            raise InvalidInput("force distribution needs at least one contact")


def build_qp_problem(
    contact_ids: Sequence[ContactId],
    contact_world: dict,
    com: np.ndarray,
    rot_r: np.ndarray,
    legs: dict,
    f_desired: Wrench,
    f0: Optional[np.ndarray],
    params: RobotParams,
    w1: float = 1.0,
    w2: float = 1e-3,
) -> QpProblem:
    """Assemble the QP data for the active contacts.

    ``contact_world`` maps ContactId -> world position; ``legs`` maps Side ->
    LegJointState for every side with an active contact.  Motor-limit rows
    couple the contacts of a leg, since their torque contributions add on
    the same joints.
    """
    ids = tuple(contact_ids)
    n = 3 * len(ids)
    com = np.asarray(com, dtype=float).reshape(3)
    rel = np.array([np.asarray(contact_world[c], dtype=float) - com for c in ids])
    rows = []
    bounds = []
    for side in (Side.LEFT, Side.RIGHT):
        owned = [i for i, c in enumerate(ids) if c.side is side]
        if not owned:
            continue
        leg = legs[side]
        block = np.zeros((5, n))
        for i in owned:
            jac = robot.contact_jacobian(leg, side, ids[i], params)
            block[:, 3 * i : 3 * i + 3] = (
                params.topology_jmj.T @ jac.T @ np.asarray(rot_r, dtype=float).T
            )
        rows.append(block)
        bounds.append(robot.motor_torque_limits(leg, params))
    motor_rows = np.vstack(rows) if rows else np.zeros((0, n))
    tau_m = np.concatenate(bounds) if bounds else np.zeros(0)
    return QpProblem(
        contact_ids=ids,
        contact_rel_com=rel,
        f_desired=f_desired,
        f0=np.zeros(n) if f0 is None else np.asarray(f0, dtype=float).reshape(n),
        motor_rows=motor_rows,
        tau_m=tau_m,
        friction_mu=params.friction_mu,
        weight_mg=params.mass_m * params.gravity_g,
        w1=w1,
        w2=w2,
    )


def wrench_matrix(problem: QpProblem) -> np.ndarray:
    """A mapping stacked GRFs to the net wrench: rows [sum f; sum r x f]."""
    n_c = len(problem.contact_ids)
    a = np.zeros((6, 3 * n_c))
    for i in range(n_c):
        a[:3, 3 * i : 3 * i + 3] = np.eye(3)
        a[3:, 3 * i : 3 * i + 3] = hat(problem.contact_rel_com[i])
    return a


def problem_matrices(problem: QpProblem):
    """(P, q, G, h) of min w1 |A f - F_d|^2 + w2 |f - f0|^2 s.t. G f <= h."""
    a = wrench_matrix(problem)
    n = a.shape[1]
    n_c = len(problem.contact_ids)
    fd6 = np.concatenate([problem.f_desired.force_f, problem.f_desired.torque_tau])
    p = 2.0 * (problem.w1 * a.T @ a + problem.w2 * np.eye(n))
    q = -2.0 * (problem.w1 * a.T @ fd6 + problem.w2 * problem.f0)
    mu = problem.friction_mu
    rows = []
    rhs = []
    for i in range(n_c):
        for tang, sgn in ((0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0)):
            r = np.zeros(n)
            r[3 * i + tang] = sgn
            r[3 * i + 2] = -mu
            rows.append(r)
            rhs.append(0.0)
        r = np.zeros(n)
        r[3 * i + 2] = -1.0  # no pulling on the ground
        rows.append(r)
        rhs.append(0.0)
    g = np.array(rows)
    h = np.array(rhs)
    if problem.motor_rows.shape[0]:
        g = np.vstack([g, problem.motor_rows, -problem.motor_rows])
        h = np.concatenate([h, problem.tau_m, problem.tau_m])
    return p, q, g, h


@dataclass
class QpSolution:
    grfs: dict  # ContactId -> (3,) world-frame GRF
    x: np.ndarray  # stacked solution
    kkt_residual: float
    active_constraints: tuple
    status: str
    iterations: int = 0

    @property
    def fallback(self) -> bool:
        return self.status != OPTIMAL


def solve_force_distribution(problem: QpProblem, warm_start: Sequence[int] = ()) -> QpSolution:
    """Distribute the desired wrench over the active contacts.

    Infeasible data falls back to an even vertical weight split with zero
    tangentials (flagged); an iteration-capped solve returns its best
    feasible iterate (flagged).
    """
    p, q, g, h = problem_matrices(problem)
    res = qpsolver.solve_qp(p, q, g, h, warm_start=warm_start)
    n_c = len(problem.contact_ids)
    if res.status == INFEASIBLE:
        x = np.zeros(3 * n_c)
        x[2::3] = problem.weight_mg / n_c
        grfs = {c: x[3 * i : 3 * i + 3] for i, c in enumerate(problem.contact_ids)}
        return QpSolution(
            grfs=grfs,
            x=x,
            kkt_residual=float("inf"),
            active_constraints=(),
            status=INFEASIBLE,
            iterations=res.iterations,
        )
    report = qpsolver.kkt_residuals(p, q, g, h, res.x, res.active_set)
    grfs = {c: res.x[3 * i : 3 * i + 3].copy() for i, c in enumerate(problem.contact_ids)}
    return QpSolution(
        grfs=grfs,
        x=res.x,
        kkt_residual=report.max_residual,
        active_constraints=res.active_set,
        status=res.status,
        iterations=res.iterations,
    )


@dataclass(frozen=True)
class PostureGains:
    kp: float = 30.0
    kd: float = 1.0
    q_nominal: np.ndarray = field(default_factory=lambda: np.zeros(5))


def stance_torques(
    solution: QpSolution,
    jacobians: dict,
    rot_r: np.ndarray,
    leg: LegJointState,
    posture: PostureGains,
) -> np.ndarray:
    """Joint torques realizing the leg's share of the GRFs, plus posture PD
    on hip yaw and ankle pitch (the joints the GRF map leaves slack)."""
    if solution.status == INFEASIBLE:
        raise ContractViolation("stance torques require a usable force solution")
    rot_t = np.asarray(rot_r, dtype=float).reshape(3, 3).T
    tau = np.zeros(5)
    for cid, jac in jacobians.items():
        f = solution.grfs.get(cid)
        if f is not None:
            tau += jac.T @ (rot_t @ f)
    tau_po = np.zeros(5)
    for j in _POSTURE_JOINTS:
        tau_po[j] = posture.kp * (posture.q_nominal[j] - leg.q_j[j]) - posture.kd * leg.qdot_j[j]
    return tau + tau_po


def sigmoid_blend_factor(t: float, duration: float) -> float:
    """Logistic blend: 0.01 at t=0 and 0.99 at t=duration."""
    if duration <= 0.0:
        raise ContractViolation(f"blend duration must be > 0, got {duration}")
    k = 2.0 * math.log(99.0) / duration
    return 1.0 / (1.0 + math.exp(-k * (t - 0.5 * duration)))


def blend(tau_old, tau_new, time_since_transition: float, blend_duration: float) -> np.ndarray:
    s = sigmoid_blend_factor(time_since_transition, blend_duration)
    return s * np.asarray(tau_new, dtype=float) + (1.0 - s) * np.asarray(tau_old, dtype=float)
