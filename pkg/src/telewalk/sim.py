"""Single-rigid-body plant: torso dynamics under contact wrenches.

The robot is simulated as one rigid body whose only inputs are the ground
reaction forces at active contact points (the legs are treated as massless
force transmitters).  GRFs are applied as commanded; physical validity
(friction, no-pull) is re-checked here and logged as contact violations
rather than enforced, so a misbehaving controller is visible instead of
silently corrected.  Integration is fixed-step RK4 with the rotation handled
as a body-frame rotation-vector increment (exponential map, polar
reprojection each step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidInput, UndefinedCop
from .reference import Side
from .robot import ContactId, RobotParams


@dataclass(frozen=True)
class Wrench:
    force_f: np.ndarray  # world frame [N]
    torque_tau: np.ndarray  # world frame, about the CoM [N·m]

    def __post_init__(self):
        f = np.asarray(self.force_f, dtype=float).reshape(3)
        t = np.asarray(self.torque_tau, dtype=float).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(t))):
            raise InvalidInput("wrench entries must be finite")
        object.__setattr__(self, "force_f", f)
        object.__setattr__(self, "torque_tau", t)


ZERO_WRENCH = Wrench(force_f=np.zeros(3), torque_tau=np.zeros(3))


@dataclass(frozen=True)
class SrbState:
    p: np.ndarray  # CoM position, world [m]
    pdot: np.ndarray  # CoM velocity, world [m/s]
    rot_r: np.ndarray  # body -> world rotation
    omega_body: np.ndarray  # angular velocity, body frame [rad/s]
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).reshape(3))
        object.__setattr__(self, "pdot", np.asarray(self.pdot, dtype=float).reshape(3))
        object.__setattr__(self, "rot_r", np.asarray(self.rot_r, dtype=float).reshape(3, 3))
        object.__setattr__(
            self, "omega_body", np.asarray(self.omega_body, dtype=float).reshape(3)
        )


def upright_state(p=(0.0, 0.0, 0.5), pdot=(0.0, 0.0, 0.0)) -> SrbState:
    return SrbState(p=np.asarray(p), pdot=np.asarray(pdot), rot_r=np.eye(3), omega_body=np.zeros(3))


def hat(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def exp_so3(phi) -> np.ndarray:
    """Rodrigues' formula with a series fallback near zero."""
    phi = np.asarray(phi, dtype=float).reshape(3)
    angle = float(np.linalg.norm(phi))
    k = hat(phi)
    if angle < 1e-8:
        return np.eye(3) + k + 0.5 * (k @ k)
    return (
        np.eye(3)
        + (math.sin(angle) / angle) * k
        + ((1.0 - math.cos(angle)) / angle**2) * (k @ k)
    )


def project_rotation(rot) -> np.ndarray:
    """Nearest rotation matrix (polar projection via SVD), det +1."""
    u, _, vt = np.linalg.svd(np.asarray(rot, dtype=float).reshape(3, 3))
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        u = u.copy()
        u[:, -1] *= -1.0
        r = u @ vt
    return r


def net_wrench(contacts: Iterable[tuple[np.ndarray, np.ndarray]]) -> Wrench:
    """Sum GRFs into a net wrench about the CoM.

    ``contacts`` yields (r_i, f_i): contact position relative to the CoM and
    the GRF, both world frame.
    """
    force = np.zeros(3)
    torque = np.zeros(3)
    for r_i, f_i in contacts:
        r_i = np.asarray(r_i, dtype=float).reshape(3)
        f_i = np.asarray(f_i, dtype=float).reshape(3)
        force += f_i
        torque += np.cross(r_i, f_i)
    return Wrench(force_f=force, torque_tau=torque)


def srbm_derivative(state: SrbState, wrench: Wrench, params: RobotParams):
    """Time derivative (pdot, pddot, omega_body, omega_body_dot).

    pddot = F/m + a_g;  omega_dot = I^-1 (R^T tau - omega x I omega).
    The rotation's evolution (Rdot = R hat(omega)) is handled by the
    integrator through the rotation-vector increment.
    """
    a_g = np.array([0.0, 0.0, -params.gravity_g])
    pddot = wrench.force_f / params.mass_m + a_g
    inertia = params.inertia_body
    tau_body = state.rot_r.T @ wrench.torque_tau
    omega = state.omega_body
    omega_dot = np.linalg.solve(inertia, tau_body - np.cross(omega, inertia @ omega))
    return state.pdot.copy(), pddot, omega.copy(), omega_dot


def integrate(
    state: SrbState,
    wrench_fn: Callable[[SrbState], Wrench],
    dt: float,
    params: RobotParams,
) -> SrbState:
    """One fixed-step RK4 update.

    State for the stages is (p, pdot, phi, omega_body) where phi is the
    body-frame rotation-vector increment from the step's initial attitude:
    R = R0 exp(hat(phi)), phi' = omega + phi x omega / 2 + phi x (phi x
    omega) / 12 (inverse-dexp truncation, exact enough for 4th order).
    """
    if dt <= 0.0:
        raise InvalidInput(f"integrate requires dt > 0, got {dt}")
    r0 = state.rot_r

    def deriv(y):
        p, pdot, phi, omega = y
        st = SrbState(
            p=p, pdot=pdot, rot_r=r0 @ exp_so3(phi), omega_body=omega, time=state.time
        )
        w = wrench_fn(st)
        _, pddot, _, omega_dot = srbm_derivative(st, w, params)
        phi_dot = (
            omega + 0.5 * np.cross(phi, omega) + np.cross(phi, np.cross(phi, omega)) / 12.0
        )
        return pdot, pddot, phi_dot, omega_dot

    y0 = (state.p, state.pdot, np.zeros(3), state.omega_body)
    k1 = deriv(y0)
    k2 = deriv(tuple(a + 0.5 * dt * b for a, b in zip(y0, k1)))
    k3 = deriv(tuple(a + 0.5 * dt * b for a, b in zip(y0, k2)))
    k4 = deriv(tuple(a + dt * b for a, b in zip(y0, k3)))
    p, pdot, phi, omega = (
        a + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(y0, k1, k2, k3, k4)
    )
    rot = project_rotation(r0 @ exp_so3(phi))
    return SrbState(p=p, pdot=pdot, rot_r=rot, omega_body=omega, time=state.time + dt)


class SimDomain(Enum):
    SSP_LEFT = "ssp_left"
    SSP_RIGHT = "ssp_right"
    DSP = "dsp"


_FOOT_CONTACTS = {
    Side.LEFT: (ContactId.LEFT_TOE, ContactId.LEFT_HEEL),
    Side.RIGHT: (ContactId.RIGHT_TOE, ContactId.RIGHT_HEEL),
}


@dataclass(frozen=True)
class ContactSchedule:
    """Which contact points carry force: both feet in DSP, stance foot in SSP."""

    domain: SimDomain
    active: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.domain is SimDomain.DSP:
            expect = frozenset(ContactId)
        elif self.domain is SimDomain.SSP_LEFT:
            expect = frozenset(_FOOT_CONTACTS[Side.LEFT])
        else:
            expect = frozenset(_FOOT_CONTACTS[Side.RIGHT])
        if self.active and frozenset(self.active) != expect:
            raise InvalidInput(f"{self.domain} must activate {sorted(c.value for c in expect)}")
        object.__setattr__(self, "active", expect)

    @property
    def stance_side(self) -> Side:
        if self.domain is SimDomain.SSP_LEFT:
            return Side.LEFT
        if self.domain is SimDomain.SSP_RIGHT:
            return Side.RIGHT
        raise InvalidInput("DSP has no single stance side")


def schedule_for(domain: SimDomain) -> ContactSchedule:
    return ContactSchedule(domain=domain)


def cop(
    contacts: Sequence[np.ndarray], grfs: Sequence[np.ndarray], min_fz: float = 1e-9
) -> np.ndarray:
    """Center of pressure: vertical-force-weighted centroid of the contacts."""
    fz = np.array([np.asarray(f, dtype=float)[2] for f in grfs])
    total = float(fz.sum())
    if total <= min_fz:
        raise UndefinedCop(f"total vertical force {total:.3e} N")
    pts = np.array([np.asarray(c, dtype=float)[:2] for c in contacts])
    return (pts * fz[:, None]).sum(axis=0) / total


def contact_violations(
    grfs: dict, mu: float, tol: float = 1e-9
) -> list[str]:
    """Friction/no-pull checks on commanded GRFs (logged, not enforced)."""
    bad = []
    for cid, f in grfs.items():
        f = np.asarray(f, dtype=float)
        name = cid.value if isinstance(cid, ContactId) else str(cid)
        if f[2] < -tol:
            bad.append(f"{name}: pulling (fz={f[2]:.3e})")
        lim = mu * max(f[2], 0.0) + tol
        if abs(f[0]) > lim or abs(f[1]) > lim:
            bad.append(f"{name}: outside friction pyramid (f={f.round(3)})")
    return bad


def euler_zyx_pitch_roll(rot) -> tuple[float, float]:
    """(roll, pitch) of a rotation under the yaw-pitch-roll convention."""
    rot = np.asarray(rot, dtype=float)
    pitch = -math.asin(min(max(rot[2, 0], -1.0), 1.0))
    roll = math.atan2(rot[2, 1], rot[2, 2])
    return roll, pitch


def has_fallen(state: SrbState, params: RobotParams, tilt_limit: float = 0.6) -> bool:
    """Episode-terminating failure: CoM below half nominal height or tilted
    beyond tilt_limit in roll or pitch."""
    if state.p[2] < 0.5 * params.com_height_nominal:
        return True
    roll, pitch = euler_zyx_pitch_roll(state.rot_r)
    return abs(roll) > tilt_limit or abs(pitch) > tilt_limit
