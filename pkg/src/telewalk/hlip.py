"""Hybrid linear inverted pendulum (H-LIP) primitives.

The pendulum alternates between a single-support phase (SSP), where the
center of mass evolves as an inverted pendulum about the stance foot
(``xdd = omega^2 * x``), and a double-support phase (DSP) where it drifts
at constant velocity.  Transitions are instantaneous reset maps; the step
length enters the dynamics only through the DSP->SSP reset.  Everything
here is closed form, which is what makes the step-to-step (S2S) view and
its deadbeat stepping controller exact.

All quantities are sagittal: x is the CoM position relative to the stance
foot in meters, velocities in m/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ContractViolation, InvalidInput

# Below this, coth() arguments make orbital slopes numerically meaningless.
_MIN_FREQ_TIME_PRODUCT = 1e-6


class Domain(Enum):
    SSP = "ssp"
    DSP = "dsp"


@dataclass(frozen=True)
class HlipParams:
    """Pendulum constants: CoM height, gravity, and nominal phase durations."""

    com_height_h: float
    gravity_g: float = 9.81
    t_ssp: float = 0.4
    t_dsp: float = 0.1

    def __post_init__(self):
        if self.com_height_h <= 0.0:
            raise InvalidInput(f"com_height_h must be > 0, got {self.com_height_h}")
        if self.gravity_g <= 0.0:
            raise InvalidInput(f"gravity_g must be > 0, got {self.gravity_g}")
        if self.t_ssp <= 0.0:
            raise InvalidInput(f"t_ssp must be > 0, got {self.t_ssp}")
        if self.t_dsp < 0.0:
            raise InvalidInput(f"t_dsp must be >= 0, got {self.t_dsp}")

    @property
    def natural_freq_omega(self) -> float:
        # Recomputed on demand so it can never go stale w.r.t. h and g.
        return math.sqrt(self.gravity_g / self.com_height_h)

    def with_timing(self, t_ssp: float | None = None, t_dsp: float | None = None) -> "HlipParams":
        """Copy with overridden phase durations (heights untouched)."""
        return replace(
            self,
            t_ssp=self.t_ssp if t_ssp is None else t_ssp,
            t_dsp=self.t_dsp if t_dsp is None else t_dsp,
        )


@dataclass(frozen=True)
class HlipState:
    """CoM state relative to the stance foot, plus hybrid bookkeeping."""

    x: float
    xdot: float
    domain: Domain = Domain.SSP
    phase_time_t: float = 0.0

    def __post_init__(self):
        if self.phase_time_t < 0.0:
            raise InvalidInput(f"phase_time_t must be >= 0, got {self.phase_time_t}")


@dataclass(frozen=True)
class P1Orbit:
    """A one-step periodic gait, identified by its pre-impact CoM state.

    ``orbital_slope_sigma1`` is the pre-impact xdot/x ratio,
    ``omega * coth(omega * Ts / 2)``; ``nominal_step_length`` is the step
    length that keeps the orbit closed under the owning params' DSP
    duration.
    """

    x_pre: float
    xdot_pre: float
    step_period_ts: float
    orbital_slope_sigma1: float
    nominal_step_length: float


@dataclass(frozen=True)
class S2SMatrices:
    """Linear step-to-step map: pre-impact state k+1 = a @ state_k + b * step."""

    a: np.ndarray
    b: np.ndarray

    def apply(self, pre_impact: np.ndarray, step_length: float) -> np.ndarray:
        return self.a @ np.asarray(pre_impact, dtype=float) + self.b * step_length


def flow_ssp(state: HlipState, params: HlipParams, dt: float) -> HlipState:
    """Advance an SSP state by dt under the closed-form pendulum solution."""
    if state.domain is not Domain.SSP:
        raise ContractViolation(f"flow_ssp requires SSP state, got {state.domain}")
    if dt < 0.0:
        raise ContractViolation(f"flow_ssp requires dt >= 0, got {dt}")
    omega = params.natural_freq_omega
    ch = math.cosh(omega * dt)
    sh = math.sinh(omega * dt)
    x = state.x * ch + (state.xdot / omega) * sh
    xdot = state.x * omega * sh + state.xdot * ch
    return replace(state, x=x, xdot=xdot, phase_time_t=state.phase_time_t + dt)


def flow_dsp(state: HlipState, dt: float) -> HlipState:
    """Advance a DSP state by dt (constant-velocity drift)."""
    if state.domain is not Domain.DSP:
        raise ContractViolation(f"flow_dsp requires DSP state, got {state.domain}")
    if dt < 0.0:
        raise ContractViolation(f"flow_dsp requires dt >= 0, got {dt}")
    return replace(state, x=state.x + state.xdot * dt, phase_time_t=state.phase_time_t + dt)


def reset_s2d(state: HlipState) -> HlipState:
    """SSP -> DSP reset: identity on (x, xdot), phase clock zeroed."""
    if state.domain is not Domain.SSP:
        raise ContractViolation(f"reset_s2d requires SSP state, got {state.domain}")
    return replace(state, domain=Domain.DSP, phase_time_t=0.0)


def reset_d2s(state: HlipState, step_length: float) -> HlipState:
    """DSP -> SSP reset: stance handoff shifts x by the step length."""
    if state.domain is not Domain.DSP:
        raise ContractViolation(f"reset_d2s requires DSP state, got {state.domain}")
    return replace(state, x=state.x - step_length, domain=Domain.SSP, phase_time_t=0.0)


def dcm(state: HlipState, params: HlipParams) -> float:
    """Divergent component of motion, x + xdot/omega."""
    return state.x + state.xdot / params.natural_freq_omega


def orbital_energy(state: HlipState, params: HlipParams) -> float:
    """xdot^2 - omega^2 x^2; conserved along the SSP flow."""
    omega = params.natural_freq_omega
    return state.xdot**2 - (omega * state.x) ** 2


def orbital_slope(step_period_ts: float, params: HlipParams) -> float:
    """Pre-impact xdot/x ratio of the P1 orbit with the given period."""
    omega = params.natural_freq_omega
    if step_period_ts <= 0.0:
        raise InvalidInput(f"step period must be > 0, got {step_period_ts}")
    if step_period_ts * omega / 2.0 < _MIN_FREQ_TIME_PRODUCT:
        raise InvalidInput(
            f"step period {step_period_ts} too short for omega {omega}: orbital slope blows up"
        )
    return omega / math.tanh(omega * step_period_ts / 2.0)


def map_human_to_p1(x_h: float, step_period_ts: float, params: HlipParams) -> P1Orbit:
    """Map a commanded pre-impact DCM value to the matching P1 orbit.

    x_h is the pilot's CoM position along the interface, interpreted as the
    desired end-of-step DCM of the walking reference.  step_period_ts is the
    single-support duration of the orbit: the returned orbit's pre-impact
    DCM equals x_h exactly, and flowing (-x_pre, xdot_pre) through one SSP
    of that duration reproduces the pre-impact state, so the orbit is a
    fixed point of the full hybrid step when params.t_ssp matches.
    """
    sigma1 = orbital_slope(step_period_ts, params)
    omega = params.natural_freq_omega
    x_pre = x_h / (1.0 + sigma1 / omega)
    xdot_pre = omega * (x_h - x_pre)
    nominal_step = 2.0 * x_pre + params.t_dsp * xdot_pre
    return P1Orbit(
        x_pre=x_pre,
        xdot_pre=xdot_pre,
        step_period_ts=step_period_ts,
        orbital_slope_sigma1=sigma1,
        nominal_step_length=nominal_step,
    )


def orbit_is_consistent(orbit: P1Orbit, x_h: float) -> bool:
    """Sign-consistency acceptance rule for a mapped orbit.

    Accept when the commanded DCM and the resulting pre-impact velocity
    agree in direction (or the command is a standstill).  Callers hold the
    previous orbit when this returns False.
    """
    if x_h == 0.0:
        return True
    return orbit.xdot_pre * x_h > 0.0


def s2s_matrices(params: HlipParams) -> S2SMatrices:
    """Step-to-step linearization of one full hybrid step.

    A step runs pre-impact -> S2D reset -> DSP flow (t_dsp) -> D2S reset
    with step-length input -> SSP flow (t_ssp) -> next pre-impact, so the
    map is exact, not a local linearization.
    """
    omega = params.natural_freq_omega
    if params.t_ssp * omega < _MIN_FREQ_TIME_PRODUCT:
        raise InvalidInput(f"t_ssp {params.t_ssp} too short for omega {omega}")
    ch = math.cosh(omega * params.t_ssp)
    sh = math.sinh(omega * params.t_ssp)
    m_ssp = np.array([[ch, sh / omega], [omega * sh, ch]])
    m_dsp = np.array([[1.0, params.t_dsp], [0.0, 1.0]])
    a = m_ssp @ m_dsp
    b = -m_ssp @ np.array([1.0, 0.0])
    return S2SMatrices(a=a, b=b)


def deadbeat_step_length(
    pre_impact: tuple[float, float],
    target: tuple[float, float],
    params: HlipParams,
) -> float:
    """Step length that drives the pre-impact error to zero in two steps.

    The gain coth(t_ssp * omega)/omega places both closed-loop S2S
    eigenvalues at zero, so the feedback is deadbeat for any fixed P1
    target.
    """
    omega = params.natural_freq_omega
    if params.t_ssp * omega < _MIN_FREQ_TIME_PRODUCT:
        raise InvalidInput(f"t_ssp {params.t_ssp} too short for omega {omega}")
    x, xd = pre_impact
    x_t, xd_t = target
    coth = 1.0 / math.tanh(params.t_ssp * omega)
    return x + x_t + params.t_dsp * xd + (coth / omega) * (xd - xd_t)


def step_hybrid(pre_impact: HlipState, step_length: float, params: HlipParams) -> HlipState:
    """Compose the four hybrid stages of one step from a pre-impact state."""
    if pre_impact.domain is not Domain.SSP:
        raise ContractViolation("step_hybrid starts from a pre-impact (SSP) state")
    st = reset_s2d(pre_impact)
    st = flow_dsp(st, params.t_dsp)
    st = reset_d2s(st, step_length)
    return flow_ssp(st, params, params.t_ssp)
