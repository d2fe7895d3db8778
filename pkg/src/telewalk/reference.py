"""Walking-reference generation from pilot stepping.

A virtual hybrid pendulum (the "walking reference") is evolved tick by tick,
synchronized to the pilot's gait events: the pilot's touch-downs and
lift-offs drive its domain transitions, the pilot's CoM position sets the
target orbit, and a deadbeat step-length feedback keeps the reference's
pre-impact states converging to that orbit.  The single-support duration is
not known ahead of time, so it is estimated online by fitting the pilot's
swing-foot height to its assumed vertical profile with damped least squares.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import hlip
from .errors import ContractViolation, InvalidInput, NoFitError
from .hlip import Domain, HlipParams, HlipState, P1Orbit

log = logging.getLogger(__name__)

_FIT_MAX_ITERS = 50
_FIT_STEP_TOL = 1e-8


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


class EventKind(Enum):
    LIFT_OFF = "lift_off"  # swing foot leaves the ground: DSP -> SSP
    TOUCH_DOWN = "touch_down"  # swing foot lands: SSP -> DSP


@dataclass(frozen=True)
class GaitEvent:
    kind: EventKind
    timestamp: float
    swing_side: Side


@dataclass(frozen=True)
class HwrState:
    """Reference state plus the per-step bookkeeping the stepping logic needs.

    ``current`` always equals ``post_impact`` flowed for ``phase_time_t``
    under the active domain, because each tick re-flows from the anchor
    instead of accumulating increments.
    """

    current: HlipState
    post_impact: tuple[float, float]
    pre_impact_latest: tuple[float, float]
    pending_step_length_u: float
    step_index_k: int
    target_orbit: Optional[P1Orbit] = None
    predicted_pre_impact: tuple[float, float] = (0.0, 0.0)
    resync_count: int = 0


def initial_hwr_state(x: float = 0.0, xdot: float = 0.0, domain: Domain = Domain.SSP) -> HwrState:
    return HwrState(
        current=HlipState(x=x, xdot=xdot, domain=domain),
        post_impact=(x, xdot),
        pre_impact_latest=(x, xdot),
        pending_step_length_u=0.0,
        step_index_k=0,
        predicted_pre_impact=(x, xdot),
    )


def _apply_event(state: HwrState, event: GaitEvent) -> HwrState:
    cur = state.current
    if event.kind is EventKind.TOUCH_DOWN:
        if cur.domain is Domain.SSP:
            pre = (cur.x, cur.xdot)
            nxt = hlip.reset_s2d(cur)
            return replace(
                state, current=nxt, post_impact=(nxt.x, nxt.xdot), pre_impact_latest=pre
            )
        # Already in DSP: pilot is authoritative, re-anchor without resetting.
        log.warning("touch-down while already in DSP at t=%.4f; resyncing", event.timestamp)
        nxt = replace(cur, phase_time_t=0.0)
        return replace(
            state,
            current=nxt,
            post_impact=(nxt.x, nxt.xdot),
            resync_count=state.resync_count + 1,
        )
    # LIFT_OFF
    if cur.domain is Domain.DSP:
        nxt = hlip.reset_d2s(cur, state.pending_step_length_u)
        return replace(
            state,
            current=nxt,
            post_impact=(nxt.x, nxt.xdot),
            step_index_k=state.step_index_k + 1,
        )
    log.warning("lift-off while already in SSP at t=%.4f; resyncing", event.timestamp)
    nxt = replace(cur, phase_time_t=0.0)
    return replace(
        state,
        current=nxt,
        post_impact=(nxt.x, nxt.xdot),
        resync_count=state.resync_count + 1,
    )


def hwr_tick(
    state: HwrState,
    event: Optional[GaitEvent],
    x_h: float,
    t_s: float,
    dt: float,
    params: HlipParams,
    *,
    t_ssp_est: Optional[float] = None,
) -> HwrState:
    """Advance the walking reference by one control tick.

    ``x_h`` is the pilot's CoM position (the commanded pre-impact DCM),
    ``t_s`` the orbit period fed to the target mapping, ``t_ssp_est`` the
    live single-support-duration estimate used to predict the end-of-step
    state (defaults to params.t_ssp).  The step length is recomputed every
    SSP tick but only applied, latched, at the next lift-off.
    """
    if dt <= 0.0:
        raise ContractViolation(f"hwr_tick requires dt > 0, got {dt}")
    if t_ssp_est is None:
        t_ssp_est = params.t_ssp

    if event is not None:
        state = _apply_event(state, event)

    anchor = HlipState(
        x=state.post_impact[0],
        xdot=state.post_impact[1],
        domain=state.current.domain,
        phase_time_t=0.0,
    )
    phase = state.current.phase_time_t + dt

    if state.current.domain is Domain.DSP:
        # Constant drift; step length stays latched until lift-off.
        return replace(state, current=hlip.flow_dsp(anchor, phase))

    current = hlip.flow_ssp(anchor, params, phase)

    # Target orbit follows the pilot continuously; inconsistent or degenerate
    # commands hold the previous target.
    orbit = state.target_orbit
    try:
        cand = hlip.map_human_to_p1(x_h, t_s, params)
        if hlip.orbit_is_consistent(cand, x_h):
            orbit = cand
    except InvalidInput:
        pass

    # Predict the pre-impact state at the estimated end of this SSP.  When
    # the estimate falls within the current tick (half-tick tolerance eats
    # accumulated rounding in phase), impact is now; when it has clearly
    # elapsed, treat impact as one tick away; otherwise predict to it so a
    # correct estimate yields the realized pre-impact state exactly.
    remaining = t_ssp_est - phase
    remaining = max(remaining, 0.0) if remaining >= -0.5 * dt else dt
    predicted = hlip.flow_ssp(current, params, remaining)
    total_ssp = phase + remaining
    pred = (predicted.x, predicted.xdot)

    u = state.pending_step_length_u
    if orbit is not None:
        gain_params = params.with_timing(t_ssp=total_ssp)
        u = hlip.deadbeat_step_length(pred, (orbit.x_pre, orbit.xdot_pre), gain_params)

    return replace(
        state,
        current=current,
        target_orbit=orbit,
        predicted_pre_impact=pred,
        pending_step_length_u=u,
    )


@dataclass(frozen=True)
class StepTimingFit:
    """Result of fitting swing-foot height to its assumed vertical profile."""

    t_ssp_est: float
    z_cl_est: float
    damping_lambda: float
    sample_buffer: tuple[tuple[float, float], ...]
    converged: bool


def swing_height_profile(t, t_ssp: float, z_cl: float, z_start: float = 0.0):
    """Vertical swing profile z(t) = z_start + (z_cl/2)(1 - cos(2 pi t / t_ssp))."""
    return z_start + 0.5 * z_cl * (1.0 - np.cos(2.0 * np.pi * np.asarray(t) / t_ssp))


def fit_step_timing(
    buffer: Sequence[tuple[float, float]],
    z_start: float,
    damping_lambda: float = 1e-3,
    init: tuple[float, float] = (0.4, 0.06),
) -> StepTimingFit:
    """Estimate (SSP duration, step clearance) from streaming (t, z) samples.

    Levenberg-damped Gauss-Newton on the two-parameter cosine profile; the
    damping is fixed (deterministic fits).  Raises NoFitError when the buffer
    is too short/narrow to identify the period, when the swing is flat
    (clearance estimable as 0 but the period indeterminate), or when the
    iteration diverges.
    """
    if len(buffer) < 4:
        raise NoFitError(f"need >= 4 samples, got {len(buffer)}")
    t = np.array([s[0] for s in buffer], dtype=float)
    z = np.array([s[1] for s in buffer], dtype=float)
    if np.any(np.diff(t) < 0.0):
        raise InvalidInput("sample buffer must be time-monotone")
    t_init, z_init = init
    if t_init <= 0.0:
        raise InvalidInput(f"initial period guess must be > 0, got {t_init}")
    if t.max() - t.min() <= 0.1 * t_init:
        raise NoFitError(
            f"samples span {t.max() - t.min():.4f} s <= 10% of initial period {t_init:.4f} s"
        )
    if np.max(np.abs(z - z_start)) < 1e-12:
        raise NoFitError("flat swing: period indeterminate", z_cl_est=0.0)

    t_ssp, z_cl = float(t_init), float(z_init)
    converged = False
    for _ in range(_FIT_MAX_ITERS):
        u = 2.0 * np.pi * t / t_ssp
        r = z - (z_start + 0.5 * z_cl * (1.0 - np.cos(u)))
        # d(model)/dT = -(z_cl pi t / T^2) sin(2 pi t / T); d(model)/dz_cl = (1 - cos)/2
        jac = np.column_stack([-(z_cl * np.pi * t / t_ssp**2) * np.sin(u), 0.5 * (1.0 - np.cos(u))])
        h = jac.T @ jac + damping_lambda * np.eye(2)
        step = np.linalg.solve(h, jac.T @ r)
        t_ssp += step[0]
        z_cl += step[1]
        if not (np.isfinite(t_ssp) and np.isfinite(z_cl)) or t_ssp <= 0.0:
            raise NoFitError(f"fit diverged (T={t_ssp}, z_cl={z_cl})")
        if np.linalg.norm(step) < _FIT_STEP_TOL:
            converged = True
            break

    return StepTimingFit(
        t_ssp_est=float(t_ssp),
        z_cl_est=float(z_cl),
        damping_lambda=damping_lambda,
        sample_buffer=tuple((float(a), float(b)) for a, b in buffer),
        converged=converged,
    )


def clamp_estimate_step(previous: float, new: float, max_rel_step: float = 0.05) -> float:
    """Rate-limit an online estimate to +/- max_rel_step of its previous value."""
    if previous <= 0.0:
        return new
    lo = previous * (1.0 - max_rel_step)
    hi = previous * (1.0 + max_rel_step)
    return min(max(new, lo), hi)


def measure_step_period(
    events: Sequence[GaitEvent],
    smoothing_alpha: float = 1.0,
    default_period: float = 0.5,
) -> float:
    """Exponentially smoothed interval between consecutive touch-downs.

    smoothing_alpha = 1 keeps only the latest interval; < 1 blends history.
    With fewer than two touch-downs the configured default is returned.
    """
    if not 0.0 < smoothing_alpha <= 1.0:
        raise InvalidInput(f"smoothing_alpha must be in (0, 1], got {smoothing_alpha}")
    td = [e.timestamp for e in events if e.kind is EventKind.TOUCH_DOWN]
    if len(td) < 2:
        return default_period
    if any(b <= a for a, b in zip(td, td[1:])):
        raise InvalidInput("touch-down timestamps must strictly increase")
    intervals = [b - a for a, b in zip(td, td[1:])]
    est = intervals[0]
    for iv in intervals[1:]:
        est = smoothing_alpha * iv + (1.0 - smoothing_alpha) * est
    return est
