"""The telelocomotion control loop.

A fixed-step (default 1 kHz) deterministic loop: read a pilot sample,
derive gait events from contact-flag edges, advance the walking reference,
update the online step-timing estimates, scale the reference to robot
proportions, run stance force distribution and swing tracking, apply the
resulting contact forces to the rigid-body plant, and log one telemetry
record per tick.  Human and robot share wall-clock time; only lengths
(and therefore velocities) scale, by the ratio of CoM heights.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import balance, hlip, reference, robot, sim, swing, telemetry
from .balance import PdGains, PostureGains
from .config import EpisodeConfig
from .errors import InvalidInput, NoFitError, PilotSourceError, UndefinedCop
from .hlip import Domain
from .pilot import PilotSample, SyntheticPilot
from .reference import EventKind, GaitEvent, Side
from .robot import ContactId, LegJointState
from .sim import SimDomain, Wrench
from .swing import SwingGains, SwingPlan


def scale_human_to_robot(value: float, h_human: float, h_robot: float) -> float:
    """Length/velocity scaling by the CoM-height ratio (shared wall clock)."""
    if h_human <= 0.0 or h_robot <= 0.0:
        raise InvalidInput("CoM heights must be > 0")
    return value * (h_robot / h_human)


@dataclass(frozen=True)
class HapticCommand:
    """Feedback forces to the pilot, saturated at the safety bound."""

    force_x: float
    force_y: float


def haptic_feedback(
    dcm_robot_norm: float,
    dcm_ref_norm: float,
    com_y_norm_err: float,
    gain: float,
    bound: float,
) -> HapticCommand:
    fx = gain * (dcm_robot_norm - dcm_ref_norm)
    fy = gain * com_y_norm_err
    return HapticCommand(
        force_x=min(max(fx, -bound), bound),
        force_y=min(max(fy, -bound), bound),
    )


@dataclass
class EpisodeResult:
    summary: dict
    final_state: sim.SrbState
    sink: object  # the telemetry sink the episode wrote to


def _contact_points(foot_pos: np.ndarray, side: Side, params) -> dict:
    toe, heel = sim._FOOT_CONTACTS[side]
    off = np.array([params.foot_half_len, 0.0, 0.0])
    return {toe: foot_pos + off, heel: foot_pos - off}


class EpisodeRunner:
    """Owns all loop state for one episode."""

    def __init__(self, cfg: EpisodeConfig, pilot_source, sink):
        self.cfg = cfg
        self.rp = cfg.robot_params()
        self.hp = cfg.human_params()
        self.lam = cfg.length_scale(self.rp)
        self.source = pilot_source
        self.sink = sink

        self.bal_gains = PdGains(kp=cfg.balance_kp, kd=cfg.balance_kd)
        self.posture = PostureGains(kp=cfg.posture_kp, kd=cfg.posture_kd)
        self.swing_gains = SwingGains(kp=cfg.swing_kp, kd=cfg.swing_kd)
        self.omega_r = math.sqrt(self.rp.gravity_g / self.rp.com_height_nominal)

        h_r = self.rp.com_height_nominal
        self.state = sim.upright_state(p=(0.0, 0.0, h_r))
        half_w_r = 0.5 * self.lam * cfg.feet_width
        self.foot_pos = {
            Side.LEFT: np.array([0.0, half_w_r, 0.0]),
            Side.RIGHT: np.array([0.0, -half_w_r, 0.0]),
        }
        self.domain = SimDomain.DSP
        self.hwr = reference.initial_hwr_state(domain=Domain.DSP)
        self.ref_anchor_x = 0.0

        self.t_ssp_est = cfg.step_period
        self.t_dsp_est = cfg.dsp_duration
        self.period_est = cfg.step_period + cfg.dsp_duration
        self.z_cl_est = cfg.pilot_z_cl
        self.fit_converged = False
        self.fit_buffer: list = []
        self.pilot_lo_time: Optional[float] = None
        self.last_td_time: Optional[float] = None
        self.td_events: list = []

        self.plan: Optional[SwingPlan] = None
        self.swing_side: Optional[Side] = None
        self.prev_q = {s: None for s in Side}
        self.tau_frozen = {s: np.zeros(5) for s in Side}
        self.switch_time = {s: -math.inf for s in Side}
        self.last_tau = {s: np.zeros(5) for s in Side}
        self.grf_prev: dict = {}
        self.warm_ids: tuple = ()
        self.warm_set: tuple = ()

        self.pending_events: deque = deque()
        self.prev_sample: Optional[PilotSample] = None
        self.vel_des_y = 0.0
        self.prev_com_y_des = 0.0
        self.last_event_time = 0.0
        # Pilot CoM rate by finite difference; None right after a stance
        # switch, where the stance-relative coordinate jumps.
        self.xh_rate: Optional[float] = None

        self.qp_fallback_count = 0
        self.violation_count = 0
        self.underrun = False
        self.fell = False
        self.pilot_ended = False
        self.times: list = []
        self.com_x_track: list = []
        self.dcm_err_track: list = []

    # ------------------------------------------------------------------ events

    def _detect_events(self, s: PilotSample, t: float) -> None:
        prev = self.prev_sample
        if prev is None:
            return
        for side, was, now in (
            (Side.LEFT, prev.contact_left, s.contact_left),
            (Side.RIGHT, prev.contact_right, s.contact_right),
        ):
            if was and not now:
                self.pending_events.append(GaitEvent(EventKind.LIFT_OFF, t, side))
            elif now and not was:
                self.pending_events.append(GaitEvent(EventKind.TOUCH_DOWN, t, side))

    def _apply_event(self, ev: GaitEvent, t: float, tick_events: list) -> None:
        self.last_event_time = t
        if ev.kind is EventKind.LIFT_OFF:
            u_applied = self.hwr.pending_step_length_u
            self.ref_anchor_x += self.lam * u_applied
            self.swing_side = ev.swing_side
            stance = ev.swing_side.other
            self.domain = SimDomain.SSP_LEFT if stance is Side.LEFT else SimDomain.SSP_RIGHT
            p_i = self.foot_pos[ev.swing_side].copy()
            self.plan = SwingPlan(
                side=ev.swing_side,
                p_i=p_i,
                p_f_xy=p_i[:2],
                z_cl=self.cfg.robot_z_cl,
                t_ssp_est=self.t_ssp_est,
                start_time=t,
            )
            self._mark_role_switch(ev.swing_side, t)
            self.fit_buffer = []
            self.pilot_lo_time = t
            if self.last_td_time is not None:
                measured_dsp = t - self.last_td_time
                a = self.cfg.t_dsp_smoothing
                self.t_dsp_est = a * measured_dsp + (1.0 - a) * self.t_dsp_est
            if len(self.td_events) >= 2:
                fresh = max(0.1, self.period_est - self.t_dsp_est)
                self.t_ssp_est = fresh
            tick_events.append({"kind": "lift_off", "side": ev.swing_side.value, "u": u_applied})
        else:  # TOUCH_DOWN
            if self.plan is not None:
                pos, _, _ = swing.trajectory_point(self.plan, t)
                self.foot_pos[ev.swing_side] = np.array([pos[0], pos[1], 0.0])
            self.domain = SimDomain.DSP
            self._mark_role_switch(ev.swing_side, t)
            self.plan = None
            self.swing_side = None
            self.last_td_time = t
            self.td_events.append(ev)
            if len(self.td_events) >= 2:
                self.period_est = reference.measure_step_period(
                    self.td_events,
                    smoothing_alpha=self.cfg.period_smoothing,
                    default_period=self.period_est,
                )
            tick_events.append({"kind": "touch_down", "side": ev.swing_side.value})

    def _mark_role_switch(self, side: Side, t: float) -> None:
        self.tau_frozen[side] = self.last_tau[side].copy()
        self.switch_time[side] = t

    # ------------------------------------------------------- timing estimation

    def _update_timing_fit(self, s: PilotSample, t: float, tick_index: int) -> None:
        one_contact = s.contact_left != s.contact_right
        if not one_contact or self.pilot_lo_time is None:
            return
        z = float(s.right_foot[2] if s.contact_left else s.left_foot[2])
        self.fit_buffer.append((t - self.pilot_lo_time, z))
        if tick_index % self.cfg.fit_every_ticks or len(self.fit_buffer) < 8:
            return
        try:
            fit = reference.fit_step_timing(
                self.fit_buffer, z_start=0.0, init=(self.t_ssp_est, self.z_cl_est)
            )
        except (NoFitError, InvalidInput):
            self.fit_converged = False
            return
        self.fit_converged = fit.converged
        if fit.converged:
            self.t_ssp_est = reference.clamp_estimate_step(self.t_ssp_est, fit.t_ssp_est)
            self.z_cl_est = fit.z_cl_est
            if self.plan is not None:
                self.plan = self.plan.with_timing(self.t_ssp_est)

    # ------------------------------------------------------------ control tick

    def _leg_states(self, roll_pitch) -> dict:
        com, rot = self.state.p, self.state.rot_r
        legs = {}
        for side in Side:
            rel = rot.T @ (self.foot_pos[side] - com)
            ik = robot.leg_ik(rel, side, self.rp, torso_pitch=roll_pitch[1])
            q = ik.joints.q_j
            prev = self.prev_q[side]
            qdot = np.zeros(5) if prev is None else (q - prev) / self.cfg.dt
            self.prev_q[side] = q
            legs[side] = LegJointState(q_j=q, qdot_j=qdot)
        return legs

    def _swing_update(self, s: PilotSample, t: float, legs: dict):
        """Retarget the foothold from the live reference and track it.

        Sagittal: carry the robot CoM forward over the remaining swing time
        and offset by the commanded step length relative to the predicted
        pre-impact state, so the landed foot reproduces the reference's
        post-impact geometry.  Lateral: place the foot a fixed margin beyond
        the divergent component of motion predicted at touch-down -- a
        one-step deadbeat law whose margin sets the steady step width.
        """
        plan, side = self.plan, self.swing_side
        stance = side.other
        remaining = max(self.t_ssp_est - (t - plan.start_time), 0.0)
        com_td_pred = self.state.p[0] + self.state.pdot[0] * remaining
        # The reference latches its step length at lift-off from the command
        # seen at the end of single support, while the pilot's stance-relative
        # CoM is still sweeping toward that value mid-step.  Predict it by
        # flowing the pilot's pendulum state through the remaining swing time
        # and place the foot for the deadbeat length toward that orbit: at
        # steady state this equals the latched command, and mid-transient it
        # converges to it by touch-down.
        pre = self.hwr.predicted_pre_impact
        gait_params = self.hp.with_timing(t_ssp=self.t_ssp_est, t_dsp=self.t_dsp_est)
        w_h = gait_params.natural_freq_omega
        orbit = self.hwr.target_orbit
        if self.xh_rate is not None:
            x_hf = s.com_x * math.cosh(w_h * remaining) + (
                self.xh_rate / w_h
            ) * math.sinh(w_h * remaining)
            try:
                cand = hlip.map_human_to_p1(x_hf, self.t_ssp_est, gait_params)
                if hlip.orbit_is_consistent(cand, x_hf):
                    orbit = cand
            except InvalidInput:
                pass
        if orbit is None:
            u_final = self.hwr.pending_step_length_u
        else:
            try:
                u_final = hlip.deadbeat_step_length(
                    pre, (orbit.x_pre, orbit.xdot_pre), gait_params
                )
            except InvalidInput:
                u_final = self.hwr.pending_step_length_u
        target_x = com_td_pred + self.lam * (u_final - pre[0])
        p_st_y = self.foot_pos[stance][1]
        y_rel = self.state.p[1] - p_st_y
        vy = self.state.pdot[1]
        xi_td = p_st_y + math.exp(self.omega_r * remaining) * (y_rel + vy / self.omega_r)
        vy_td = vy * math.cosh(self.omega_r * remaining) + self.omega_r * y_rel * math.sinh(
            self.omega_r * remaining
        )
        # The divergent component keeps drifting at the touch-down velocity
        # through the coming (lateral-force-free) double support, so aim for
        # its value at the next lift-off rather than at touch-down.
        xi_lo = xi_td + vy_td * self.t_dsp_est
        width = self.lam * s.feet_width
        margin = width / (1.0 + math.exp(self.omega_r * self.t_ssp_est))
        target_y = xi_lo + (margin if side is Side.LEFT else -margin)
        plan, _ = swing.update_foothold(plan, (target_x, target_y))
        self.plan = plan
        cmd = swing.swing_torques(
            plan, t, self.state.p, self.state.rot_r, legs[side], self.swing_gains, self.rp
        )
        pos, _, _ = swing.trajectory_point(plan, t)
        self.foot_pos[side] = pos
        return cmd, (plan.p_f_xy[0], plan.p_f_xy[1])

    def _blend_tau(self, side: Side, tau_new: np.ndarray, t: float) -> np.ndarray:
        dt_switch = t - self.switch_time[side]
        if dt_switch < self.cfg.blend_duration:
            tau = balance.blend(
                self.tau_frozen[side], tau_new, dt_switch, self.cfg.blend_duration
            )
        else:
            tau = tau_new
        self.last_tau[side] = tau
        return tau

    def run(self) -> EpisodeResult:
        cfg = self.cfg
        dt = cfg.dt
        n_ticks = int(round(cfg.duration / dt))
        h_r = self.rp.com_height_nominal
        h_h = cfg.human_com_height
        omega_h = self.hp.natural_freq_omega
        mg = self.rp.mass_m * self.rp.gravity_g

        self.sink.write_header(cfg.to_dict())
        verdict = "completed"

        for k in range(n_ticks):
            t = k * dt
            try:
                s = self.source.sample(t)
            except PilotSourceError as exc:
                verdict = "underrun"
                self.underrun = True
                self.sink.write_tick(
                    {"type": "tick", "t": t, "events": [{"kind": "underrun", "detail": str(exc)}]}
                )
                break
            if s is None:
                verdict = "pilot_end"
                self.pilot_ended = True
                break

            tick_events: list = []
            if self.prev_sample is None:
                # Adopt the initial pilot domain without synthesizing events.
                if s.contact_left != s.contact_right:
                    stance = Side.LEFT if s.contact_left else Side.RIGHT
                    self.domain = (
                        SimDomain.SSP_LEFT if stance is Side.LEFT else SimDomain.SSP_RIGHT
                    )
                    self.swing_side = stance.other
                    p_i = self.foot_pos[self.swing_side].copy()
                    self.plan = SwingPlan(
                        side=self.swing_side,
                        p_i=p_i,
                        p_f_xy=p_i[:2],
                        z_cl=cfg.robot_z_cl,
                        t_ssp_est=self.t_ssp_est,
                        start_time=t,
                    )
                    self.pilot_lo_time = t
            prev = self.prev_sample
            if (
                prev is not None
                and s.contact_left == prev.contact_left
                and s.contact_right == prev.contact_right
            ):
                self.xh_rate = (s.com_x - prev.com_x) / dt
            else:
                self.xh_rate = None
            self._detect_events(s, t)
            ev = self.pending_events.popleft() if self.pending_events else None
            if ev is not None:
                self._apply_event(ev, t, tick_events)

            hwr_params = self.hp.with_timing(t_dsp=self.t_dsp_est)
            self.hwr = reference.hwr_tick(
                self.hwr,
                ev,
                x_h=s.com_x,
                t_s=self.t_ssp_est,
                dt=dt,
                params=hwr_params,
                t_ssp_est=self.t_ssp_est,
            )
            self._update_timing_fit(s, t, k)

            # Scaled references.  A double support that outlives the stepping
            # rhythm means the pilot has stopped: hold station over the feet
            # instead of chasing a reference that is no longer being stepped.
            # (While the stepping momentum is still live the hold is realized
            # as a capture force, not this PD target -- see the force
            # override below.)
            dwell = t - self.last_event_time
            in_capture = (
                self.domain is SimDomain.DSP
                and self.hwr.step_index_k > 0
                and dwell > max(0.15, 1.5 * self.t_dsp_est)
            )
            if in_capture:
                mid = 0.5 * (self.foot_pos[Side.LEFT] + self.foot_pos[Side.RIGHT])
                com_des_x = float(mid[0])
                vel_des_x = 0.0
                com_des_y = float(mid[1]) + self.lam * s.com_y
            else:
                com_des_x = self.ref_anchor_x + self.lam * self.hwr.current.x
                vel_des_x = self.lam * self.hwr.current.xdot
                com_des_y = self.lam * s.com_y
            if in_capture:
                self.vel_des_y = 0.0
            else:
                raw_vy = (com_des_y - self.prev_com_y_des) / dt if k else 0.0
                self.vel_des_y = 0.2 * raw_vy + 0.8 * self.vel_des_y
            self.prev_com_y_des = com_des_y
            desired = balance.task_state_target(
                [com_des_x, com_des_y, h_r], [vel_des_x, self.vel_des_y, 0.0]
            )

            roll_pitch = sim.euler_zyx_pitch_roll(self.state.rot_r)
            legs = self._leg_states(roll_pitch)

            swing_cmd = None
            foot_target = None
            if self.domain is not SimDomain.DSP and self.plan is not None:
                swing_cmd, foot_target = self._swing_update(s, t, legs)

            # Force distribution over the active contacts.
            schedule = sim.schedule_for(self.domain)
            ids = tuple(sorted(schedule.active, key=lambda c: c.value))
            contact_world = {}
            for side in Side:
                if any(c.side is side for c in ids):
                    contact_world.update(_contact_points(self.foot_pos[side], side, self.rp))
            try:
                actual = balance.task_state_from_srb(self.state)
                f_desired = balance.desired_wrench(actual, desired, self.bal_gains, self.rp)
            except balance.GimbalLockError:
                f_desired = Wrench(force_f=np.array([0.0, 0.0, mg]), torque_tau=np.zeros(3))
            if self.domain is not SimDomain.DSP:
                # With both contact points on the stance line, holding roll
                # pins the lateral force to the inverted-pendulum value, so
                # feed that forward instead of fighting it; lateral recovery
                # comes from foot placement, not stance forces.  Sagittally,
                # feed the reference's own pendulum acceleration forward so
                # the position feedback only carries deviations, not the
                # nominal field (which would need a large steady error).
                stance_y = self.foot_pos[schedule.stance_side][1]
                fy_lip = self.rp.mass_m * self.omega_r**2 * (self.state.p[1] - stance_y)
                fx_ff = self.rp.mass_m * omega_h**2 * self.lam * self.hwr.current.x
                f_desired = Wrench(
                    force_f=np.array(
                        [f_desired.force_f[0] + fx_ff, fy_lip, f_desired.force_f[2]]
                    ),
                    torque_tau=f_desired.torque_tau,
                )
            elif self.hwr.step_index_k > 0 and not in_capture:
                # Mid-gait double support: keep the lateral momentum that
                # carries the CoM toward the new stance side; placement, not
                # stance force, owns lateral stability while stepping.
                f_desired = Wrench(
                    force_f=np.array([f_desired.force_f[0], 0.0, f_desired.force_f[2]]),
                    torque_tau=f_desired.torque_tau,
                )
            elif in_capture and (
                abs(self.state.pdot[0]) > 0.05 or abs(self.state.pdot[1]) > 0.05
            ):
                # Stopping with momentum still live: command the pendulum
                # force of a pressure point clamped to the support region
                # (the strongest braking the contacts can realize); the PD
                # above takes over once the divergent component is parked.
                lo_y = min(self.foot_pos[Side.LEFT][1], self.foot_pos[Side.RIGHT][1]) + 0.01
                hi_y = max(self.foot_pos[Side.LEFT][1], self.foot_pos[Side.RIGHT][1]) - 0.01
                lo_x = min(self.foot_pos[Side.LEFT][0], self.foot_pos[Side.RIGHT][0])
                hi_x = max(self.foot_pos[Side.LEFT][0], self.foot_pos[Side.RIGHT][0])
                half = self.rp.foot_half_len
                k2 = self.rp.mass_m * self.omega_r**2
                xi_x = self.state.p[0] + self.state.pdot[0] / self.omega_r
                xi_y = self.state.p[1] + self.state.pdot[1] / self.omega_r
                cop_x = min(max(xi_x, lo_x - half + 0.01), hi_x + half - 0.01)
                cop_y = min(max(xi_y, lo_y), hi_y)
                f_desired = Wrench(
                    force_f=np.array(
                        [
                            k2 * (self.state.p[0] - cop_x),
                            k2 * (self.state.p[1] - cop_y),
                            f_desired.force_f[2],
                        ]
                    ),
                    torque_tau=f_desired.torque_tau,
                )
            f0 = np.zeros(3 * len(ids))
            for i, cid in enumerate(ids):
                f0[3 * i : 3 * i + 3] = self.grf_prev.get(cid, [0.0, 0.0, mg / len(ids)])
            problem = balance.build_qp_problem(
                ids,
                contact_world,
                self.state.p,
                self.state.rot_r,
                {side: legs[side] for side in Side if any(c.side is side for c in ids)},
                f_desired,
                f0,
                self.rp,
                w1=cfg.qp_w1,
                w2=cfg.qp_w2,
            )
            warm = self.warm_set if ids == self.warm_ids else ()
            sol = balance.solve_force_distribution(problem, warm_start=warm)
            self.warm_ids, self.warm_set = ids, sol.active_constraints
            self.grf_prev = dict(sol.grfs)
            if sol.fallback:
                self.qp_fallback_count += 1
                tick_events.append({"kind": "qp_fallback", "status": sol.status})

            # Joint torques (telemetry; the plant is driven by the GRFs).
            taus = {}
            for side in Side:
                owned = [c for c in ids if c.side is side]
                if owned:
                    jacs = {
                        c: robot.contact_jacobian(legs[side], side, c, self.rp) for c in owned
                    }
                    try:
                        tau_raw = balance.stance_torques(
                            sol, jacs, self.state.rot_r, legs[side], self.posture
                        )
                    except balance.ContractViolation:
                        tau_raw = np.zeros(5)
                elif swing_cmd is not None and side is self.swing_side:
                    tau_raw = swing_cmd.tau_j
                else:
                    tau_raw = np.zeros(5)
                taus[side] = self._blend_tau(side, tau_raw, t)

            violations = sim.contact_violations(sol.grfs, self.rp.friction_mu)
            if violations:
                self.violation_count += len(violations)
                tick_events.append({"kind": "contact_violation", "detail": violations})

            com0 = self.state.p.copy()
            wrench = sim.net_wrench(
                [(contact_world[cid] - com0, sol.grfs[cid]) for cid in ids]
            )
            self.state = sim.integrate(self.state, lambda _st: wrench, dt, self.rp)

            try:
                cop_xy = sim.cop([contact_world[c] for c in ids], [sol.grfs[c] for c in ids])
                cop_x, cop_y = float(cop_xy[0]), float(cop_xy[1])
            except UndefinedCop:
                cop_x = cop_y = None

            dcm_h_norm = hlip.dcm(self.hwr.current, hwr_params) / h_h
            dcm_r_norm = (
                (self.state.p[0] - self.ref_anchor_x) + self.state.pdot[0] / omega_h
            ) / h_r
            dcm_err = dcm_r_norm - dcm_h_norm
            hap = haptic_feedback(
                dcm_r_norm,
                dcm_h_norm,
                self.state.p[1] / h_r - s.com_y / h_h,
                cfg.haptic_gain,
                cfg.haptic_bound,
            )

            if sim.has_fallen(self.state, self.rp):
                self.fell = True
                verdict = "fall"
                tick_events.append({"kind": "fall"})

            roll, pitch = sim.euler_zyx_pitch_roll(self.state.rot_r)
            record = {
                "type": "tick",
                "t": t,
                "domain": self.domain.value,
                "step_k": self.hwr.step_index_k,
                "pilot_com_x": s.com_x,
                "pilot_com_y": s.com_y,
                "pilot_contact_l": s.contact_left,
                "pilot_contact_r": s.contact_right,
                "hwr_x": self.hwr.current.x,
                "hwr_xdot": self.hwr.current.xdot,
                "hwr_u": self.hwr.pending_step_length_u,
                "hwr_pre_x": self.hwr.predicted_pre_impact[0],
                "hwr_pre_xdot": self.hwr.predicted_pre_impact[1],
                "t_ssp_est": self.t_ssp_est,
                "t_dsp_est": self.t_dsp_est,
                "period_est": self.period_est,
                "fit_converged": self.fit_converged,
                "z_cl_est": self.z_cl_est,
                "com_x": self.state.p[0],
                "com_y": self.state.p[1],
                "com_z": self.state.p[2],
                "vel_x": self.state.pdot[0],
                "vel_y": self.state.pdot[1],
                "vel_z": self.state.pdot[2],
                "roll": roll,
                "pitch": pitch,
                "dcm_h_norm": dcm_h_norm,
                "dcm_r_norm": dcm_r_norm,
                "dcm_err_norm": dcm_err,
                "cop_x": cop_x,
                "cop_y": cop_y,
                "grfs": {c.value: [float(v) for v in sol.grfs[c]] for c in ids},
                "qp_status": sol.status,
                "qp_iters": sol.iterations,
                "qp_kkt": sol.kkt_residual if math.isfinite(sol.kkt_residual) else None,
                "qp_fallback": sol.fallback,
                "foot_l": [float(v) for v in self.foot_pos[Side.LEFT]],
                "foot_r": [float(v) for v in self.foot_pos[Side.RIGHT]],
                "target_foot_x": foot_target[0] if foot_target else None,
                "target_foot_y": foot_target[1] if foot_target else None,
                "com_des_x": com_des_x,
                "com_des_y": com_des_y,
                "vel_des_x": vel_des_x,
                "vel_des_y": self.vel_des_y,
                "tau_left": [float(v) for v in taus[Side.LEFT]],
                "tau_right": [float(v) for v in taus[Side.RIGHT]],
                "haptic_x": hap.force_x,
                "haptic_y": hap.force_y,
                "events": tick_events,
            }
            self.sink.write_tick(record)

            self.times.append(t)
            self.com_x_track.append(float(self.state.p[0]))
            self.dcm_err_track.append(abs(dcm_err))
            self.prev_sample = s
            if self.fell:
                break

        summary = self._summary(verdict)
        return EpisodeResult(summary=summary, final_state=self.state, sink=self.sink)

    # ---------------------------------------------------------------- summary

    def _segment_stats(self) -> list:
        if not self.cfg.speed_segments or not self.times:
            return []
        times = np.asarray(self.times)
        coms = np.asarray(self.com_x_track)
        out = []
        t0 = self.cfg.lead_in
        for dur, target in self.cfg.speed_segments:
            t1 = t0 + dur
            i0 = int(np.searchsorted(times, t0 - 1e-12))
            i1 = int(np.searchsorted(times, t1 - 1e-12))
            if i0 >= len(times) or i1 >= len(times):
                out.append(
                    {"t0": t0, "t1": t1, "target_speed": target, "mean_speed": None,
                     "complete": False}
                )
            else:
                mean = (coms[i1] - coms[i0]) / (times[i1] - times[i0])
                out.append(
                    {"t0": t0, "t1": t1, "target_speed": target,
                     "mean_speed": float(mean), "complete": True}
                )
            t0 = t1
        return out

    def _summary(self, verdict: str) -> dict:
        com_x = self.com_x_track or [0.0]
        dcm = self.dcm_err_track or [0.0]
        return {
            "schema_version": telemetry.SCHEMA_VERSION,
            "scenario": self.cfg.scenario,
            "seed": self.cfg.seed,
            "dt": self.cfg.dt,
            "verdict": verdict,
            "ticks": len(self.times),
            "sim_time": len(self.times) * self.cfg.dt,
            "distance_x": float(com_x[-1] - com_x[0]),
            "min_com_x": float(min(com_x)),
            "max_com_x": float(max(com_x)),
            "falls": int(self.fell),
            "steps": self.hwr.step_index_k,
            "resync_count": self.hwr.resync_count,
            "mean_abs_dcm_err_norm": float(np.mean(dcm)),
            "max_abs_dcm_err_norm": float(np.max(dcm)),
            "qp_fallback_count": self.qp_fallback_count,
            "contact_violation_count": self.violation_count,
            "t_ssp_est_final": self.t_ssp_est,
            "t_dsp_est_final": self.t_dsp_est,
            "segments": self._segment_stats(),
        }


def make_pilot_source(cfg: EpisodeConfig):
    """Default pilot source for a scenario config."""
    if cfg.scenario == "replay":
        from .pilot import ReplaySource

        return ReplaySource.from_csv(cfg.replay_path)
    robot_h = cfg.robot_params().com_height_nominal
    speed_scale = cfg.speed_calibration * cfg.human_com_height / robot_h
    return SyntheticPilot(
        cfg.pilot_spec(),
        human_com_height=cfg.human_com_height,
        speed_scale=speed_scale,
        seed=cfg.seed,
    )


def run_episode(cfg: EpisodeConfig, pilot_source=None, sink=None) -> EpisodeResult:
    if pilot_source is None:
        pilot_source = make_pilot_source(cfg)
    if sink is None:
        sink = telemetry.ListSink()
    return EpisodeRunner(cfg, pilot_source, sink).run()
