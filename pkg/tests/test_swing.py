"""Tests for swing-leg trajectories and joint PD control.

Oracles: analytic endpoint/apex values, central finite differences for the
trajectory velocities, an independent IK + PD computation for the torque
law, and a fine-step double-integrator simulation against the closed-form
steady-state tracking amplitude.
"""

import math

import numpy as np
import pytest

from telewalk import robot, swing
from telewalk.errors import InvalidInput
from telewalk.reference import Side
from telewalk.robot import LegJointState, RobotParams
from telewalk.swing import SwingGains, SwingPlan

PARAMS = RobotParams()


def make_plan(**kw):
    args = dict(
        side=Side.LEFT,
        p_i=np.array([-0.1, 0.09, 0.0]),
        p_f_xy=np.array([0.15, 0.08]),
        z_cl=0.06,
        t_ssp_est=0.4,
        start_time=2.0,
    )
    args.update(kw)
    return SwingPlan(**args)


class TestSwingXy:
    def test_endpoints_exact(self):
        p_i = np.array([-0.1, 0.05])
        p_f = np.array([0.2, -0.03])
        pos0, vel0, cl0 = swing.swing_xy(0.0, p_i, p_f, 0.4)
        pos1, vel1, cl1 = swing.swing_xy(1.0, p_i, p_f, 0.4)
        assert np.array_equal(pos0, p_i) and not cl0
        assert np.allclose(pos1, p_f, atol=0.0)
        assert np.allclose(vel0, 0.0, atol=1e-12)
        assert np.allclose(vel1, 0.0, atol=1e-12)
        assert not cl1

    def test_midpoint(self):
        p_i = np.array([-0.1, 0.05])
        p_f = np.array([0.2, -0.03])
        pos, _, _ = swing.swing_xy(0.5, p_i, p_f, 0.4)
        assert np.allclose(pos, 0.5 * (p_i + p_f), atol=1e-15)

    def test_constant_when_target_equals_start(self):
        p = np.array([0.03, -0.02])
        for s in np.linspace(0, 1, 21):
            pos, vel, _ = swing.swing_xy(s, p, p, 0.3)
            assert np.allclose(pos, p, atol=1e-15)
            assert np.allclose(vel, 0.0, atol=1e-15)

    def test_phase_clamp_flag(self):
        p_i, p_f = np.array([0.0, 0.0]), np.array([0.1, 0.0])
        lo, _, cl_lo = swing.swing_xy(-0.2, p_i, p_f, 0.4)
        hi, _, cl_hi = swing.swing_xy(1.3, p_i, p_f, 0.4)
        assert cl_lo and cl_hi
        assert np.allclose(lo, p_i) and np.allclose(hi, p_f)

    def test_velocity_matches_finite_difference(self):
        # [DERIVED] central difference of position over s, mapped by ds/dt.
        rng = np.random.default_rng(31)
        t_ssp = 0.37
        for _ in range(50):
            p_i = rng.uniform(-0.3, 0.3, size=2)
            p_f = rng.uniform(-0.3, 0.3, size=2)
            s = rng.uniform(0.01, 0.99)
            h = 1e-6
            pp, _, _ = swing.swing_xy(s + h, p_i, p_f, t_ssp)
            pm, _, _ = swing.swing_xy(s - h, p_i, p_f, t_ssp)
            vel_fd = (pp - pm) / (2 * h) / t_ssp
            _, vel, _ = swing.swing_xy(s, p_i, p_f, t_ssp)
            assert np.allclose(vel, vel_fd, atol=1e-6)

    def test_replanning_is_affine_with_bounded_coefficient(self):
        p_i = np.array([0.0, 0.0])
        p_f1 = np.array([0.2, 0.0])
        p_f2 = np.array([0.2, 0.1])
        for s in np.linspace(0, 1, 41):
            a, _, _ = swing.swing_xy(s, p_i, p_f1, 0.4)
            b, _, _ = swing.swing_xy(s, p_i, p_f2, 0.4)
            coeff = 0.5 * (1.0 - math.cos(math.pi * s))
            assert np.allclose(b - a, coeff * (p_f2 - p_f1), atol=1e-14)
            assert np.linalg.norm(b - a) <= np.linalg.norm(p_f2 - p_f1) + 1e-14

    def test_bad_duration(self):
        with pytest.raises(InvalidInput):
            swing.swing_xy(0.5, [0, 0], [1, 1], 0.0)


class TestSwingZ:
    def test_ground_at_both_ends_and_apex(self):
        z0, v0, _ = swing.swing_z(0.0, 0.02, 0.06, 0.4)
        z1, v1, _ = swing.swing_z(1.0, 0.02, 0.06, 0.4)
        apex, vap, _ = swing.swing_z(0.5, 0.02, 0.06, 0.4)
        assert abs(z0 - 0.02) < 1e-15 and abs(z1 - 0.02) < 1e-15
        assert abs(apex - 0.08) < 1e-15
        assert abs(v0) < 1e-12 and abs(v1) < 1e-12 and abs(vap) < 1e-12

    def test_apex_is_maximum(self):
        zs = [swing.swing_z(s, 0.0, 0.05, 0.4)[0] for s in np.linspace(0, 1, 2001)]
        assert np.max(zs) <= 0.05 + 1e-15
        assert np.isclose(np.max(zs), 0.05, atol=1e-6)

    def test_flat_when_no_clearance(self):
        for s in np.linspace(0, 1, 11):
            z, zdot, _ = swing.swing_z(s, 0.01, 0.0, 0.4)
            assert z == 0.01 and zdot == 0.0

    def test_velocity_matches_finite_difference(self):
        rng = np.random.default_rng(32)
        for _ in range(50):
            s = rng.uniform(0.01, 0.99)
            z_cl = rng.uniform(0.0, 0.1)
            h = 1e-6
            zp = swing.swing_z(s + h, 0.0, z_cl, 0.33)[0]
            zm = swing.swing_z(s - h, 0.0, z_cl, 0.33)[0]
            zdot = swing.swing_z(s, 0.0, z_cl, 0.33)[1]
            assert np.isclose(zdot, (zp - zm) / (2 * h) / 0.33, atol=1e-6)

    def test_negative_clearance_rejected(self):
        with pytest.raises(InvalidInput):
            swing.swing_z(0.5, 0.0, -0.01, 0.4)


class TestSwingPlan:
    def test_validation(self):
        with pytest.raises(InvalidInput):
            make_plan(z_cl=-0.01)
        with pytest.raises(InvalidInput):
            make_plan(t_ssp_est=0.0)

    def test_phase_and_retiming(self):
        plan = make_plan()
        assert np.isclose(plan.phase(2.2), 0.5)
        retimed = plan.with_timing(0.5)
        assert np.isclose(retimed.phase(2.2), 0.4)
        assert np.array_equal(retimed.p_i, plan.p_i)

    def test_foothold_update_within_limit(self):
        plan = make_plan()
        new, limited = swing.update_foothold(plan, plan.p_f_xy + [0.01, 0.005])
        assert not limited
        assert np.allclose(new.p_f_xy, plan.p_f_xy + [0.01, 0.005])
        assert np.array_equal(new.p_i, plan.p_i)  # lift-off point never moves

    def test_foothold_update_rate_limited(self):
        plan = make_plan()
        target = plan.p_f_xy + np.array([0.3, -0.4])
        new, limited = swing.update_foothold(plan, target)
        assert limited
        step = new.p_f_xy - plan.p_f_xy
        assert np.isclose(np.linalg.norm(step), swing.FOOT_TARGET_RATE_LIMIT)
        # Clamped step points at the requested target.
        full = target - plan.p_f_xy
        assert np.isclose(step[0] * full[1] - step[1] * full[0], 0.0, atol=1e-12)

    def test_trajectory_point_composition(self):
        plan = make_plan()
        t = plan.start_time + 0.3 * plan.t_ssp_est
        pos, vel, clamped = swing.trajectory_point(plan, t)
        xy, xy_dot, _ = swing.swing_xy(0.3, plan.p_i[:2], plan.p_f_xy, plan.t_ssp_est)
        z, z_dot, _ = swing.swing_z(0.3, plan.p_i[2], plan.z_cl, plan.t_ssp_est)
        assert np.allclose(pos, [xy[0], xy[1], z], atol=1e-12)
        assert np.allclose(vel, [xy_dot[0], xy_dot[1], z_dot], atol=1e-12)
        assert not clamped
        assert swing.trajectory_point(plan, plan.start_time + 2 * plan.t_ssp_est)[2]


class TestSwingTorques:
    TORSO_POS = np.array([0.0, 0.0, 0.48])
    GAINS = SwingGains(kp=np.full(5, 120.0), kd=np.full(5, 8.0))

    def test_zero_error_gives_zero_torque(self):
        plan = make_plan()
        t = plan.start_time + 0.4 * plan.t_ssp_est
        probe = LegJointState(q_j=np.zeros(5), qdot_j=np.zeros(5))
        cmd = swing.swing_torques(plan, t, self.TORSO_POS, np.eye(3), probe, self.GAINS, PARAMS)
        on_target = LegJointState(q_j=cmd.q_des, qdot_j=cmd.qdot_des)
        cmd2 = swing.swing_torques(
            plan, t, self.TORSO_POS, np.eye(3), on_target, self.GAINS, PARAMS
        )
        assert np.allclose(cmd2.tau_j, 0.0, atol=1e-12)
        assert not cmd2.saturated

    def test_diagonal_gains_decouple_joints(self):
        plan = make_plan()
        t = plan.start_time + 0.25 * plan.t_ssp_est
        probe = LegJointState(q_j=np.zeros(5), qdot_j=np.zeros(5))
        cmd = swing.swing_torques(plan, t, self.TORSO_POS, np.eye(3), probe, self.GAINS, PARAMS)
        base = LegJointState(q_j=cmd.q_des.copy(), qdot_j=cmd.qdot_des.copy())
        perturbed_q = base.q_j.copy()
        perturbed_q[2] += 0.1
        bumped = LegJointState(q_j=perturbed_q, qdot_j=base.qdot_j)
        cmd_b = swing.swing_torques(plan, t, self.TORSO_POS, np.eye(3), bumped, self.GAINS, PARAMS)
        assert np.isclose(cmd_b.tau_j[2], -0.1 * self.GAINS.kp[2])
        mask = np.ones(5, dtype=bool)
        mask[2] = False
        assert np.allclose(cmd_b.tau_j[mask], 0.0, atol=1e-12)

    def test_matches_independent_ik_pd_computation(self):
        # [DERIVED] recompute targets with direct IK calls and the FD stencil.
        rng = np.random.default_rng(33)
        plan = make_plan(side=Side.RIGHT, p_i=np.array([0.05, -0.09, 0.0]), p_f_xy=[0.2, -0.1])
        rot = np.eye(3)
        for _ in range(20):
            t = plan.start_time + rng.uniform(0.05, 0.95) * plan.t_ssp_est
            leg = LegJointState(
                q_j=rng.uniform(-0.3, 0.3, size=5), qdot_j=rng.uniform(-2, 2, size=5)
            )
            cmd = swing.swing_torques(plan, t, self.TORSO_POS, rot, leg, self.GAINS, PARAMS)

            def ik_at(tt):
                pos, _, _ = swing.trajectory_point(plan, tt)
                return robot.leg_ik(pos - self.TORSO_POS, Side.RIGHT, PARAMS).joints.q_j

            q_des = ik_at(t)
            qdot_des = (ik_at(t + 1e-3) - ik_at(t - 1e-3)) / 2e-3
            expect = self.GAINS.kp * (q_des - leg.q_j) + self.GAINS.kd * (qdot_des - leg.qdot_j)
            assert np.allclose(cmd.q_des, q_des, atol=1e-12)
            assert np.allclose(cmd.qdot_des, qdot_des, atol=1e-9)
            assert np.allclose(cmd.tau_j, expect, atol=1e-9)

    def test_unreachable_target_flags_saturation(self):
        plan = make_plan(p_f_xy=[1.5, 0.09])  # far outside the leg workspace
        t = plan.start_time + 0.9 * plan.t_ssp_est
        leg = LegJointState(q_j=np.zeros(5), qdot_j=np.zeros(5))
        cmd = swing.swing_torques(plan, t, self.TORSO_POS, np.eye(3), leg, self.GAINS, PARAMS)
        assert cmd.saturated
        assert np.all(np.isfinite(cmd.tau_j))

    def test_double_integrator_tracking_error_bound(self):
        # [DERIVED] a PD-controlled double integrator tracking the vertical
        # swing profile: steady error amplitude is a/|kp - w^2 + i kd w| for
        # the pure-cosine acceleration drive of amplitude a.
        kp, kd = 400.0, 40.0
        t_ssp, z_cl = 0.4, 0.08
        w = 2.0 * math.pi / t_ssp
        a = 0.5 * z_cl * w * w
        amp = a / math.hypot(kp - w * w, kd * w)

        def ref(t):
            s = (t / t_ssp) % 1.0
            z, zdot, _ = swing.swing_z(s, 0.0, z_cl, t_ssp)
            return z, zdot

        dt = 1e-5
        q, qd = 0.0, 0.0
        worst = 0.0
        t = 0.0
        for i in range(int(3 * t_ssp / dt)):
            zr, zdr = ref(t)
            acc = kp * (zr - q) + kd * (zdr - qd)
            q += qd * dt + 0.5 * acc * dt * dt
            qd += acc * dt
            t += dt
            if t > 2 * t_ssp:  # past the transient
                worst = max(worst, abs(ref(t)[0] - q))
        assert worst <= 1.1 * amp
        assert worst >= 0.2 * amp  # bound is meaningful, not vacuous
