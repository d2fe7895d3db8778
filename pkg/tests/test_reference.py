"""Tests for walking-reference generation and step-timing estimation.

Oracles: closed-loop replay of the exact hybrid dynamics for the tick logic;
synthetic swing-profile round trips (noiseless and Monte-Carlo) for the
damped least-squares estimator.
"""

import math

import numpy as np
import pytest

from telewalk import hlip, reference
from telewalk.errors import ContractViolation, InvalidInput, NoFitError
from telewalk.hlip import Domain, HlipParams, HlipState
from telewalk.reference import EventKind, GaitEvent, Side

PARAMS = HlipParams(com_height_h=1.0, gravity_g=9.81, t_ssp=0.4, t_dsp=0.1)
DT = 1e-3


def run_cycles(
    x_h,
    t_s,
    n_ticks,
    params=PARAMS,
    t_ssp_est=None,
    dt=DT,
):
    """Drive hwr_tick with touch-downs/lift-offs at the params' nominal timing."""
    st = reference.initial_hwr_state()
    pre_impacts = []
    side = Side.LEFT
    for k in range(n_ticks):
        ev = None
        cur = st.current
        if cur.domain is Domain.SSP and cur.phase_time_t >= params.t_ssp - 1e-12:
            ev = GaitEvent(EventKind.TOUCH_DOWN, k * dt, side)
        elif cur.domain is Domain.DSP and cur.phase_time_t >= params.t_dsp - 1e-12:
            side = side.other
            ev = GaitEvent(EventKind.LIFT_OFF, k * dt, side)
        st = reference.hwr_tick(st, ev, x_h, t_s, dt, params, t_ssp_est=t_ssp_est)
        if ev is not None and ev.kind is EventKind.TOUCH_DOWN:
            pre_impacts.append(st.pre_impact_latest)
    return st, pre_impacts


class TestHwrTick:
    def test_standing_is_fixed_point(self):
        st = reference.initial_hwr_state()
        for _ in range(500):
            st = reference.hwr_tick(st, None, 0.0, 0.4, DT, PARAMS)
        assert st.current.x == 0.0
        assert st.current.xdot == 0.0
        assert st.pending_step_length_u == 0.0
        assert st.target_orbit is not None
        assert st.target_orbit.x_pre == 0.0

    def test_tick_sequence_matches_single_flow(self):
        # 1000 ticks of 1 ms with no events == one closed-form flow of 1 s.
        st = reference.initial_hwr_state(x=0.03, xdot=0.1)
        for _ in range(1000):
            st = reference.hwr_tick(st, None, 0.0, 0.4, DT, PARAMS)
        ref = hlip.flow_ssp(HlipState(x=0.03, xdot=0.1), PARAMS, 1.0)
        assert abs(st.current.x - ref.x) <= 1e-9
        assert abs(st.current.xdot - ref.xdot) <= 1e-9

    def test_constant_command_converges_to_orbit(self):
        # [DERIVED] deadbeat property through the full tick/event pipeline:
        # after two applied steps every realized pre-impact equals the target.
        orbit = hlip.map_human_to_p1(0.1, PARAMS.t_ssp, PARAMS)
        _, pre_impacts = run_cycles(0.1, PARAMS.t_ssp, n_ticks=4000)
        assert len(pre_impacts) >= 6
        for x, xd in pre_impacts[2:]:
            assert abs(x - orbit.x_pre) <= 1e-6
            assert abs(xd - orbit.xdot_pre) <= 1e-6

    def test_backward_command_converges_with_negative_velocity(self):
        orbit = hlip.map_human_to_p1(-0.1, PARAMS.t_ssp, PARAMS)
        _, pre_impacts = run_cycles(-0.1, PARAMS.t_ssp, n_ticks=4000)
        for x, xd in pre_impacts[2:]:
            assert abs(x - orbit.x_pre) <= 1e-6
            assert xd < 0.0

    def test_prediction_matches_realized_pre_impact(self):
        # With t_ssp_est equal to the true duration, every in-SSP prediction
        # equals the state the flow actually reaches at impact.
        st = reference.initial_hwr_state(x=-0.04, xdot=0.19)
        truth = hlip.flow_ssp(HlipState(x=-0.04, xdot=0.19), PARAMS, PARAMS.t_ssp)
        for _ in range(399):
            st = reference.hwr_tick(st, None, 0.1, 0.4, DT, PARAMS, t_ssp_est=PARAMS.t_ssp)
            assert abs(st.predicted_pre_impact[0] - truth.x) <= 1e-9
            assert abs(st.predicted_pre_impact[1] - truth.xdot) <= 1e-9

    def test_reference_continuity_across_resets(self):
        # x continuous at touch-down (identity reset), discontinuous by
        # exactly the latched step length at lift-off.
        st = reference.initial_hwr_state()
        for k in range(400):
            st = reference.hwr_tick(st, None, 0.1, 0.4, DT, PARAMS)
        x_before_td = st.current.x
        st = reference.hwr_tick(
            st, GaitEvent(EventKind.TOUCH_DOWN, 0.4, Side.LEFT), 0.1, 0.4, DT, PARAMS
        )
        # One DSP drift tick after the identity reset.
        assert st.current.x == pytest.approx(x_before_td + st.current.xdot * DT, abs=1e-12)
        u = st.pending_step_length_u
        for k in range(99):
            st = reference.hwr_tick(st, None, 0.1, 0.4, DT, PARAMS)
        x_before_lo = st.current.x
        xd_before_lo = st.current.xdot
        st = reference.hwr_tick(
            st, GaitEvent(EventKind.LIFT_OFF, 0.5, Side.RIGHT), 0.1, 0.4, DT, PARAMS
        )
        expect = hlip.flow_ssp(HlipState(x=x_before_lo - u, xdot=xd_before_lo), PARAMS, DT)
        assert st.current.x == pytest.approx(expect.x, abs=1e-12)
        assert st.step_index_k == 1

    def test_inconsistent_event_resyncs(self, caplog):
        st = reference.initial_hwr_state()
        ev = GaitEvent(EventKind.LIFT_OFF, 0.01, Side.LEFT)  # already in SSP
        with caplog.at_level("WARNING"):
            out = reference.hwr_tick(st, ev, 0.0, 0.4, DT, PARAMS)
        assert out.resync_count == 1
        assert out.current.domain is Domain.SSP
        assert out.step_index_k == 0  # no step applied on resync

    def test_inconsistent_command_holds_previous_orbit(self):
        st = reference.initial_hwr_state()
        st = reference.hwr_tick(st, None, 0.1, 0.4, DT, PARAMS)
        held = st.target_orbit
        # Degenerate period cannot produce a new orbit; previous one is held.
        st = reference.hwr_tick(st, None, 0.2, 0.0, DT, PARAMS)
        assert st.target_orbit is held

    def test_dt_contract(self):
        with pytest.raises(ContractViolation):
            reference.hwr_tick(reference.initial_hwr_state(), None, 0.0, 0.4, 0.0, PARAMS)


class TestFitStepTiming:
    def test_noiseless_round_trip(self):
        # [DERIVED] samples from (T=0.4, z_cl=0.06) over t in [0, 0.2];
        # both parameters recovered within 1e-6.
        t = np.arange(0.0, 0.2, 1e-3)
        z = reference.swing_height_profile(t, 0.4, 0.06, z_start=0.02)
        fit = reference.fit_step_timing(list(zip(t, z)), z_start=0.02, init=(0.5, 0.05))
        assert fit.converged
        assert abs(fit.t_ssp_est - 0.4) <= 1e-6
        assert abs(fit.z_cl_est - 0.06) <= 1e-6

    def test_flat_swing_reports_zero_clearance(self):
        t = np.arange(0.0, 0.2, 1e-3)
        with pytest.raises(NoFitError) as ei:
            reference.fit_step_timing([(float(ti), 0.02) for ti in t], z_start=0.02)
        assert ei.value.z_cl_est == 0.0

    def test_insufficient_samples(self):
        with pytest.raises(NoFitError):
            reference.fit_step_timing([(0.0, 0.0), (0.01, 0.001), (0.02, 0.002)], z_start=0.0)
        # Enough samples but spanning < 10% of the initial period guess.
        t = np.linspace(0.0, 0.03, 10)
        z = reference.swing_height_profile(t, 0.4, 0.06)
        with pytest.raises(NoFitError):
            reference.fit_step_timing(list(zip(t, z)), z_start=0.0, init=(0.4, 0.06))

    def test_non_monotone_buffer_rejected(self):
        pts = [(0.0, 0.0), (0.02, 0.01), (0.01, 0.005), (0.03, 0.012)]
        with pytest.raises(InvalidInput):
            reference.fit_step_timing(pts, z_start=0.0)

    def test_monte_carlo_recovery_under_noise(self):
        # [DERIVED] Monte-Carlo oracle: 1% (of z_cl) Gaussian noise, data up
        # to mid-swing; T within 5% of truth in >= 95 of 100 seeded trials.
        t_true, z_true = 0.4, 0.06
        t = np.arange(0.0, 0.5 * t_true, 1e-3)
        clean = reference.swing_height_profile(t, t_true, z_true)
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            z = clean + rng.normal(0.0, 0.01 * z_true, size=t.shape)
            try:
                fit = reference.fit_step_timing(list(zip(t, z)), z_start=0.0, init=(0.5, 0.05))
            except NoFitError:
                continue
            if abs(fit.t_ssp_est - t_true) <= 0.05 * t_true:
                hits += 1
        assert hits >= 95

    def test_monotone_improvement_with_more_samples(self):
        # More noiseless data never hurts (up to solver tolerance).
        t_true, z_true = 0.4, 0.06
        errs = []
        for frac in (0.2, 0.3, 0.4, 0.5):
            t = np.arange(0.0, frac * t_true, 1e-3)
            z = reference.swing_height_profile(t, t_true, z_true)
            fit = reference.fit_step_timing(list(zip(t, z)), z_start=0.0, init=(0.5, 0.05))
            errs.append(abs(fit.t_ssp_est - t_true))
        for a, b in zip(errs, errs[1:]):
            assert b <= a + 1e-9

    def test_bad_init_rejected(self):
        t = np.arange(0.0, 0.2, 1e-3)
        z = reference.swing_height_profile(t, 0.4, 0.06)
        with pytest.raises(InvalidInput):
            reference.fit_step_timing(list(zip(t, z)), z_start=0.0, init=(0.0, 0.05))


class TestMeasureStepPeriod:
    @staticmethod
    def _tds(times):
        return [GaitEvent(EventKind.TOUCH_DOWN, t, Side.LEFT) for t in times]

    def test_uniform_spacing(self):
        assert reference.measure_step_period(self._tds([0.0, 0.6, 1.2])) == pytest.approx(0.6)

    def test_no_memory_keeps_latest(self):
        ev = self._tds([0.0, 0.5, 1.2])  # intervals 0.5, 0.7
        assert reference.measure_step_period(ev, smoothing_alpha=1.0) == pytest.approx(0.7)

    def test_smoothed_recurrence(self):
        # [DERIVED] intervals 0.6, 0.6, 0.8 with alpha=0.5:
        # est = 0.6 -> 0.5*0.6+0.5*0.6 = 0.6 -> 0.5*0.8+0.5*0.6 = 0.7.
        ev = self._tds([0.0, 0.6, 1.2, 2.0])
        assert reference.measure_step_period(ev, smoothing_alpha=0.5) == pytest.approx(0.7)

    def test_fallback_default(self):
        assert reference.measure_step_period(self._tds([0.0]), default_period=0.45) == 0.45
        # Lift-offs alone don't count.
        ev = [GaitEvent(EventKind.LIFT_OFF, t, Side.LEFT) for t in (0.0, 0.5, 1.0)]
        assert reference.measure_step_period(ev, default_period=0.45) == 0.45

    def test_non_increasing_timestamps_rejected(self):
        with pytest.raises(InvalidInput):
            reference.measure_step_period(self._tds([0.0, 0.6, 0.6]))
        with pytest.raises(InvalidInput):
            reference.measure_step_period(self._tds([0.0, 0.6, 1.2]), smoothing_alpha=0.0)


class TestClampEstimateStep:
    def test_limits_relative_change(self):
        assert reference.clamp_estimate_step(0.4, 0.5) == pytest.approx(0.42)
        assert reference.clamp_estimate_step(0.4, 0.3) == pytest.approx(0.38)
        assert reference.clamp_estimate_step(0.4, 0.41) == pytest.approx(0.41)
        # No previous estimate: pass through.
        assert reference.clamp_estimate_step(0.0, 0.37) == 0.37
