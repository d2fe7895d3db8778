"""Pilot sources: synthetic scripted pilots and CSV recording replay.

A pilot source produces time-stamped samples of pilot motion (CoM along the
interface, foot positions, contact flags).  The synthetic pilot steps in
place on a fixed cadence while its internal pendulum model walks the
commanded speed profile, so the emitted CoM signal is exactly the stepping
pattern the reference generator expects to see.  Replay streams a recorded
CSV with hold-last-sample semantics.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import hlip
from .errors import InvalidInput, PilotSourceError
from .hlip import Domain, HlipParams, HlipState
from .reference import Side

# Replay schema: one row per sample, SI units, strictly increasing t.
CSV_COLUMNS = ("t", "com_x", "com_y", "lx", "ly", "lz", "rx", "ry", "rz", "cl", "cr")

# Hold-last-sample window before a source is considered underrun [s].
HOLD_LIMIT = 0.05


@dataclass(frozen=True)
class PilotSample:
    """One frame of pilot motion."""

    t: float
    com_x: float
    com_y: float
    left_foot: np.ndarray  # (3,)
    right_foot: np.ndarray  # (3,)
    contact_left: bool
    contact_right: bool

    def __post_init__(self):
        object.__setattr__(self, "left_foot", np.asarray(self.left_foot, dtype=float).reshape(3))
        object.__setattr__(
            self, "right_foot", np.asarray(self.right_foot, dtype=float).reshape(3)
        )
        if not (self.contact_left or self.contact_right):
            raise InvalidInput(f"flight sample at t={self.t}: at least one contact required")

    @property
    def feet_width(self) -> float:
        return abs(float(self.left_foot[1]) - float(self.right_foot[1]))


class ScriptedKind(Enum):
    STAND = "stand"
    VELOCITY_PROFILE = "velocity_profile"
    BACKWARD = "backward"


@dataclass(frozen=True)
class ScriptedPilotSpec:
    """Scenario encoding for the synthetic pilot.

    Speeds are robot-side targets (the speed the scaled reference should
    walk at); the pilot converts through its speed_scale.  The cadence is
    fixed: step_period of single support plus dsp_duration of double
    support per step.
    """

    kind: ScriptedKind
    speed_segments: tuple = ()  # ((duration [s], speed [m/s]), ...)
    step_period: float = 0.4  # single-support duration
    dsp_duration: float = 0.1
    z_cl: float = 0.08  # pilot swing-foot apex
    feet_width: float = 0.36
    # Lateral CoM sway amplitude (pilot scale); None picks the value the
    # stepping rhythm is consistent with (the entry offset of the lateral
    # pendulum for this width and cadence).
    sway_amplitude: Optional[float] = None
    noise_z_frac: float = 0.0  # swing-z noise std dev as a fraction of z_cl
    lead_in: float = 1.0  # standing time before the first lift-off
    # Slew rate on the commanded speed [m/s^2, robot side].  A person eases
    # between speeds over a few steps; a step change in the command would
    # ask for a single braking step beyond the stance foot's moment limits.
    accel_limit: float = 0.4

    def __post_init__(self):
        if self.step_period < 0.3:
            raise InvalidInput(f"step_period must be >= 0.3 s, got {self.step_period}")
        if self.dsp_duration < 0.0:
            raise InvalidInput("dsp_duration must be >= 0")
        if self.z_cl < 0.0 or self.feet_width <= 0.0:
            raise InvalidInput("z_cl must be >= 0 and feet_width > 0")
        if self.noise_z_frac < 0.0:
            raise InvalidInput("noise_z_frac must be >= 0")
        if self.sway_amplitude is not None and self.sway_amplitude < 0.0:
            raise InvalidInput("sway_amplitude must be >= 0")
        if self.lead_in <= 0.0:
            raise InvalidInput("lead_in must be > 0")
        if self.accel_limit <= 0.0:
            raise InvalidInput("accel_limit must be > 0")
        segs = tuple((float(d), float(v)) for d, v in self.speed_segments)
        for dur, v in segs:
            if dur <= 0.0:
                raise InvalidInput(f"segment duration must be > 0, got {dur}")
            if abs(v) > 0.5:
                raise InvalidInput(f"segment speed {v} outside +/-0.5 m/s")
        object.__setattr__(self, "speed_segments", segs)

    @property
    def total_duration(self) -> float:
        return self.lead_in + sum(d for d, _ in self.speed_segments)


def orbit_amplitude_for_speed(speed: float, params: HlipParams) -> float:
    """CoM amplitude x_h whose one-step orbit averages ``speed``.

    The nominal step of the orbit mapped from x_h covers
    x_h * c * (2 + t_dsp * sigma1) per (t_ssp + t_dsp) of walking, with
    c = omega / (omega + sigma1); invert for x_h.
    """
    if speed == 0.0:
        return 0.0
    omega = params.natural_freq_omega
    sigma1 = hlip.orbital_slope(params.t_ssp, params)
    c = omega / (omega + sigma1)
    return speed * (params.t_ssp + params.t_dsp) / (c * (2.0 + params.t_dsp * sigma1))


class SyntheticPilot:
    """Deterministic scripted pilot stepping in place.

    The internal pendulum walks the commanded speed profile using the same
    deadbeat step-length law as the reference generator, easing between
    segment speeds at the spec's slew rate.  The emitted CoM signal is the internal model's
    divergent component, which at each pre-impact instant equals the orbit
    amplitude the reference generator should adopt.
    """

    def __init__(
        self,
        spec: ScriptedPilotSpec,
        human_com_height: float = 1.0,
        speed_scale: float = 1.0,
        seed: int = 0,
    ):
        if human_com_height <= 0.0:
            raise InvalidInput("human_com_height must be > 0")
        self.spec = spec
        self.params = HlipParams(
            com_height_h=human_com_height,
            t_ssp=spec.step_period,
            t_dsp=spec.dsp_duration,
        )
        self.speed_scale = speed_scale
        self._rng = np.random.default_rng(seed)
        self._state = HlipState(x=0.0, xdot=0.0, domain=Domain.DSP)
        self._anchor_t = 0.0  # time of the last internal event
        self._pre_impact = (0.0, 0.0)
        self._step_k = 0  # completed lift-offs
        self._t_last = -math.inf
        # Slew-limited command profile as piecewise-linear knots: each
        # segment edge starts a ramp from the speed held there toward the
        # segment's target at accel_limit, then plateaus.
        knot_t, knot_v = [0.0], [0.0]
        t_edge, v = spec.lead_in, 0.0
        knot_t.append(t_edge)
        knot_v.append(v)
        for dur, target in spec.speed_segments:
            t_next = t_edge + dur
            t_reach = t_edge + abs(target - v) / spec.accel_limit
            if t_reach < t_next:
                knot_t.extend([t_reach, t_next])
                knot_v.extend([target, target])
                v = target
            else:
                v += math.copysign(spec.accel_limit * dur, target - v)
                knot_t.append(t_next)
                knot_v.append(v)
            t_edge = t_next
        # Hold the last target past the profile end.
        if spec.speed_segments and v != spec.speed_segments[-1][1]:
            target = spec.speed_segments[-1][1]
            knot_t.append(t_edge + abs(target - v) / spec.accel_limit)
            knot_v.append(target)
        self._speed_knots = (np.array(knot_t), np.array(knot_v))

    def _segment_speed(self, t: float) -> float:
        if self.spec.kind is ScriptedKind.STAND or not self.spec.speed_segments:
            return 0.0
        return float(np.interp(t, self._speed_knots[0], self._speed_knots[1]))

    def _target_pre_impact(self, t: float):
        speed = self._segment_speed(t) * self.speed_scale
        x_h = orbit_amplitude_for_speed(speed, self.params)
        if x_h == 0.0:
            return (0.0, 0.0)
        orbit = hlip.map_human_to_p1(x_h, self.params.t_ssp, self.params)
        return (orbit.x_pre, orbit.xdot_pre)

    def _stepping(self) -> bool:
        return self.spec.kind is not ScriptedKind.STAND

    def _advance(self, t: float):
        """Run internal events (exact flows and resets) up to time t."""
        if not self._stepping():
            return
        cycle = self.params.t_ssp + self.params.t_dsp
        while True:
            if self._state.domain is Domain.SSP:
                # Touch-down ends the single support begun by lift-off k-1.
                next_t = self.spec.lead_in + (self._step_k - 1) * cycle + self.params.t_ssp
                if next_t > t:
                    return
                pre = hlip.flow_ssp(self._state, self.params, next_t - self._anchor_t)
                self._pre_impact = (pre.x, pre.xdot)
                self._state = hlip.reset_s2d(pre)
            else:
                next_t = self.spec.lead_in + self._step_k * cycle
                if next_t > t:
                    return
                at_lo = hlip.flow_dsp(self._state, next_t - self._anchor_t)
                u = hlip.deadbeat_step_length(
                    self._pre_impact, self._target_pre_impact(next_t), self.params
                )
                self._state = hlip.reset_d2s(at_lo, u)
                self._step_k += 1
            self._anchor_t = next_t

    def _swing_side(self) -> Side:
        # Cycle 0 lifts the right foot (left stance), alternating after.
        return Side.RIGHT if (self._step_k - 1) % 2 == 0 else Side.LEFT

    def sample(self, t: float) -> Optional[PilotSample]:
        if t < self._t_last:
            raise InvalidInput(f"pilot queried backwards in time ({t} < {self._t_last})")
        self._t_last = t
        self._advance(t)

        if self._state.domain is Domain.SSP:
            state = hlip.flow_ssp(self._state, self.params, t - self._anchor_t)
        else:
            state = hlip.flow_dsp(self._state, t - self._anchor_t)
        com_x = hlip.dcm(state, self.params)

        cycle = self.params.t_ssp + self.params.t_dsp
        if self._stepping():
            # Lateral rhythm consistent with pendular balance about each
            # stance foot: the amplitude is the lateral divergent-component
            # offset the gait enters each stance with, the lead-in is a
            # smooth weight shift onto the first stance foot, and afterwards
            # the sway peaks at each lift-off (cosine phase).  Both branches
            # meet at lead_in with value +amp and zero slope.
            amp = self.spec.sway_amplitude
            if amp is None:
                w = self.params.natural_freq_omega
                margin = self.spec.feet_width / (1.0 + math.exp(w * self.params.t_ssp))
                amp = 0.5 * self.spec.feet_width - margin
            if t < self.spec.lead_in:
                com_y = amp * 0.5 * (1.0 - math.cos(math.pi * t / self.spec.lead_in))
            else:
                com_y = amp * math.cos(math.pi * (t - self.spec.lead_in) / cycle)
        else:
            com_y = 0.0

        half_w = 0.5 * self.spec.feet_width
        feet = {Side.LEFT: np.array([0.0, half_w, 0.0]), Side.RIGHT: np.array([0.0, -half_w, 0.0])}
        contact = {Side.LEFT: True, Side.RIGHT: True}
        if self._state.domain is Domain.SSP:
            swing = self._swing_side()
            s = (t - self._anchor_t) / self.params.t_ssp
            z = 0.5 * self.spec.z_cl * (1.0 - math.cos(2.0 * math.pi * s))
            if self.spec.noise_z_frac > 0.0:
                z += self.spec.noise_z_frac * self.spec.z_cl * self._rng.standard_normal()
            feet[swing][2] = z
            contact[swing] = False

        return PilotSample(
            t=t,
            com_x=com_x,
            com_y=com_y,
            left_foot=feet[Side.LEFT],
            right_foot=feet[Side.RIGHT],
            contact_left=contact[Side.LEFT],
            contact_right=contact[Side.RIGHT],
        )


def sample_to_row(s: PilotSample) -> list:
    return [
        s.t,
        s.com_x,
        s.com_y,
        *s.left_foot.tolist(),
        *s.right_foot.tolist(),
        int(s.contact_left),
        int(s.contact_right),
    ]


def save_pilot_csv(samples: Sequence[PilotSample], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in samples:
            writer.writerow(sample_to_row(s))


def load_pilot_csv(path) -> list:
    """Parse a recorded pilot stream; validates header and time monotonicity."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise InvalidInput(f"replay header must be {','.join(CSV_COLUMNS)}")
        samples = []
        for ln, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_COLUMNS):
                raise InvalidInput(f"line {ln}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise InvalidInput(f"line {ln}: {exc}") from exc
            samples.append(
                PilotSample(
                    t=vals[0],
                    com_x=vals[1],
                    com_y=vals[2],
                    left_foot=vals[3:6],
                    right_foot=vals[6:9],
                    contact_left=vals[9] != 0.0,
                    contact_right=vals[10] != 0.0,
                )
            )
    if not samples:
        raise InvalidInput("replay contains no samples")
    for a, b in zip(samples, samples[1:]):
        if b.t <= a.t:
            raise InvalidInput(f"replay time must strictly increase ({a.t} -> {b.t})")
    return samples


class ReplaySource:
    """Streams a recorded pilot CSV with hold-last-sample semantics.

    Queries past the final sample end the source (returns None); an
    internal gap larger than the hold window is an underrun.
    """

    def __init__(self, samples: Sequence[PilotSample], hold_limit: float = HOLD_LIMIT):
        if not samples:
            raise InvalidInput("replay needs at least one sample")
        self._samples = list(samples)
        self._times = [s.t for s in self._samples]
        self._hold = hold_limit

    @classmethod
    def from_csv(cls, path, hold_limit: float = HOLD_LIMIT) -> "ReplaySource":
        return cls(load_pilot_csv(path), hold_limit=hold_limit)

    @property
    def end_time(self) -> float:
        return self._times[-1]

    def sample(self, t: float) -> Optional[PilotSample]:
        if t > self._times[-1] + 1e-12:
            return None  # source end
        idx = bisect_right(self._times, t) - 1
        if idx < 0:
            raise PilotSourceError(f"replay starts at {self._times[0]} s, queried {t} s")
        held = t - self._times[idx]
        if held > self._hold:
            raise PilotSourceError(
                f"underrun: {held * 1e3:.1f} ms since last sample exceeds "
                f"{self._hold * 1e3:.0f} ms hold window"
            )
        return self._samples[idx]
