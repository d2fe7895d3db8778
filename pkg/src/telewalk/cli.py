"""Command-line entry points.

Subcommands:
  run     scripted scenario -> telemetry.jsonl + summary.json + pilot.csv
          (+ series.csv and figures unless --no-figures)
  replay  recorded pilot CSV through the full loop, same artifacts
  serve   live WebSocket bridge for the browser console
  check   fast invariant self-test, one PASS/FAIL line per property

Exit status: 0 on success (run/replay: episode completed; check: all pass),
1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import hlip, report, telemetry
from .config import SCENARIOS, load_episode_config, make_config, with_overrides
from .errors import InvalidInput
from .loop import EpisodeRunner, make_pilot_source
from .pilot import load_pilot_csv, save_pilot_csv


class _RecordingSource:
    """Wraps a pilot source, keeping every emitted sample for replay export."""

    def __init__(self, inner):
        self.inner = inner
        self.samples = []

    def sample(self, t):
        s = self.inner.sample(t)
        if s is not None:
            self.samples.append(s)
        return s


def _episode_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=None, help="override RNG seed")
    p.add_argument("--duration", type=float, default=None, help="override duration [s]")
    p.add_argument(
        "--no-figures", action="store_true", help="skip series.csv and figure rendering"
    )
    return p


def _run_episode_to_dir(cfg, outdir, render: bool) -> dict:
    os.makedirs(outdir, exist_ok=True)
    telemetry_path = os.path.join(outdir, "telemetry.jsonl")
    source = _RecordingSource(make_pilot_source(cfg))
    with telemetry.TelemetryWriter(telemetry_path) as sink:
        result = EpisodeRunner(cfg, source, sink).run()
    summary = result.summary
    telemetry.write_summary(os.path.join(outdir, "summary.json"), summary)
    if source.samples:
        save_pilot_csv(source.samples, os.path.join(outdir, "pilot.csv"))
    if render:
        report.write_report(telemetry_path, outdir)
    return summary


def _print_summary(summary: dict) -> None:
    segs = summary.get("segments") or []
    print(
        f"verdict={summary['verdict']} sim_time={summary['sim_time']:.3f}s "
        f"steps={summary['steps']} falls={summary['falls']} "
        f"distance_x={summary['distance_x']:+.3f}m "
        f"dcm_err_max={summary['max_abs_dcm_err_norm']:.4f} "
        f"qp_fallbacks={summary['qp_fallback_count']}"
    )
    for seg in segs:
        mean = seg["mean_speed"]
        shown = "incomplete" if mean is None else f"{mean:+.4f}"
        print(f"  segment target={seg['target_speed']:+.2f} m/s mean={shown}")


def cmd_run(args) -> int:
    if args.config:
        cfg = load_episode_config(args.config)
        if args.scenario and args.scenario != cfg.scenario:
            raise InvalidInput(
                f"--config sets scenario {cfg.scenario!r}; drop the positional "
                f"{args.scenario!r} or make them agree"
            )
    else:
        cfg = make_config(args.scenario or "stand")
    cfg = with_overrides(cfg, duration=args.duration, seed=args.seed)
    summary = _run_episode_to_dir(cfg, args.out, render=not args.no_figures)
    _print_summary(summary)
    return 0 if summary["verdict"] == "completed" else 1


def cmd_replay(args) -> int:
    samples = load_pilot_csv(args.recording)
    duration = args.duration if args.duration is not None else samples[-1].t
    cfg = make_config("replay", replay_path=args.recording, duration=duration)
    cfg = with_overrides(cfg, seed=args.seed)
    summary = _run_episode_to_dir(cfg, args.out, render=not args.no_figures)
    _print_summary(summary)
    return 0 if summary["verdict"] in ("completed", "pilot_end") else 1


def cmd_serve(args) -> int:
    from .bridge import serve_forever

    return serve_forever(host=args.host, port=args.port, dt=args.dt)


def _check_lines():
    """Yield (name, passed, detail) for each self-test invariant."""
    from . import balance, sim, swing
    from .loop import run_episode
    from .qpsolver import kkt_residuals
    from .robot import RobotParams
    from .sim import Wrench

    rng = np.random.default_rng(0)
    params = hlip.HlipParams(com_height_h=1.0, t_ssp=0.4, t_dsp=0.1)
    mats = hlip.s2s_matrices(params)

    # Two-step deadbeat convergence of the step-to-step error dynamics.
    worst = 0.0
    for _ in range(100):
        x_h = rng.uniform(0.02, 0.2)
        orbit = hlip.map_human_to_p1(x_h, params.t_ssp, params)
        target = np.array([orbit.x_pre, orbit.xdot_pre])
        state = target + rng.uniform(-0.1, 0.1, size=2)
        for _ in range(2):
            u = hlip.deadbeat_step_length(state, target, params)
            state = mats.apply(state, u)
        worst = max(worst, float(np.linalg.norm(state - target)))
    yield "deadbeat_two_step", worst <= 1e-9, f"residual {worst:.2e}"

    # Discrete S2S map agrees with the composed closed-form hybrid flow.
    worst = 0.0
    for _ in range(100):
        pre = hlip.HlipState(
            x=rng.uniform(-0.2, 0.2), xdot=rng.uniform(-0.8, 0.8), domain=hlip.Domain.SSP
        )
        u = rng.uniform(-0.4, 0.4)
        flowed = hlip.step_hybrid(pre, u, params)
        mapped = mats.apply(np.array([pre.x, pre.xdot]), u)
        err = np.linalg.norm(mapped - np.array([flowed.x, flowed.xdot]))
        worst = max(worst, float(err / max(1.0, np.linalg.norm(mapped))))
    yield "s2s_matches_hybrid_flow", worst <= 1e-10, f"rel err {worst:.2e}"

    # Orbit mapping: commanded offset is the pre-impact DCM.
    worst = 0.0
    for _ in range(100):
        x_h = rng.uniform(0.01, 0.25) * rng.choice([-1.0, 1.0])
        orbit = hlip.map_human_to_p1(x_h, params.t_ssp, params)
        pre = hlip.HlipState(x=orbit.x_pre, xdot=orbit.xdot_pre, domain=hlip.Domain.SSP)
        worst = max(worst, abs(hlip.dcm(pre, params) - x_h))
    yield "orbit_dcm_identity", worst <= 1e-12, f"|dcm - x_h| {worst:.2e}"

    # Force-distribution QP: KKT certificate on random double supports.
    rp = RobotParams()
    worst = 0.0
    ok = True
    for _ in range(20):
        problem = _random_stance(rng, rp)
        sol = balance.solve_force_distribution(problem)
        if sol.fallback:
            ok = False
            break
        p, q, g, h = balance.problem_matrices(problem)
        rep = kkt_residuals(p, q, g, h, sol.x, sol.active_constraints)
        worst = max(worst, rep.max_residual)
    yield "qp_kkt_certificate", ok and worst <= 1e-6, f"max residual {worst:.2e}"

    # Swing profile endpoint / apex identities.
    p_i = np.array([0.1, -0.18])
    p_f = np.array([0.34, -0.18])
    start = swing.swing_xy(0.0, p_i, p_f, 0.4)[0]
    end = swing.swing_xy(1.0, p_i, p_f, 0.4)[0]
    z0 = swing.swing_z(0.0, 0.0, 0.07, 0.4)[0]
    z_apex, zdot_apex, _ = swing.swing_z(0.5, 0.0, 0.07, 0.4)
    z1 = swing.swing_z(1.0, 0.0, 0.07, 0.4)[0]
    ok = (
        np.array_equal(start, p_i)
        and np.array_equal(end, p_f)
        and z0 == 0.0
        and abs(z1) <= 1e-15
        and z_apex == 0.07
        and abs(zdot_apex) <= 1e-12
    )
    yield "swing_endpoint_apex", ok, "endpoint/apex identities"

    # Plant: ballistic flight matches the closed form.
    state = sim.upright_state(p=(0.0, 0.0, 1.0), pdot=(0.3, -0.1, 0.5))
    p0, v0 = state.p.copy(), state.pdot.copy()
    dt, n = 1e-3, 500
    zero = Wrench(force_f=np.zeros(3), torque_tau=np.zeros(3))
    for _ in range(n):
        state = sim.integrate(state, lambda _s: zero, dt, rp)
    tt = n * dt
    g_vec = np.array([0.0, 0.0, -rp.gravity_g])
    p_exact = p0 + v0 * tt + 0.5 * g_vec * tt**2
    err = float(np.linalg.norm(state.p - p_exact))
    yield "plant_ballistic", err <= 1e-9, f"position err {err:.2e}"

    # Determinism: same config twice -> identical telemetry bytes.
    cfg = make_config("stand", duration=1.0, noise_z_frac=0.02, seed=11)
    blobs = []
    for _ in range(2):
        res = run_episode(cfg)
        blobs.append(json.dumps(res.sink.records, sort_keys=True))
    yield "determinism", blobs[0] == blobs[1], "byte-identical records"

    # Short standing episode stays up.
    cfg = make_config("stand", duration=2.0)
    res = run_episode(cfg)
    s = res.summary
    ok = s["verdict"] == "completed" and s["falls"] == 0
    yield "stand_episode", ok, f"verdict {s['verdict']}, falls {s['falls']}"


def _random_stance(rng, params):
    """Random double-support force-distribution instance (no motor rows)."""
    from .balance import QpProblem
    from .reference import Side
    from .robot import ContactId
    from .sim import Wrench

    half = params.foot_half_len
    rel = []
    ids = tuple(ContactId)
    for cid in ids:
        sgn = 1.0 if cid.side is Side.LEFT else -1.0
        off = half if cid.is_toe else -half
        rel.append(
            [
                rng.uniform(-0.05, 0.05) + off,
                sgn * rng.uniform(0.12, 0.2),
                -params.com_height_nominal,
            ]
        )
    mg = params.mass_m * params.gravity_g
    f_desired = Wrench(
        force_f=np.array([rng.uniform(-20, 20), rng.uniform(-20, 20), mg]),
        torque_tau=rng.uniform(-5.0, 5.0, size=3),
    )
    f0 = np.zeros(12)
    f0[2::3] = mg / 4.0
    return QpProblem(
        contact_ids=ids,
        contact_rel_com=np.asarray(rel),
        f_desired=f_desired,
        f0=f0,
        motor_rows=np.zeros((0, 12)),
        tau_m=np.zeros(0),
        friction_mu=params.friction_mu,
        weight_mg=mg,
    )


def cmd_check(args) -> int:
    failures = 0
    for name, passed, detail in _check_lines():
        tag = "PASS" if passed else "FAIL"
        print(f"{tag} {name}: {detail}")
        if not passed:
            failures += 1
    print(f"{failures} failure(s)" if failures else "all checks passed")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telewalk",
        description="stepping-driven bipedal walking: reference generation, "
        "balance control, and simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = _episode_parser(sub, "run", "run a scripted scenario")
    p_run.add_argument(
        "scenario",
        nargs="?",
        choices=[s for s in SCENARIOS if s != "replay"],
        help="scenario preset (default: stand, or from --config)",
    )
    p_run.add_argument("--config", default=None, help="episode config YAML")
    p_run.set_defaults(func=cmd_run)

    p_replay = _episode_parser(sub, "replay", "replay a recorded pilot CSV")
    p_replay.add_argument("recording", help="pilot recording CSV")
    p_replay.set_defaults(func=cmd_replay)

    p_serve = sub.add_parser("serve", help="serve the live console bridge")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--dt", type=float, default=1e-3, help="control period [s]")
    p_serve.set_defaults(func=cmd_serve)

    p_check = sub.add_parser("check", help="fast invariant self-test")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
