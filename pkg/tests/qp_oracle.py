"""Shared test oracles for the force-distribution QP.

brute_force_qp enumerates every candidate active set (size <= n_vars),
solves each as an equality-constrained problem through the KKT system, and
returns the feasible candidate with the least objective.  The KKT solves are
batched through np.linalg.pinv so 2-contact instances (20 constraints, six
variables, ~60k subsets) stay fast.  Subsets containing a row and its exact
negation are skipped: both can only be active together when their bounds
cancel, and such candidates are filtered by the consistency check anyway.
"""

import itertools

import numpy as np

from telewalk import balance, robot, sim
from telewalk.balance import PdGains
from telewalk.reference import Side
from telewalk.robot import ContactId, LegJointState, RobotParams


def objective(p, q, x):
    return 0.5 * x @ p @ x + q @ x


def _negation_pairs(g):
    pairs = set()
    keys = {}
    for i, row in enumerate(g):
        k = tuple(np.round(row, 12))
        nk = tuple(np.round(-row, 12))
        if nk in keys:
            pairs.add((keys[nk], i))
        if k not in keys:
            keys[k] = i
    return pairs


def brute_force_qp(p, q, g, h, feas_tol=1e-8):
    """[DERIVED] enumeration oracle; returns (x_best, objective_best)."""
    n = len(q)
    m = len(h)
    pairs = _negation_pairs(g)
    best_x, best_obj = None, np.inf
    for k in range(n + 1):
        subsets = [
            s
            for s in itertools.combinations(range(m), k)
            if not any((a, b) in pairs for a, b in itertools.combinations(s, 2))
        ]
        if not subsets:
            continue
        dim = n + k
        kkts = np.zeros((len(subsets), dim, dim))
        rhs = np.zeros((len(subsets), dim))
        kkts[:, :n, :n] = p
        rhs[:, :n] = -q
        for si, s in enumerate(subsets):
            ga = g[list(s)]
            kkts[si, :n, n:] = ga.T
            kkts[si, n:, :n] = ga
            rhs[si, n:] = h[list(s)]
        sols = np.einsum("bij,bj->bi", np.linalg.pinv(kkts), rhs)
        xs = sols[:, :n]
        if k:
            cons = np.array(
                [np.max(np.abs(g[list(s)] @ x - h[list(s)])) for s, x in zip(subsets, xs)]
            )
        else:
            cons = np.zeros(len(subsets))
        feas = (g @ xs.T).T - h
        ok = (cons <= 1e-8) & (feas.max(axis=1) <= feas_tol)
        for x in xs[ok]:
            obj = objective(p, q, x)
            if obj < best_obj - 1e-15:
                best_obj, best_x = obj, x
    return best_x, best_obj


def random_instance(rng, n, m, zero_h_frac=0.3):
    """Generic strictly convex instance with x=0 feasible."""
    a = rng.normal(size=(n + 1, n))
    p = a.T @ a + 0.1 * np.eye(n)
    q = rng.normal(size=n)
    g = rng.normal(size=(m, n))
    h = np.abs(rng.normal(size=m))
    h[rng.uniform(size=m) < zero_h_frac] = 0.0
    return p, q, g, h


def random_stance_problem(rng, params: RobotParams = None, dsp=None, w2=1e-3):
    """Kinematically consistent force-distribution instance.

    Feet placed on the ground near nominal stance, legs posed by IK, torso
    slightly perturbed, desired wrench from a random PD error.  Returns the
    assembled QpProblem.
    """
    if params is None:
        params = RobotParams()
    if dsp is None:
        dsp = rng.uniform() < 0.5
    com = np.array([rng.uniform(-0.05, 0.05), rng.uniform(-0.03, 0.03), rng.uniform(0.42, 0.5)])
    rot = sim.exp_so3(rng.uniform(-0.08, 0.08, size=3))
    sides = (Side.LEFT, Side.RIGHT) if dsp else ((Side.LEFT,) if rng.uniform() < 0.5 else (Side.RIGHT,))
    contact_ids = []
    contact_world = {}
    legs = {}
    for side in sides:
        sgn = 1.0 if side is Side.LEFT else -1.0
        ankle_w = np.array(
            [rng.uniform(-0.08, 0.08), sgn * params.hip_offset_y + rng.uniform(-0.02, 0.02), 0.0]
        )
        target_torso = rot.T @ (ankle_w - com)
        ik = robot.leg_ik(target_torso, side, params)
        qdot = rng.uniform(-2.0, 2.0, size=5)
        legs[side] = LegJointState(q_j=ik.joints.q_j, qdot_j=qdot)
        ff = robot.forward_kinematics(com, rot, legs[side], side, params)
        toe_id = ContactId.LEFT_TOE if side is Side.LEFT else ContactId.RIGHT_TOE
        heel_id = ContactId.LEFT_HEEL if side is Side.LEFT else ContactId.RIGHT_HEEL
        contact_ids += [toe_id, heel_id]
        contact_world[toe_id] = ff.toe
        contact_world[heel_id] = ff.heel
    gains = PdGains(kp=[150, 150, 200, 40, 40, 20], kd=[20, 20, 30, 6, 6, 3])
    actual = balance.task_state_target(
        com, rng.uniform(-0.3, 0.3, size=3), rng.uniform(-0.05, 0.05, size=3), rng.uniform(-0.3, 0.3, size=3)
    )
    wanted = balance.task_state_target([0.0, 0.0, params.com_height_nominal])
    f_d = balance.desired_wrench(actual, wanted, gains, params)
    n = 3 * len(contact_ids)
    f0 = np.zeros(n)
    f0[2::3] = params.mass_m * params.gravity_g / len(contact_ids)
    f0 += rng.uniform(-5.0, 5.0, size=n)
    return balance.build_qp_problem(
        contact_ids, contact_world, com, rot, legs, f_d, f0, params, w2=w2
    )
