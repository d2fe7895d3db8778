"""Dense strictly-convex QP solver: primal active-set method.

Solves   min ½ xᵀP x + qᵀx   s.t.  G x ≤ h
for symmetric positive-definite P.  Geared to the force-distribution
problems this package generates: a handful of variables, a few dozen
constraints, x = 0 feasible, solved thousands of times per second with
slowly varying data — hence determinism, a warm-startable working set, and
an independent optimality certificate instead of solver trust.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInput

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"

_FEAS_TOL = 1e-10
_LAMBDA_TOL = 1e-10


@dataclass
class QpResult:
    x: np.ndarray
    status: str
    active_set: tuple[int, ...]
    lam: np.ndarray  # multipliers aligned with active_set
    iterations: int


def _eqp_solve(p_inv, q, g, h, working: list[int]):
    """Equality-constrained subproblem via the range-space (Schur) method.

    P is factored once per problem (p_inv); each working set only needs the
    small Schur complement G_W P⁻¹ G_Wᵀ.
    """
    if not working:
        return -p_inv @ q, np.zeros(0)
    gw = g[working]
    hw = h[working]
    schur = gw @ p_inv @ gw.T
    rhs = -(hw + gw @ (p_inv @ q))
    try:
        nu = np.linalg.solve(schur, rhs)
    except np.linalg.LinAlgError:
        nu = np.linalg.lstsq(schur, rhs, rcond=None)[0]
    x = -p_inv @ (q + gw.T @ nu)
    return x, nu


def solve_qp(
    p: np.ndarray,
    q: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    x0: Optional[np.ndarray] = None,
    warm_start: Sequence[int] = (),
    max_iter: Optional[int] = None,
) -> QpResult:
    """Primal active-set iteration from a feasible start (default x 0 = 0).

    ``warm_start`` seeds the working set with constraint indices; only those
    active at x0 are kept (a working set must be active at the current
    iterate).  Infeasible x0 yields status "infeasible" without iterating.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float).reshape(-1)
    n = q.shape[0]
    if p.shape != (n, n):
        raise InvalidInput(f"P shape {p.shape} inconsistent with q length {n}")
    if g.size == 0:
        g = np.zeros((0, n))
        h = np.zeros(0)
    g = np.asarray(g, dtype=float).reshape(-1, n)
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.shape[0] != g.shape[0]:
        raise InvalidInput("G and h row counts differ")

    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n).copy()
    slack = h - g @ x
    if slack.size and slack.min() < -_FEAS_TOL:
        return QpResult(x=x, status=INFEASIBLE, active_set=(), lam=np.zeros(0), iterations=0)

    # P is SPD by contract; Cholesky doubles as the check.
    try:
        np.linalg.cholesky(p)
    except np.linalg.LinAlgError as e:
        raise InvalidInput("P must be symmetric positive definite") from e
    p_inv = np.linalg.inv(p)

    working: list[int] = [i for i in warm_start if 0 <= i < g.shape[0] and abs(slack[i]) <= _FEAS_TOL]
    if max_iter is None:
        max_iter = 25 * (n + g.shape[0] + 1)

    lam = np.zeros(0)
    # Degenerate geometries can cycle the working set at zero-length steps;
    # past the burn-in, switch to lowest-index (Bland) add/drop choices,
    # which cannot revisit a working set.
    bland_after = 2 * (n + g.shape[0] + 1)
    for it in range(1, max_iter + 1):
        bland = it > bland_after
        x_eq, lam = _eqp_solve(p_inv, q, g, h, working)
        d = x_eq - x
        # Stationarity must be judged relative to the iterate's own scale:
        # at degenerate vertices the equality solve leaves round-off of
        # order eps*|x|, and chasing it re-adds the row just dropped.
        stat_tol = 1e-11 * (1.0 + float(np.max(np.abs(x_eq))))
        if np.max(np.abs(d)) <= stat_tol:
            # Stationary on the working set: optimal iff multipliers ≥ 0.
            if lam.size == 0 or lam.min() >= -_LAMBDA_TOL:
                return QpResult(
                    x=x_eq,
                    status=OPTIMAL,
                    active_set=tuple(working),
                    lam=lam.copy(),
                    iterations=it,
                )
            if bland:
                neg = [k for k in range(lam.size) if lam[k] < -_LAMBDA_TOL]
                working.pop(min(neg, key=lambda k: working[k]))
            else:
                working.pop(int(np.argmin(lam)))
            continue
        # Step toward the subproblem optimum; blocking constraints cap alpha.
        # Rows in the working set satisfy G d = 0 up to round-off, so they
        # never block; dependent rows cannot block either.  The ascending
        # scan with strict improvement keeps the lowest index among tied
        # blockers, which is the tie-break Bland's rule needs.
        alpha = 1.0
        blocker = -1
        gd = g @ d
        slack = h - g @ x
        for i in range(g.shape[0]):
            if i in working or gd[i] <= 1e-13:
                continue
            a_i = slack[i] / gd[i]
            if a_i < alpha - 1e-13:
                alpha = max(a_i, 0.0)
                blocker = i
        x = x + alpha * d
        if blocker >= 0:
            working.append(blocker)
        elif alpha >= 1.0:
            # Full step with no blocker: loop once more to read multipliers.
            x = x_eq

    return QpResult(x=x, status=MAX_ITER, active_set=tuple(working), lam=lam, iterations=max_iter)


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    feasibility: float
    comp_slackness: float
    dual_sign: float

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.feasibility, self.comp_slackness, self.dual_sign)

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_residual <= tol


def kkt_residuals(p, q, g, h, x, active_set: Sequence[int]) -> KktReport:
    """Independent optimality certificate from problem data alone.

    Multipliers are re-derived by least squares on the stationarity
    condition restricted to the claimed active set — nothing is trusted from
    the solver.  Residuals are scaled by the problem's own magnitude.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float).reshape(-1)
    g = np.asarray(g, dtype=float).reshape(-1, q.shape[0])
    h = np.asarray(h, dtype=float).reshape(-1)
    x = np.asarray(x, dtype=float).reshape(-1)
    scale = max(1.0, float(np.max(np.abs(p @ x))), float(np.max(np.abs(q))))

    slack = h - g @ x
    feas = float(max(0.0, -(slack.min() if slack.size else 0.0))) / max(
        1.0, float(np.max(np.abs(h))) if h.size else 1.0
    )

    grad = p @ x + q
    active = list(active_set)
    if active:
        ga = g[active]
        lam, *_ = np.linalg.lstsq(ga.T, -grad, rcond=None)
        stat = float(np.max(np.abs(grad + ga.T @ lam))) / scale
        dual = float(max(0.0, -lam.min())) / scale
        comp = float(np.max(np.abs(lam * slack[active]))) / scale
    else:
        stat = float(np.max(np.abs(grad))) / scale
        dual = 0.0
        comp = 0.0
    return KktReport(stationarity=stat, feasibility=feas, comp_slackness=comp, dual_sign=dual)
