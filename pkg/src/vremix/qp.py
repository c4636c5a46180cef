"""Dense primal active-set solver for small convex quadratic programs.

Solves::

    min  0.5 x'Qx + c'x
    s.t. A_eq x  = b_eq
         A_in x >= b_in

with Q symmetric positive semi-definite, starting from a feasible point.
Steps are computed in the null space of the working set; directions of zero
curvature along which the objective decreases are followed as rays, so the
same routine handles linear programs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericalError


class Status(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class KKTResiduals:
    stationarity: float
    primal: float
    dual: float
    complementarity: float

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.dual, self.complementarity)


@dataclass(frozen=True)
class ActiveSetResult:
    x: np.ndarray = field(repr=False)
    status: Status
    iterations: int
    working_set: tuple[int, ...]
    eq_multipliers: np.ndarray = field(repr=False)
    in_multipliers: np.ndarray = field(repr=False)  # full length, zero off the working set
    kkt: KKTResiduals | None = None


def _null_space(a, n, tol):
    if a.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T


def kkt_residuals(q, c, a_eq, b_eq, a_in, b_in, x, lam_eq, lam_in) -> KKTResiduals:
    g = q @ x + c
    stat = g - a_eq.T @ lam_eq - a_in.T @ lam_in
    eq_viol = np.abs(a_eq @ x - b_eq) if a_eq.size else np.zeros(0)
    in_slack = a_in @ x - b_in if a_in.size else np.zeros(0)
    primal = max(eq_viol.max(initial=0.0), (-in_slack).max(initial=0.0))
    dual = (-lam_in).max(initial=0.0)
    comp = np.abs(lam_in * in_slack).max(initial=0.0)
    return KKTResiduals(float(np.abs(stat).max(initial=0.0)), float(primal), float(dual), float(comp))


def active_set_qp(q, c, a_eq, b_eq, a_in, b_in, x0, *, tol=1e-12, max_iter=500) -> ActiveSetResult:
    """Minimize a convex quadratic from the feasible point ``x0``.

    Raises
    ------
    NumericalError
        If ``x0`` is infeasible or the iteration cap is reached.
    """
    q = np.asarray(q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.size
    a_eq = np.asarray(a_eq, dtype=float).reshape(-1, n)
    b_eq = np.asarray(b_eq, dtype=float).reshape(-1)
    a_in = np.asarray(a_in, dtype=float).reshape(-1, n)
    b_in = np.asarray(b_in, dtype=float).reshape(-1)
    x = np.array(x0, dtype=float)

    row_scale = np.maximum(np.abs(a_in).max(axis=1, initial=0.0), 1e-300)
    feas_tol = 1e-9 * (1 + np.abs(b_in).max(initial=0.0))
    slack = a_in @ x - b_in
    if np.any(slack < -feas_tol) or (a_eq.size and np.abs(a_eq @ x - b_eq).max() > 1e-9 * (1 + np.abs(b_eq).max())):
        raise NumericalError("active-set start point is infeasible")

    # initial working set: active inequalities that keep the rows independent
    work: list[int] = []
    rank = np.linalg.matrix_rank(a_eq) if a_eq.shape[0] else 0
    for i in np.flatnonzero(np.abs(slack) <= feas_tol * 10):
        trial_rank = np.linalg.matrix_rank(np.vstack([a_eq, a_in[work + [int(i)]]]))
        if trial_rank > rank:
            work.append(int(i))
            rank = trial_rank

    q_scale = max(1.0, np.abs(q).max(initial=0.0))
    for it in range(1, max_iter + 1):
        a_w = np.vstack([a_eq, a_in[work]])
        z = _null_space(a_w, n, 1e-12)
        g = q @ x + c
        g_scale = max(1.0, np.abs(g).max(initial=0.0))
        step = None
        ray = False
        if z.shape[1]:
            h = z.T @ q @ z
            gz = z.T @ g
            vals, vecs = np.linalg.eigh((h + h.T) / 2)
            pos = vals > 1e-12 * q_scale
            proj = vecs.T @ gz
            flat = ~pos
            if np.any(flat) and np.linalg.norm(proj[flat]) > 1e-12 * g_scale:
                # descent along a zero-curvature direction: follow it as a ray
                step = -z @ (vecs[:, flat] @ proj[flat])
                ray = True
            else:
                pz = -vecs[:, pos] @ (proj[pos] / vals[pos])
                step = z @ pz
            if np.abs(step).max(initial=0.0) <= 1e-13 * max(1.0, np.abs(x).max(initial=0.0)):
                step = None
                ray = False

        if step is None:
            lam, *_ = np.linalg.lstsq(a_w.T, g, rcond=None) if a_w.shape[0] else (np.zeros(0),)
            lam_eq = lam[:a_eq.shape[0]]
            lam_w = lam[a_eq.shape[0]:]
            neg_tol = 1e-10 * g_scale
            if lam_w.size == 0 or lam_w.min() >= -neg_tol:
                lam_in = np.zeros(a_in.shape[0])
                lam_in[work] = np.maximum(lam_w, 0.0)
                return ActiveSetResult(x, Status.OPTIMAL, it, tuple(work), lam_eq, lam_in)
            # drop the most negative multiplier; ties go to the lowest constraint index
            most = lam_w.min()
            cand = [work[j] for j in np.flatnonzero(lam_w <= most + neg_tol * 1e-3)]
            work.remove(min(cand))
            continue

        alpha = np.inf if ray else 1.0
        blocking = None
        ap = a_in @ step
        ax = a_in @ x - b_in
        for i in range(a_in.shape[0]):
            if i in work or ap[i] >= -1e-14 * row_scale[i] * np.abs(step).max():
                continue
            ratio = max(ax[i], 0.0) / -ap[i]
            if ratio < alpha - 1e-15 * max(1.0, alpha if np.isfinite(alpha) else 1.0):
                alpha, blocking = ratio, i
        if not np.isfinite(alpha):
            lam_in = np.zeros(a_in.shape[0])
            return ActiveSetResult(x, Status.UNBOUNDED, it, tuple(work), np.zeros(a_eq.shape[0]), lam_in)
        x = x + alpha * step
        if blocking is not None:
            work.append(blocking)
    raise NumericalError(f"active-set QP did not converge in {max_iter} iterations (working set {work})")
