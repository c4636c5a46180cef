"""Mean-variance optimization of the PV/wind capacity mix.

Penetration is ``mu(w) = m.w / E_D`` with ``m_k`` the mean capacity factor of
component k and ``E_D`` the mean total demand; risk is
``sigma(w) = sqrt(w' C w)`` with ``C`` the covariance of the ratio series
``eta_k(t) / D(t)``. Pareto-optimal mixes are traced with an epsilon-constraint
scheme that alternates between minimizing risk at fixed penetration and
maximizing penetration at fixed risk.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import ComponentIndex, HourlySeries, Mix, ratio_series, sample_covariance, sample_mean, stack_aligned
from .errors import DomainError, NumericalError, ValidationError
from .ingest import _float, _read_rows, atomic_write_rows, format_float
from .qp import KKTResiduals, Status, active_set_qp, kkt_residuals

log = logging.getLogger(__name__)

DOMINANCE_TOL = 1e-9
MAX_ALTERNATIONS = 50


class Strategy(Enum):
    GLOBAL = "global"
    TECHNOLOGY = "technology"
    BASE = "base"


@dataclass(frozen=True)
class MeanRiskInputs:
    index: ComponentIndex
    m: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    E_D: float
    strategy: Strategy = Strategy.GLOBAL

    def __post_init__(self):
        k = len(self.index)
        m = np.array(self.m, dtype=float)
        c = np.array(self.C, dtype=float)
        if m.shape != (k,) or c.shape != (k, k):
            raise ValidationError("mean vector / covariance do not match the component index")
        if np.any(m < 0):
            raise ValidationError("mean capacity factors must be nonnegative")
        if not self.E_D > 0:
            raise ValidationError("mean total demand must be positive")
        if not np.allclose(c, c.T, rtol=0, atol=1e-14 * max(1.0, np.abs(c).max(initial=0))):
            raise ValidationError("covariance must be symmetric")
        c = (c + c.T) / 2
        m.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "strategy", Strategy(self.strategy))

    def masked(self, strategy: Strategy | str) -> "MeanRiskInputs":
        """Same data with the covariance masked for ``strategy``."""
        return MeanRiskInputs(self.index, self.m, mask_covariance(self.C, self.index, strategy),
                              self.E_D, Strategy(strategy))


def mask_covariance(C, index: ComponentIndex, strategy: Strategy | str) -> np.ndarray:
    strategy = Strategy(strategy)
    C = np.array(C, dtype=float)
    if strategy is Strategy.TECHNOLOGY:
        zones = np.array([z for z, _ in index])
        C = np.where(zones[:, None] == zones[None, :], C, 0.0)
    elif strategy is Strategy.BASE:
        C = np.diag(np.diag(C))
    return C


def assemble_inputs(cfs: Mapping[tuple[str, str], HourlySeries], demand_total: HourlySeries,
                    index: ComponentIndex | None = None,
                    strategy: Strategy | str = Strategy.GLOBAL) -> MeanRiskInputs:
    """Mean vector and masked ratio covariance from zonal capacity factors."""
    if index is None:
        index = ComponentIndex(tuple(cfs))
    try:
        series = [cfs[k] for k in index]
    except KeyError as exc:
        raise ValidationError(f"no capacity-factor series for {exc}") from None
    stack_aligned(series + [demand_total])
    m = np.array([sample_mean(s) for s in series])
    ratios = [ratio_series(s, demand_total) for s in series]
    C = sample_covariance(ratios)
    return MeanRiskInputs(index, m, mask_covariance(C, index, strategy), sample_mean(demand_total), strategy)


def penetration(w, inputs: MeanRiskInputs) -> float:
    return float(np.dot(inputs.m, np.asarray(w, dtype=float)) / inputs.E_D)


def risk(w, inputs: MeanRiskInputs) -> float:
    w = np.asarray(w, dtype=float)
    q = float(w @ inputs.C @ w)
    scale = float(np.abs(w) @ np.abs(inputs.C) @ np.abs(w))
    if q < -1e-12 * max(scale, 1e-300) and q < -1e-12:
        raise NumericalError(f"negative quadratic form {q:.3e} (covariance not PSD?)")
    return math.sqrt(max(q, 0.0))


# --------------------------------------------------------------------------
# generic QP with the constraint families used by the mix problems

@dataclass(frozen=True)
class QPSolution:
    w: np.ndarray | None = field(repr=False)
    status: Status
    kkt: KKTResiduals | None = None
    total_multiplier: float = 0.0
    iterations: int = 0


def _start_point(n, total, a, b):
    """Closed-form feasible point for {w >= 0, sum w = total, a.w >= b}."""
    if total is not None:
        if total < 0:
            return None
        j = int(np.argmax(a)) if a is not None else 0
        w = np.zeros(n)
        w[j] = total
        if a is not None and a @ w < b - 1e-12 * max(1.0, abs(b)):
            return None
        return w
    if a is None or b <= 0:
        return np.zeros(n)
    j = int(np.argmax(a))
    if a[j] <= 0:
        return None
    w = np.zeros(n)
    w[j] = b / a[j]
    return w


def solve_qp(Q, c=None, *, total=None, ineq=None, extra_eq=None, start=None,
             max_iter=500) -> QPSolution:
    """Minimize ``0.5 w'Qw + c'w`` over ``w >= 0`` with optional constraints.

    Parameters
    ----------
    Q : (K, K) array_like
        Symmetric positive semi-definite matrix.
    c : (K,) array_like, optional
        Linear term.
    total : float, optional
        Enforce ``sum(w) == total``.
    ineq : tuple (a, b), optional
        Enforce ``a.w >= b``.
    extra_eq : tuple (A, b), optional
        Additional equality rows ``A w == b`` (used for tie-breaking among
        optimal solutions); requires a feasible ``start``.
    start : (K,) array_like, optional
        Feasible starting point; by default one is built in closed form.

    Returns
    -------
    QPSolution
        ``status`` is Optimal, Infeasible or Unbounded.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    a, b = (None, None) if ineq is None else (np.asarray(ineq[0], dtype=float), float(ineq[1]))
    if start is not None:
        w0 = np.asarray(start, dtype=float)
    else:
        w0 = _start_point(n, total, a, b)
        if w0 is None:
            return QPSolution(None, Status.INFEASIBLE)
    a_eq = [] if total is None else [np.ones(n)]
    b_eq = [] if total is None else [float(total)]
    if extra_eq is not None:
        a_eq += list(np.atleast_2d(extra_eq[0]))
        b_eq += list(np.atleast_1d(extra_eq[1]))
    a_in = [np.eye(n)]
    b_in = [np.zeros(n)]
    if a is not None:
        a_in.append(a[None, :])
        b_in.append([b])
    a_eq = np.array(a_eq, dtype=float).reshape(-1, n)
    b_eq = np.array(b_eq, dtype=float)
    a_in = np.vstack(a_in)
    b_in = np.concatenate([np.asarray(v, dtype=float) for v in b_in])
    res = active_set_qp(Q, c, a_eq, b_eq, a_in, b_in, w0, max_iter=max_iter)
    if res.status is Status.UNBOUNDED:
        return QPSolution(None, Status.UNBOUNDED, iterations=res.iterations)
    w = np.maximum(res.x, 0.0)
    if total is not None and w.sum() > 0:
        w *= total / w.sum()
    kkt = kkt_residuals(Q, c, a_eq, b_eq, a_in, b_in, res.x, res.eq_multipliers, res.in_multipliers)
    nu = float(res.eq_multipliers[0]) if total is not None else 0.0
    return QPSolution(w, Status.OPTIMAL, kkt, nu, res.iterations)


# --------------------------------------------------------------------------
# mix subproblems, solved in scaled variables w = s * x with s = E_D / max(m)

@dataclass(frozen=True)
class _Scaled:
    s: float
    Q: np.ndarray  # scaled risk matrix, x'Qx = (w'Cw) / q_unit
    q_unit: float
    a: np.ndarray  # m / max(m), so a.x >= mu  <=>  m.w >= mu * E_D


def _scaled(inputs: MeanRiskInputs) -> _Scaled:
    m_max = float(inputs.m.max(initial=0.0))
    s = inputs.E_D / m_max if m_max > 0 else inputs.E_D
    C = inputs.C * s * s
    q_unit = float(np.abs(C).max(initial=0.0)) or 1.0
    a = inputs.m / m_max if m_max > 0 else inputs.m.copy()
    return _Scaled(s, C / q_unit, q_unit, a)


@dataclass(frozen=True)
class FrontierPoint:
    w: Mix
    mu: float
    sigma: float
    target_mu: float
    active_total_constraint: bool = False
    converged: bool = True


def _point(inputs, w, target_mu, total, converged=True) -> FrontierPoint:
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    sigma = risk(w, inputs)
    return FrontierPoint(Mix(inputs.index, w), penetration(w, inputs), sigma, float(target_mu),
                         _total_binding(inputs, w, sigma) if total is not None else False, converged)


def _total_binding(inputs: MeanRiskInputs, w, sigma) -> bool:
    """Whether the capacity total carries a nonzero multiplier at ``w``.

    On the support of ``w`` the stationarity condition of the risk problem
    reads ``2 (Cw)_k = lambda m_k + nu``; ``nu`` is fitted by least squares.
    """
    support = w > 1e-12 * max(1.0, w.max(initial=0.0))
    if not support.any():
        return False
    total = float(w.sum())
    g = 2 * (inputs.C @ w)[support]
    A = np.column_stack([inputs.m[support], np.ones(int(support.sum()))])
    (lam, nu), *_ = np.linalg.lstsq(A, g, rcond=None)
    return bool(abs(nu * total) > 1e-6 * 2 * sigma * sigma)


def _is_singular(C) -> bool:
    vals = np.linalg.eigvalsh(C)
    return vals.min(initial=0.0) <= 1e-10 * max(vals.max(initial=0.0), 1e-300)


def solve_p_min(inputs: MeanRiskInputs, mu_star: float, total_capacity: float | None = None):
    """Minimum-risk mix with penetration at least ``mu_star``.

    Returns a FrontierPoint, or ``Status.INFEASIBLE`` when ``mu_star`` is not
    attainable. Among several minimum-risk mixes (singular covariance) the one
    of smallest Euclidean norm is returned.
    """
    if mu_star < 0:
        raise DomainError("target penetration must be nonnegative")
    sc = _scaled(inputs)
    total_x = None if total_capacity is None else total_capacity / sc.s
    sol = solve_qp(2 * sc.Q, total=total_x, ineq=(sc.a, mu_star))
    if sol.status is not Status.OPTIMAL:
        return sol.status
    x = sol.w
    if _is_singular(sc.Q):
        vals, vecs = np.linalg.eigh(sc.Q)
        keep = vals > 1e-10 * max(vals.max(initial=0.0), 1e-300)
        rows = vecs[:, keep].T
        tie = solve_qp(2 * np.eye(x.size), total=total_x, ineq=(sc.a, mu_star),
                       extra_eq=(rows, rows @ x), start=x)
        if tie.status is Status.OPTIMAL:
            x = tie.w
    return _point(inputs, x * sc.s, mu_star, total_capacity)


def _min_risk_on(inputs, sc, support, total_x):
    """Minimum-risk x supported on ``support`` with sum(x) = total_x."""
    idx = np.flatnonzero(support)
    sub = solve_qp(2 * sc.Q[np.ix_(idx, idx)], total=total_x)
    x = np.zeros(sc.a.size)
    x[idx] = sub.w
    return x


def solve_p_max(inputs: MeanRiskInputs, sigma_star: float, total_capacity: float | None = None):
    """Maximum-penetration mix with risk at most ``sigma_star``.

    Returns a FrontierPoint, or a Status (Infeasible / Unbounded).
    """
    if sigma_star < 0:
        raise DomainError("risk bound must be nonnegative")
    sc = _scaled(inputs)
    sig_x = sigma_star / math.sqrt(sc.q_unit)  # sigma(w) = sqrt(q_unit) * sqrt(x'Qx)

    def sigma_x(x):
        return math.sqrt(max(float(x @ sc.Q @ x), 0.0))

    if total_capacity is not None:
        total_x = total_capacity / sc.s
        best = sc.a >= sc.a.max(initial=0.0) * (1 - 1e-12)
        x_lp = _min_risk_on(inputs, sc, best, total_x)
        if sigma_x(x_lp) <= sig_x * (1 + 1e-9) + 1e-15:
            return _point(inputs, x_lp * sc.s, penetration(x_lp * sc.s, inputs), total_capacity)
        x_min = solve_qp(2 * sc.Q, total=total_x).w
        if sigma_x(x_min) > sig_x * (1 + 1e-9) + 1e-15:
            return Status.INFEASIBLE

        def inner(log_theta):
            return solve_qp(math.exp(log_theta) * sc.Q, -sc.a, total=total_x).w

        def f(log_theta):
            return sigma_x(inner(log_theta)) - sig_x

        lo, hi = 0.0, 0.0
        while f(lo) <= 0:
            lo -= 5.0
            if lo < -200:
                return _point(inputs, inner(lo) * sc.s, 0.0, total_capacity)
        while f(hi) > 0:
            hi += 5.0
            if hi > 200:
                return _point(inputs, x_min * sc.s, 0.0, total_capacity)
        root = brentq(f, lo, hi, xtol=1e-13, rtol=1e-14, maxiter=500)
        for bump in (0.0, 1e-12, 1e-10, 1e-8, 1e-6):
            x = inner(root + bump)
            if sigma_x(x) <= sig_x * (1 + 1e-9) + 1e-15:
                break
        else:
            x = inner(hi)
        return _point(inputs, x * sc.s, penetration(x * sc.s, inputs), total_capacity)

    if sig_x == 0:
        return _point(inputs, np.zeros(sc.a.size), 0.0, None) if not _zero_risk_ray(sc) else Status.UNBOUNDED
    sol = solve_qp(sc.Q, -sc.a)
    if sol.status is Status.UNBOUNDED:
        return Status.UNBOUNDED
    v = sol.w
    sv = sigma_x(v)
    if sv == 0:
        return _point(inputs, np.zeros(sc.a.size), 0.0, None)
    x = v * (sig_x / sv)
    return _point(inputs, x * sc.s, penetration(x * sc.s, inputs), None)


def _zero_risk_ray(sc: _Scaled) -> bool:
    """True if some w >= 0 with positive penetration has zero risk."""
    return solve_qp(sc.Q, -sc.a).status is Status.UNBOUNDED


@dataclass(frozen=True)
class ObjectiveBounds:
    l_of1: float  # minimum variance
    u_of1: float  # maximum variance
    l_of2: float  # minimum of m.w
    u_of2: float  # maximum of m.w


def objective_bounds(inputs: MeanRiskInputs, total_capacity: float | None = None,
                     mu_max_cap: float = 1.0) -> ObjectiveBounds:
    """Ranges of the variance ``w'Cw`` and of the mean production ``m.w``."""
    if total_capacity is None:
        return ObjectiveBounds(0.0, math.inf, 0.0, mu_max_cap * inputs.E_D)
    W = float(total_capacity)
    sol = solve_qp(2 * inputs.C, total=W)
    l_of1 = float(sol.w @ inputs.C @ sol.w)
    # w'Cw is convex, so its maximum on the simplex sits at a vertex
    u_of1 = W * W * float(np.diag(inputs.C).max())
    return ObjectiveBounds(l_of1, u_of1, W * float(inputs.m.min()), W * float(inputs.m.max()))


@dataclass(frozen=True)
class Frontier:
    points: tuple[FrontierPoint, ...]
    strategy: Strategy
    total_capacity: float | None
    step: float

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.points])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([p.sigma for p in self.points])

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.w.w for p in self.points]).reshape(len(self.points), -1)


def dominance_filter(points: Sequence[FrontierPoint], tol: float = DOMINANCE_TOL) -> list[FrontierPoint]:
    """Drop points beaten by another point; of equal points keep the first."""
    keep = []
    for j, b in enumerate(points):
        dominated = False
        for i, a in enumerate(points):
            if i == j:
                continue
            if a.mu >= b.mu - tol and a.sigma <= b.sigma + tol:
                if a.mu > b.mu + tol or a.sigma < b.sigma - tol or i < j:
                    dominated = True
                    break
        if not dominated:
            keep.append(b)
    return keep


def mu_grid(lower: float, upper: float, step: float) -> np.ndarray:
    if not step > 0:
        raise DomainError("frontier step must be positive")
    n = int(math.floor((upper - lower) / step * (1 + 1e-12) + 1e-9))
    return lower + np.arange(n + 1) * step


def frontier_point(inputs: MeanRiskInputs, mu_star: float, step: float,
                   total_capacity: float | None = None):
    """Alternate P^min and P^max from ``mu_star`` until penetration stops rising."""
    tol = step / 100
    mu = mu_star
    point = None
    for _ in range(MAX_ALTERNATIONS):
        p_min = solve_p_min(inputs, mu, total_capacity)
        if isinstance(p_min, Status):
            return p_min if point is None else point
        p_max = solve_p_max(inputs, p_min.sigma, total_capacity)
        if isinstance(p_max, Status):
            p_max = p_min
        point = FrontierPoint(p_max.w, p_max.mu, p_max.sigma, mu_star, p_max.active_total_constraint)
        if p_max.mu > mu + tol:
            mu = p_max.mu
            continue
        return point
    log.warning("alternating loop did not converge at target %.6g", mu_star)
    return FrontierPoint(point.w, point.mu, point.sigma, mu_star, point.active_total_constraint, False)


def compute_frontier(inputs: MeanRiskInputs, step: float = 0.001,
                     total_capacity: float | None = None, mu_max_cap: float = 1.0,
                     dominance_tol: float = DOMINANCE_TOL) -> Frontier:
    """Pareto frontier on the penetration grid ``l_of2/E_D .. u_of2/E_D``."""
    bounds = objective_bounds(inputs, total_capacity, mu_max_cap)
    grid = mu_grid(bounds.l_of2 / inputs.E_D, bounds.u_of2 / inputs.E_D, step)
    points = []
    for j, mu_star in enumerate(grid):
        pt = frontier_point(inputs, float(mu_star), step, total_capacity)
        if isinstance(pt, Status):
            log_fn = log.debug if j >= len(grid) - 1 else log.warning
            log_fn("target penetration %.6g: %s", mu_star, pt.value)
            continue
        points.append(pt)
    return Frontier(tuple(dominance_filter(points, dominance_tol)), inputs.strategy, total_capacity, step)


def mean_risk_ratio(frontier) -> tuple[float, float]:
    """Slope ``alpha`` of mu = alpha * sigma through the origin, and the
    largest relative deviation of the per-point ratios mu/sigma from it."""
    if isinstance(frontier, Frontier):
        mu, sigma = frontier.mu, frontier.sigma
    else:
        mu, sigma = (np.asarray(v, dtype=float) for v in frontier)
    if mu.size == 0 or not np.any(sigma > 0):
        raise DomainError("mean-risk ratio undefined: all risks are zero")
    alpha = float(np.sum(mu * sigma) / np.sum(sigma * sigma))
    pos = sigma > 0
    dev = float(np.max(np.abs(mu[pos] / sigma[pos] - alpha)) / abs(alpha)) if alpha else math.inf
    return alpha, dev


def frontier_header(index: ComponentIndex) -> list[str]:
    return ["strategy", "target_mu", "mu", "sigma", "active_total_constraint",
            *(f"w_{label}" for label in index.labels())]


def write_frontier(path, frontier: Frontier, index: ComponentIndex):
    atomic_write_rows(path, frontier_header(index), (
        [frontier.strategy.value, format_float(p.target_mu), format_float(p.mu),
         format_float(p.sigma), "true" if p.active_total_constraint else "false",
         *map(format_float, p.w.w)]
        for p in frontier.points
    ))


def read_frontier(path, index: ComponentIndex, total_capacity: float | None = None) -> Frontier:
    path, header, rows = _read_rows(path)
    if header != frontier_header(index):
        raise ValidationError(f"{path}: frontier columns do not match the study components")
    points = []
    strategy = None
    for n, r in rows:
        strategy = Strategy(r[0])
        w = [_float(v, path, n, "w") for v in r[5:]]
        points.append(FrontierPoint(Mix(index, w), _float(r[2], path, n, "mu"), _float(r[3], path, n, "sigma"),
                                    _float(r[1], path, n, "target_mu"), r[4] == "true"))
    return Frontier(tuple(points), strategy or Strategy.GLOBAL, total_capacity, float("nan"))
