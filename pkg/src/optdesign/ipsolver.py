"""Primal log-barrier interior-point method on the reduced simplex.

The free variables are the first ``n-1`` weights ``wt``; the last weight is
``1 - sum(wt)``.  For a barrier parameter ``mu`` the subproblem is

    f_mu(wt) = phi(M w) - mu * sum(log wt) - mu * log(1 - sum(wt))

and is minimized by damped Newton steps.  The Hessian of ``f_mu`` is a
positive diagonal plus a matrix of rank at most ``m(m+1)/2 + 1``, so the
Newton system is solved with the Sherman-Morrison-Woodbury identity at
``O(n r^2)`` cost.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import criteria, symlin
from .exceptions import (
    CapacitanceSingular,
    ConfigError,
    LineSearchStalled,
    MaxInnerExceeded,
    NotInterior,
    NotPositiveDefinite,
    SingularInformationMatrix,
)
from .problem import DesignProblem, apply_Pt
from .report import SolveReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IPConfig:
    mu1: float = 10.0
    beta: float = 0.5
    gamma: float = 0.5
    sigma: float = 0.1
    eta: float = 0.95
    eps_floor: float = 1e-10
    mu_stop: float = 1e-10
    max_inner: int = 200
    max_backtracks: int = 60
    # once the decrease Armijo asks for (sigma alpha |g.d|) is below this
    # fraction of |f_mu| it is lost in rounding, and trial points are judged by
    # the gradient norm instead
    flat_rtol: float = 1e-10
    flat_backtracks: int = 4
    # re-pivot when the eliminated weight drops below this fraction of the largest
    pivot_ratio: float = 0.1

    def __post_init__(self):
        if not self.mu1 > 0:
            raise ConfigError("mu1 must be positive")
        for name in ("beta", "gamma", "sigma", "eta"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ConfigError(f"{name} must lie in (0, 1), got {val}")
        if self.eps_floor < 0 or not self.mu_stop > 0:
            raise ConfigError("eps_floor must be >= 0 and mu_stop > 0")
        if self.max_inner < 1 or self.max_backtracks < 0:
            raise ConfigError("iteration caps must be positive")

    def epsilon(self, mu: float) -> float:
        """Inner-loop gradient tolerance; increasing in mu, vanishing as mu -> 0."""
        return max(mu, self.eps_floor)


@dataclass
class TraceRecord:
    outer: int
    inner: int
    mu: float
    f_mu: float
    grad_norm: float
    alpha: float
    backtracks: int
    min_wt: float
    last_weight: float  # the eliminated weight, 1 - sum(wt)
    weights: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        out = asdict(self)
        del out["weights"]
        return out


@dataclass(frozen=True)
class KKTDiagnostics:
    v: np.ndarray
    u: np.ndarray
    complementarity_gap: float
    primal_feasibility: float

    @property
    def dual_residual(self) -> float:
        return float(np.linalg.norm(self.v))

    def summary(self) -> dict:
        return {
            "dual_residual": self.dual_residual,
            "complementarity_gap": self.complementarity_gap,
            "primal_feasibility": self.primal_feasibility,
        }


class _Point:
    """Everything needed at one interior reduced point."""

    __slots__ = ("wt", "w", "last", "X", "ev")

    def __init__(self, problem: DesignProblem, wt, with_hessian: bool = False):
        wt = np.asarray(wt, dtype=float)
        if wt.shape != (problem.n - 1,):
            raise NotInterior(f"reduced weights must have length {problem.n - 1}")
        last = 1.0 - np.sum(wt)
        if not (np.all(wt > 0) and last > 0):
            raise NotInterior("point is not strictly inside the simplex")
        self.wt = wt
        self.last = last
        self.w = np.append(wt, last)
        self.X = symlin.smat(problem.svec_design @ self.w)
        self.ev = criteria.evaluate(problem.criterion, self.X, with_hessian=with_hessian)

    def barrier(self, mu: float) -> float:
        return self.ev.value - mu * (np.sum(np.log(self.wt)) + math.log(self.last))

    def grad(self, problem: DesignProblem, mu: float) -> np.ndarray:
        y = problem.svec_design.T @ self.ev.grad_svec - mu / self.w
        return apply_Pt(y)


def _require_hessian(problem: DesignProblem, pt: _Point) -> criteria.HessianFactor:
    if pt.ev.hessian is None:
        pt.ev = criteria.evaluate(problem.criterion, pt.X, with_hessian=True)
    return pt.ev.hessian


def barrier_value(problem: DesignProblem, wt, mu: float) -> float:
    return _Point(problem, wt).barrier(mu)


def barrier_grad(problem: DesignProblem, wt, mu: float) -> np.ndarray:
    return _Point(problem, wt).grad(problem, mu)


def _smw_direction(problem: DesignProblem, pt: _Point, g: np.ndarray, mu: float) -> np.ndarray:
    hess = _require_hessian(problem, pt)
    F = hess.sqrt_factor()  # hess phi = F F^T
    MF = problem.svec_design.T @ F
    U = np.empty((problem.n - 1, F.shape[1] + 1))
    U[:, :-1] = apply_Pt(MF)
    U[:, -1] = math.sqrt(mu) / pt.last
    dinv = pt.wt ** 2 / mu  # inverse of the diagonal part mu * diag(wt^-2)
    DU = dinv[:, None] * U
    cap = U.T @ DU
    cap[np.diag_indices_from(cap)] += 1.0
    cho = _factor_capacitance(cap)
    z = dinv * g
    s = scipy.linalg.cho_solve(cho, U.T @ z)
    return -(z - DU @ s)


def _factor_capacitance(cap: np.ndarray):
    try:
        return scipy.linalg.cho_factor(cap, lower=True)
    except np.linalg.LinAlgError:
        pass
    ridge = 1e-12 * np.trace(cap) / cap.shape[0]
    try:
        return scipy.linalg.cho_factor(cap + ridge * np.eye(cap.shape[0]), lower=True)
    except np.linalg.LinAlgError:
        raise CapacitanceSingular("capacitance matrix is not positive definite") from None


def newton_direction(problem: DesignProblem, wt, mu: float) -> np.ndarray:
    """Newton direction for ``f_mu`` via the low-rank (Woodbury) solve."""
    pt = _Point(problem, wt, with_hessian=True)
    return _smw_direction(problem, pt, pt.grad(problem, mu), mu)


def barrier_hessian_dense(problem: DesignProblem, wt, mu: float) -> np.ndarray:
    """Full (n-1)-order Hessian of ``f_mu``; for verification on small n only."""
    pt = _Point(problem, wt)
    H = criteria.hessian_matrix(problem.criterion, pt.X)
    MP = apply_Pt(problem.svec_design.T).T  # M P
    out = MP.T @ H @ MP
    out += mu / pt.last ** 2
    out[np.diag_indices_from(out)] += mu / pt.wt ** 2
    return out


def dense_newton_direction(problem: DesignProblem, wt, mu: float) -> np.ndarray:
    """Newton direction from a dense Cholesky solve (oracle for the Woodbury path)."""
    H = barrier_hessian_dense(problem, wt, mu)
    g = barrier_grad(problem, wt, mu)
    return -scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), g)


def max_step(wt, d) -> float:
    """Largest alpha keeping ``wt + alpha d >= 0`` and ``sum(wt + alpha d) <= 1``."""
    wt = np.asarray(wt, dtype=float)
    d = np.asarray(d, dtype=float)
    alpha = math.inf
    neg = d < 0
    if np.any(neg):
        alpha = float(np.min(-wt[neg] / d[neg]))
    ed = float(np.sum(d))
    if ed > 0:
        alpha = min(alpha, (1.0 - float(np.sum(wt))) / ed)
    return alpha


@dataclass
class LineSearchResult:
    alpha: float
    point: _Point
    f_new: float
    backtracks: int


def _line_search(problem, pt: _Point, g, d, mu, config: IPConfig, f0: Optional[float] = None) -> Optional[LineSearchResult]:
    if f0 is None:
        f0 = pt.barrier(mu)
    slope = float(g @ d)
    noise = config.flat_rtol * max(1.0, abs(f0))
    gnorm = float(np.linalg.norm(g))
    alpha = min(1.0, config.eta * max_step(pt.wt, d))
    flat_trials = 0
    for j in range(config.max_backtracks + 1):
        flat = config.sigma * alpha * -slope <= noise
        if flat:
            flat_trials += 1
            if flat_trials > config.flat_backtracks + 1:
                return None  # gradient is at its rounding floor for this mu
        trial = pt.wt + alpha * d
        try:
            new = _Point(problem, trial)
            f_new = new.barrier(mu)
        except (NotInterior, NotPositiveDefinite, SingularInformationMatrix):
            f_new = math.inf
        if not np.any(d):
            ok = True
        elif flat:
            gnew = np.linalg.norm(new.grad(problem, mu)) if math.isfinite(f_new) else math.inf
            ok = gnew < gnorm and gnew <= (1 - config.sigma * alpha) * gnorm
        else:
            ok = f_new <= f0 + config.sigma * alpha * slope
        if ok:
            return LineSearchResult(alpha, new, f_new, j)
        alpha *= config.beta
    if flat_trials:
        return None
    raise LineSearchStalled(f"Armijo condition failed after {config.max_backtracks} backtracks (mu={mu:.3g})")


def line_search(problem: DesignProblem, wt, d, mu: float, config: IPConfig = IPConfig()):
    """Armijo backtracking from ``min(1, eta * alpha_max)``.

    Returns ``(alpha, new_wt)``.
    """
    pt = _Point(problem, wt)
    res = _line_search(problem, pt, pt.grad(problem, mu), np.asarray(d, dtype=float), mu, config)
    if res is None:
        return 0.0, pt.wt
    return res.alpha, res.point.wt


def kkt_diagnostics(problem: DesignProblem, wt, mu: float) -> KKTDiagnostics:
    """Residuals of the perturbed KKT system with ``u = mu / w``."""
    pt = _Point(problem, wt)
    u = mu / pt.w
    v = apply_Pt(problem.svec_design.T @ pt.ev.grad_svec - u)
    return KKTDiagnostics(
        v=v, u=u, complementarity_gap=float(mu), primal_feasibility=abs(math.fsum(pt.w) - 1.0)
    )


def _repivot(full: DesignProblem, perm: np.ndarray, pt: _Point):
    """Move the largest weight into the eliminated (last) slot."""
    w = pt.w
    j = int(np.argmax(w))
    n = w.size
    order = np.arange(n)
    order[[j, n - 1]] = order[[n - 1, j]]
    perm = perm[order]
    problem = full.with_columns(perm)
    return perm, problem, _Point(problem, w[order][:-1])


def solve(
    problem: DesignProblem,
    config: IPConfig = IPConfig(),
    callback: Optional[Callable[[TraceRecord], None]] = None,
    wt0=None,
) -> SolveReport:
    """Run the outer barrier schedule ``mu_{k+1} = gamma mu_k`` down to ``mu_stop``.

    The report's ``termination_reason`` is ``"Converged"`` when the last level
    met its gradient tolerance and ``"PrecisionFloor"`` when rounding stopped it
    first; ``flags`` lists every level that ended at the floor.
    """
    t0 = time.perf_counter()
    n = problem.n
    if n == 1:
        w = np.ones(1)
        obj = criteria.value(problem.criterion, problem.moment_matrix(w))
        return SolveReport(
            solver="ip", weights=w, objective=obj, iterations=0, termination_reason="Converged",
            wall_time_seconds=time.perf_counter() - t0, criterion=problem.criterion.describe(),
            label=problem.label,
        )
    wt = np.full(n - 1, 1.0 / n) if wt0 is None else np.asarray(wt0, dtype=float)
    full = problem
    perm = np.arange(n)
    pt = _Point(problem, wt)
    mu = config.mu1
    outer = 0
    inner_total = 0
    trace, mu_trace, flags = [], [], []
    while True:
        outer += 1
        if pt.last < config.pivot_ratio * pt.wt.max():
            # Newton steps do not depend on which weight is eliminated, but
            # 1 - sum(wt) loses all precision once the eliminated weight is tiny
            perm, problem, pt = _repivot(full, perm, pt)
        eps = config.epsilon(mu)
        f = pt.barrier(mu)
        g = pt.grad(problem, mu)
        gnorm = float(np.linalg.norm(g))
        inner = 0
        floored = False
        while gnorm > eps:
            if inner >= config.max_inner:
                msg = f"inner loop exceeded {config.max_inner} Newton steps at mu={mu:.3g} (|grad|={gnorm:.3g})"
                flags.append(msg)
                exc = MaxInnerExceeded(msg)
                exc.report = _report(problem, perm, pt, mu, outer, inner_total + inner, mu_trace,
                                     trace, flags, t0, "MaxInnerExceeded")
                raise exc
            d = _smw_direction(problem, pt, g, mu)
            res = _line_search(problem, pt, g, d, mu, config, f0=f)
            if res is None:
                flags.append(f"precision floor: |grad|={gnorm:.3g} at mu={mu:.3g}")
                logger.info(flags[-1])
                floored = True
                break
            pt = res.point
            f = res.f_new
            g = pt.grad(problem, mu)
            gnorm = float(np.linalg.norm(g))
            inner += 1
            rec = TraceRecord(outer, inner, mu, f, gnorm, res.alpha, res.backtracks,
                              float(pt.wt.min()), float(pt.last))
            trace.append(rec.as_dict())
            if callback is not None:
                rec.weights = np.empty(n)
                rec.weights[perm] = pt.w
                callback(rec)
        inner_total += inner
        mu_trace.append(mu)
        logger.debug("mu=%.3g inner=%d obj=%.10g", mu, inner, pt.ev.value)
        if mu <= config.mu_stop:
            break
        mu *= config.gamma
    # the last level either met its gradient tolerance or stopped at the rounding floor
    reason = "PrecisionFloor" if floored else "Converged"
    return _report(problem, perm, pt, mu, outer, inner_total, mu_trace, trace, flags, t0, reason)


def _report(problem, perm, pt, mu, outer, inner_total, mu_trace, trace, flags, t0, reason) -> SolveReport:
    kkt = kkt_diagnostics(problem, pt.wt, mu)
    weights = np.empty(problem.n)
    weights[perm] = pt.w
    return SolveReport(
        solver="ip",
        weights=weights,
        objective=pt.ev.value,
        iterations=outer,
        inner_iterations=inner_total,
        termination_reason=reason,
        wall_time_seconds=time.perf_counter() - t0,
        mu_trace=mu_trace,
        trace=trace,
        kkt=kkt.summary(),
        flags=flags,
        criterion=problem.criterion.describe(),
        label=problem.label,
    )
