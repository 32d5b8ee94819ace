"""The multiplicative (power) algorithm for the design problem.

Each iteration rescales every weight by its directional score raised to the
power ``lambda`` and renormalizes::

    w_i <- w_i d_i(w)**lam / sum_j w_j d_j(w)**lam,   d(w) = -M^T svec(grad Phi(M w))

It is kept as a baseline for the interior-point solver.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import criteria
from .exceptions import ConfigError, DegenerateScores, NotOnSimplex
from .problem import DesignProblem
from .report import SolveReport

WEIGHT_FLOOR = 1e-300


@dataclass(frozen=True)
class MultConfig:
    lam: float = 1.0
    delta: float = 2e-4
    max_iters: int = 10000
    track_minimum: bool = True

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ConfigError(f"lambda must lie in (0, 1], got {self.lam}")
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be nonnegative")


@dataclass
class MultState:
    w: np.ndarray
    iter: int
    objective: float
    best_objective: float
    best_w: np.ndarray


def _scores_and_value(problem: DesignProblem, w: np.ndarray):
    X = problem.moment_matrix(w)
    ev = criteria.evaluate(problem.criterion, X)
    return -(problem.svec_design.T @ ev.grad_svec), ev.value


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or np.any(w <= 0):
        raise NotOnSimplex("weights must be strictly positive")
    return w


def directional_scores(problem: DesignProblem, w) -> np.ndarray:
    """``d_i(w) = -trace(grad Phi(M(w)) A_i)`` for every atom at once."""
    return _scores_and_value(problem, _check_weights(w))[0]


def _update(w: np.ndarray, d: np.ndarray, lam: float) -> np.ndarray:
    if np.any(d < 0):
        # only rounding can make a score negative; treat it as zero
        d = np.maximum(d, 0.0)
    scaled = w * (d if lam == 1.0 else d ** lam)
    total = scaled.sum()
    if not total > 0:
        raise DegenerateScores("all weighted scores vanish")
    new = np.maximum(scaled / total, WEIGHT_FLOOR)
    return new / new.sum()


def step(problem: DesignProblem, w, config: MultConfig = MultConfig()) -> np.ndarray:
    """One multiplicative update."""
    w = _check_weights(w)
    return _update(w, directional_scores(problem, w), config.lam)


def _stop(w: np.ndarray, d: np.ndarray, delta: float) -> bool:
    return bool(d.max() <= (1.0 + delta) * (w @ d))


def converged(problem: DesignProblem, w, config: MultConfig = MultConfig()) -> bool:
    """``max_i d_i <= (1 + delta) sum_i w_i d_i``."""
    w = _check_weights(w)
    return _stop(w, directional_scores(problem, w), config.delta)


def solve(
    problem: DesignProblem,
    config: MultConfig = MultConfig(),
    callback: Optional[Callable[[MultState], None]] = None,
    w0=None,
) -> SolveReport:
    """Iterate from the uniform design until the stopping rule or the iteration cap.

    When ``track_minimum`` is set the report also carries the smallest objective
    seen and its weights; for ``p < -1`` the iterates need not descend.
    """
    t0 = time.perf_counter()
    n = problem.n
    w = np.full(n, 1.0 / n) if w0 is None else _check_weights(w0)
    d, obj = _scores_and_value(problem, w)
    state = MultState(w, 0, obj, obj, w)
    trace = []
    reason = "MaxIters"
    while True:
        if config.track_minimum and state.objective < state.best_objective:
            state.best_objective, state.best_w = state.objective, state.w
        if _stop(state.w, d, config.delta):
            reason = "Converged"
            break
        if state.iter >= config.max_iters:
            break
        w = _update(state.w, d, config.lam)
        d, obj = _scores_and_value(problem, w)
        state = MultState(w, state.iter + 1, obj, state.best_objective, state.best_w)
        trace.append(obj)
        if callback is not None:
            callback(state)
    report = SolveReport(
        solver="mult",
        weights=state.w,
        objective=state.objective,
        iterations=state.iter,
        termination_reason=reason,
        wall_time_seconds=time.perf_counter() - t0,
        trace=trace,
        criterion=problem.criterion.describe(),
        label=problem.label,
    )
    if config.track_minimum:
        report.best_objective = state.best_objective
        report.best_weights = state.best_w
    return report
