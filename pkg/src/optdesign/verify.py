"""Self-checks: derivative and rank oracles, Newton-solve fidelity, analytic
optima and reference benchmark values.

Each suite returns a list of :class:`Check` records; nothing here raises on a
failed check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional

import numpy as np

from . import criteria, ipsolver, multsolver, symlin
from .criteria import CriterionSpec
from .problem import assemble, from_matrices, generate_space

PMEAN_ORDERS = (-0.25, -0.75, -1.0, -1.1, -2.0)
GRAD_RTOL = 1e-6
HESS_RTOL = 1e-5
RANK_RTOL = 1e-8
SMW_RTOL = 1e-8


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name}: measured {self.measured:.3g} (tol {self.tolerance:.3g}){extra}"


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# ----------------------------------------------------------------- criterion sweep


def criterion_cases(m_values=range(2, 6), seed: int = 0, orthonormal: bool = False) -> Iterator[CriterionSpec]:
    """Every criterion kind for each ``m`` and ``k <= m``; random Gaussian K plus K = I.

    With ``orthonormal`` the random K has orthonormal columns, which keeps the
    spread of Hessian eigenvalues down to that of X itself.
    """
    rng = np.random.default_rng(seed)
    kinds = [("A", None), ("C", None), ("D", None)] + [("PMean", p) for p in PMEAN_ORDERS]
    for m in m_values:
        for kind, p in kinds:
            ks = [1] if kind == "C" else range(1, m + 1)
            for k in ks:
                K = rng.standard_normal((m, k))
                if orthonormal:
                    K = np.linalg.qr(K)[0]
                yield CriterionSpec.make(kind, m, K, p)
            if kind != "C":
                yield CriterionSpec.make(kind, m, None, p)


def _fd_gradient(spec: CriterionSpec, X: np.ndarray, h: float) -> np.ndarray:
    basis = symlin.smat(np.eye(symlin.svec_dim(spec.m)))
    return np.array([
        (criteria.value(spec, X + h * E) - criteria.value(spec, X - h * E)) / (2 * h) for E in basis
    ])


def _fd_hessian(spec: CriterionSpec, X: np.ndarray, h: float) -> np.ndarray:
    basis = symlin.smat(np.eye(symlin.svec_dim(spec.m)))
    cols = [
        (criteria.grad(spec, X + h * E).grad_svec - criteria.grad(spec, X - h * E).grad_svec) / (2 * h)
        for E in basis
    ]
    return np.array(cols).T


def derivative_errors(spec: CriterionSpec, X: np.ndarray):
    """Relative gradient and Hessian errors against central differences."""
    scale = np.linalg.norm(X, 2)
    g = criteria.grad(spec, X).grad_svec
    g_err = _rel(g, _fd_gradient(spec, X, 1e-5 * scale))
    H = criteria.hessian(spec, X, strict=False).matrix()
    h_err = _rel(H, _fd_hessian(spec, X, 1e-5 * scale))
    return g_err, h_err


def derivatives_suite(samples: int = 20, seed: int = 1) -> List[Check]:
    rng = np.random.default_rng(seed)
    worst = {}
    for spec in criterion_cases():
        key = spec.describe().split(",")[0]
        for _ in range(samples):
            X = symlin.random_spd(spec.m, rng)
            g_err, h_err = derivative_errors(spec, X)
            gw, hw = worst.get(key, (0.0, 0.0))
            worst[key] = (max(gw, g_err), max(hw, h_err))
    out = []
    for key, (gw, hw) in worst.items():
        out.append(Check(f"gradient {key}", gw < GRAD_RTOL, gw, GRAD_RTOL))
        out.append(Check(f"hessian {key}", hw < HESS_RTOL, hw, HESS_RTOL))
    return out


def numerical_rank(H: np.ndarray, rtol: float = RANK_RTOL) -> int:
    ev = np.linalg.eigvalsh(H)
    return int(np.count_nonzero(ev > rtol * ev.max()))


def ranks_suite(samples: int = 3, seed: int = 2) -> List[Check]:
    rng = np.random.default_rng(seed)
    out = []
    for spec in criterion_cases(orthonormal=True):
        expected = criteria.analytic_rank(spec)
        got = [numerical_rank(criteria.hessian_matrix(spec, symlin.random_spd(spec.m, rng))) for _ in range(samples)]
        bad = [r for r in got if r != expected]
        out.append(Check(
            f"rank {spec.describe()} m={spec.m} k={spec.k}", not bad, float(len(bad)), 0.0,
            f"expected {expected}, got {sorted(set(got))}",
        ))
    return out


# ------------------------------------------------------------------- Newton solves

SMW_CRITERIA = (("A", None), ("C", None), ("D", None), ("PMean", -0.25), ("PMean", -0.75), ("PMean", -1.1))


def trajectory_points(problem, count: int = 5, config: ipsolver.IPConfig = ipsolver.IPConfig()):
    """Interior points where successive barrier levels start, as ``(wt, mu)`` pairs.

    The iterate that finishes level ``mu`` is paired with the next level
    ``gamma * mu``, so each Newton step measured is a full first step.
    """
    last = {}

    def sink(rec):
        last[rec.outer] = rec

    try:
        ipsolver.solve(problem, config, callback=sink)
    except Exception:
        pass  # keep whatever trajectory was produced
    points = []
    for outer in sorted(last)[:count]:
        rec = last[outer]
        points.append((rec.weights[:-1].copy(), rec.mu * config.gamma))
    return points


def smw_suite(n: int = 200, families=("chi2", "chi4")) -> List[Check]:
    out = []
    for family in families:
        space = generate_space(family, n)
        for kind, p in SMW_CRITERIA:
            K = np.ones((space.m, 1)) if kind == "C" else None
            problem = assemble(space, CriterionSpec.make(kind, space.m, K, p))
            points = trajectory_points(problem)
            diffs = [
                _rel(ipsolver.newton_direction(problem, wt, mu), ipsolver.dense_newton_direction(problem, wt, mu))
                for wt, mu in points
            ]
            worst = max(diffs) if diffs else math.inf
            out.append(Check(
                f"smw {family}({n}) {problem.criterion.describe()}",
                len(diffs) == 5 and worst < SMW_RTOL, worst, SMW_RTOL, f"{len(diffs)} points",
            ))
    return out


# ------------------------------------------------------------------- small optima


def _eig2(a, b, c):
    """Eigenvalues of the symmetric 2x2 matrices [[a, b], [b, c]]."""
    t = 0.5 * (a + c)
    r = np.hypot(0.5 * (a - c), b)
    return np.stack([t + r, t - r], -1)


def _closed_form_values(spec: CriterionSpec, X: np.ndarray) -> np.ndarray:
    """Criterion values for a stack of 1x1 or 2x2 matrices without eigensolvers."""
    if spec.identity:
        with np.errstate(divide="ignore"):
            lam = 1.0 / (X[:, :, 0] if spec.m == 1 else _eig2(X[:, 0, 0], X[:, 0, 1], X[:, 1, 1]))
    else:
        if spec.m == 1:
            Xinv = 1.0 / X
        else:
            a, b, c = X[:, 0, 0], X[:, 0, 1], X[:, 1, 1]
            det = a * c - b * b
            Xinv = np.stack([np.stack([c, -b], -1), np.stack([-b, a], -1)], -2) / det[:, None, None]
        Y = spec.K.T @ Xinv @ spec.K
        lam = Y[:, :, 0] if spec.k == 1 else _eig2(Y[:, 0, 0], Y[:, 0, 1], Y[:, 1, 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        if spec.kind in ("A", "C"):
            vals = lam.sum(-1)
        elif spec.kind == "D":
            vals = np.log(lam).sum(-1)
        else:
            vals = (lam ** (-spec.p)).sum(-1)
    return np.where(np.isfinite(vals), vals, np.inf)


def grid_minimum(problem, step: float = 1e-4) -> float:
    """Smallest objective over the simplex grid ``{w : w_i in step * Z}`` (n <= 3, m <= 2)."""
    n, m = problem.n, problem.m
    if n > 3 or m > 2:
        raise ValueError("grid oracle only covers n <= 3 and m <= 2")
    flat = problem.atoms().reshape(n, m * m)
    N = int(round(1 / step))
    best = math.inf
    if n == 2:
        i = np.arange(N + 1)
        W = np.column_stack([i, N - i]) / N
        return float(_closed_form_values(problem.criterion, (W @ flat).reshape(-1, m, m)).min())
    j = np.arange(N + 1)
    for start in range(0, N + 1, 200):
        i = np.arange(start, min(start + 200, N + 1))[:, None]
        mask = j[None, :] <= N - i
        I, J = np.broadcast_to(i, mask.shape)[mask], np.broadcast_to(j, mask.shape)[mask]
        W = np.column_stack([I, J, N - I - J]) / N
        vals = _closed_form_values(problem.criterion, (W @ flat).reshape(-1, m, m))
        best = min(best, float(vals.min()))
    return best


def tiny_problem(kind: str):
    """Two scalar atoms 1 and 2: the optimum puts all weight on the second."""
    return from_matrices([[[1.0]], [[2.0]]], CriterionSpec.make(kind, 1))


def random_small_problems(seed: int = 3):
    rng = np.random.default_rng(seed)
    for n, m in ((2, 1), (3, 1), (2, 2), (3, 2)):
        for kind, p in (("A", None), ("D", None), ("PMean", -0.5)):
            pts = rng.standard_normal((n, m)) if m > 1 else rng.uniform(0.5, 2.0, (n, 1))
            atoms = np.einsum("ni,nj->nij", pts, pts) + 0.1 * np.eye(m)
            yield from_matrices(atoms, CriterionSpec.make(kind, m, None, p), label=f"random n={n} m={m}")


def tiny_analytic_suite(step: float = 1e-4) -> List[Check]:
    out = []
    for kind, target in (("A", 0.5), ("D", math.log(0.5))):
        obj = ipsolver.solve(tiny_problem(kind)).objective
        err = abs(obj - target)
        out.append(Check(f"tiny {kind} optimum", err < 1e-6, err, 1e-6))
    for problem in random_small_problems():
        obj = ipsolver.solve(problem).objective
        grid = grid_minimum(problem, step)
        # ip must be no worse than any grid point and within grid resolution of the best
        below = obj - grid
        tol = 1e-9 * max(1.0, abs(grid))
        ok = below <= tol and grid - obj <= 1e-3 * max(1.0, abs(grid))
        out.append(Check(
            f"grid {problem.label} {problem.criterion.describe()}", ok, below, tol,
            f"ip {obj:.10g} grid {grid:.10g}",
        ))
    return out


# ----------------------------------------------------------------- reference values


@dataclass(frozen=True)
class TableCase:
    family: str
    n: int
    kind: str
    p: Optional[float]
    solver: str
    expected: float
    rtol: float
    use_best: bool = False


TABLE_CASES = (
    TableCase("chi1", 10000, "A", None, "ip", 53848.3, 1e-4),
    TableCase("chi4", 10000, "A", None, "ip", 170.775, 1e-4),
    TableCase("chi1", 10000, "D", None, "ip", 20.5119, 1e-4),
    TableCase("chi1", 10000, "D", None, "mult", 20.5125, 1e-3),
    TableCase("chi3", 100, "D", None, "ip", 5.14267, 1e-4),
    TableCase("chi4", 10000, "PMean", -0.25, "ip", 7.25955, 1e-4),
    TableCase("chi2", 10000, "PMean", -0.75, "ip", 27.4811, 1e-4),
    TableCase("chi4", 10000, "PMean", -1.1, "ip", 277.597, 1e-3),
    TableCase("chi4", 10000, "PMean", -1.1, "mult", 297.604, 1e-3, use_best=True),
    TableCase("chi1", 10000, "A", None, "mult", 54286.3, 1e-3),
)


def run_table_case(case: TableCase):
    space = generate_space(case.family, case.n)
    problem = assemble(space, CriterionSpec.make(case.kind, space.m, None, case.p))
    solver = ipsolver.solve if case.solver == "ip" else multsolver.solve
    return solver(problem)


def tables_suite(cases=TABLE_CASES) -> List[Check]:
    out = []
    for case in cases:
        report = run_table_case(case)
        obj = report.best_objective if case.use_best else report.objective
        err = abs(obj / case.expected - 1)
        out.append(Check(
            f"{case.solver} {case.family}({case.n}) {report.criterion}", err <= case.rtol, err, case.rtol,
            f"objective {obj:.6g} vs {case.expected:g} ({report.termination_reason})",
        ))
    return out


SUITES: dict[str, Callable[[], List[Check]]] = {
    "derivatives": derivatives_suite,
    "smw": smw_suite,
    "ranks": ranks_suite,
    "tiny-analytic": tiny_analytic_suite,
    "tables": tables_suite,
}


def run_suite(name: str) -> List[Check]:
    if name == "all":
        return list(itertools.chain.from_iterable(fn() for fn in SUITES.values()))
    try:
        return SUITES[name]()
    except KeyError:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'") from None
