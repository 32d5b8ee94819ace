"""Acceptance criteria, one test per criterion.

Each test appends a ``PASS``/``FAIL`` line to the summary printed at the end of
the pytest run (section "acceptance criteria").  The 100000-point tier of the
dominance check runs only when ``OPTDESIGN_ACCEPT_FULL=1``.
"""
import math
import os

import numpy as np
import pytest

from optdesign import ipsolver, multsolver, verify
from optdesign.criteria import CriterionSpec
from optdesign.problem import assemble, generate_space

_REPORTS = {}


def solved(family, n, kind, p, solver):
    """Solve once per configuration; the IP runs keep their traces for the audit."""
    key = (family, n, kind, p, solver)
    if key not in _REPORTS:
        space = generate_space(family, n)
        problem = assemble(space, CriterionSpec.make(kind, space.m, None, p))
        _REPORTS[key] = ipsolver.solve(problem) if solver == "ip" else multsolver.solve(problem)
    return _REPORTS[key]


def rel(measured, expected):
    return abs(measured / expected - 1)


def conclude(log, number, title, checks):
    """``checks`` is a list of (passed, description) pairs."""
    passed = all(ok for ok, _ in checks)
    detail = "; ".join(text for _, text in checks)
    line = f"{'PASS' if passed else 'FAIL'}  #{number} {title}: {detail}"
    log.append(line)
    print(line)
    assert passed, line


def value_check(family, n, kind, p, solver, expected, rtol, best=False):
    rep = solved(family, n, kind, p, solver)
    obj = rep.best_objective if best else rep.objective
    err = rel(obj, expected)
    label = f"{solver} {family}({n})"
    return err <= rtol, f"{label} {obj:.9g} vs {expected:g} (rel {err:.1e}, tol {rtol:g})"


def test_01_A_chi1(acceptance_log):
    conclude(acceptance_log, 1, "A, K=I, chi1", [value_check("chi1", 10000, "A", None, "ip", 53848.3, 1e-4)])


def test_02_A_chi4(acceptance_log):
    conclude(acceptance_log, 2, "A, K=I, chi4", [value_check("chi4", 10000, "A", None, "ip", 170.775, 1e-4)])


def test_03_D_chi1(acceptance_log):
    conclude(acceptance_log, 3, "D, K=I, chi1", [
        value_check("chi1", 10000, "D", None, "ip", 20.5119, 1e-4),
        value_check("chi1", 10000, "D", None, "mult", 20.5125, 1e-3),
    ])


def test_04_D_chi3(acceptance_log):
    conclude(acceptance_log, 4, "D, K=I, chi3", [value_check("chi3", 100, "D", None, "ip", 5.14267, 1e-4)])


def test_05_pmean_above_minus_one(acceptance_log):
    conclude(acceptance_log, 5, "p-th mean, p in (-1, 0)", [
        value_check("chi4", 10000, "PMean", -0.25, "ip", 7.25955, 1e-4),
        value_check("chi2", 10000, "PMean", -0.75, "ip", 27.4811, 1e-4),
    ])


def test_06_pmean_below_minus_one(acceptance_log):
    mult = solved("chi4", 10000, "PMean", -1.1, "mult")
    conclude(acceptance_log, 6, "p-th mean, p = -1.1", [
        value_check("chi4", 10000, "PMean", -1.1, "ip", 277.597, 1e-3),
        value_check("chi4", 10000, "PMean", -1.1, "mult", 297.604, 1e-3, best=True),
        (mult.termination_reason == "MaxIters", f"mult stopped by {mult.termination_reason}"),
    ])


def test_07_mult_A_chi1(acceptance_log):
    conclude(acceptance_log, 7, "multiplicative A, chi1",
             [value_check("chi1", 10000, "A", None, "mult", 54286.3, 1e-3)])


TABLE_CRITERIA = (("A", None), ("D", None), ("PMean", -0.25), ("PMean", -0.75), ("PMean", -1.1), ("PMean", -1.2))
TIERS = {10000: 100, 50000: 200, 100000: 300}  # n for chi1/chi2/chi4 -> grid size for chi3


def dominance_tiers():
    tiers = [10000, 50000]
    if os.environ.get("OPTDESIGN_ACCEPT_FULL") == "1":
        tiers.append(100000)
    return tiers


def test_08_dominance(acceptance_log):
    checks, cells = [], 0
    for tier in dominance_tiers():
        for kind, p in TABLE_CRITERIA:
            for family in ("chi1", "chi2", "chi3", "chi4"):
                n = TIERS[tier] if family == "chi3" else tier
                ip = solved(family, n, kind, p, "ip").objective
                mult = solved(family, n, kind, p, "mult")
                # for p < -1 the reference results use the best multiplicative iterate
                mobj = mult.best_objective if p is not None and p < -1 else mult.objective
                cells += 1
                if not ip <= mobj + 1e-9 * abs(mobj):
                    checks.append((False, f"{family}({n}) {kind} p={p}: ip {ip:.9g} > mult {mobj:.9g}"))
                if tier > 10000:
                    # keep memory flat; the 10000 tier is shared with criteria 1-7 and 13
                    _REPORTS.pop((family, n, kind, p, "ip"))
                    _REPORTS.pop((family, n, kind, p, "mult"))
    tiers = "/".join(str(t) for t in dominance_tiers())
    checks.append((not checks, f"ip <= mult on {cells} cells (tiers {tiers})"))
    conclude(acceptance_log, 8, "solver dominance", checks)


def test_09_derivatives(acceptance_log):
    results = verify.derivatives_suite(samples=20)
    grad = [c for c in results if c.name.startswith("gradient")]
    hess = [c for c in results if c.name.startswith("hessian")]
    conclude(acceptance_log, 9, "derivative oracles", [
        (all(c.passed for c in grad), f"{len(grad)} criterion groups, gradient worst {max(c.measured for c in grad):.1e} (tol 1e-6)"),
        (all(c.passed for c in hess), f"Hessian worst {max(c.measured for c in hess):.1e} (tol 1e-5)"),
    ])


def test_10_ranks(acceptance_log):
    results = verify.ranks_suite()
    bad = [c.name for c in results if not c.passed]
    conclude(acceptance_log, 10, "Hessian rank", [(not bad, f"{len(results) - len(bad)}/{len(results)} cases match")])


def test_11_smw(acceptance_log):
    results = verify.smw_suite(n=200, families=("chi2", "chi4"))
    worst = max(c.measured for c in results)
    bad = [c.name for c in results if not c.passed]
    conclude(acceptance_log, 11, "SMW Newton direction", [
        (not bad, f"{len(results)} problems x 5 points, worst rel diff {worst:.1e} (tol 1e-8)"),
    ])


def test_12_tiny_optima(acceptance_log):
    results = verify.tiny_analytic_suite(step=1e-4)
    bad = [c.line() for c in results if not c.passed]
    analytic = [c for c in results if c.name.startswith("tiny")]
    conclude(acceptance_log, 12, "tiny analytic optima", [
        (not bad, f"{len(analytic)} analytic + {len(results) - len(analytic)} grid checks"
                  + (f", failing: {bad}" if bad else "")),
    ])


AUDIT_CASES = (
    ("chi1", 10000, "A", None), ("chi4", 10000, "A", None), ("chi1", 10000, "D", None),
    ("chi3", 100, "D", None), ("chi4", 10000, "PMean", -0.25), ("chi2", 10000, "PMean", -0.75),
    ("chi4", 10000, "PMean", -1.1),
)
# Once a barrier level is nearly solved the predicted decrease is below the
# rounding of f_mu; steps there are judged by gradient norm and may move f by
# rounding noise only.
F_NOISE_RTOL = 1e-10


def audit(trace):
    interior = all(r["min_wt"] > 0 and r["last_weight"] > 0 for r in trace)
    worst = 0.0
    prev = {}
    for r in trace:
        key = r["outer"]
        if key in prev:
            worst = max(worst, (r["f_mu"] - prev[key]) / max(1.0, abs(prev[key])))
        prev[key] = r["f_mu"]
    return interior, worst


def test_13_interior_audit(acceptance_log):
    checks, steps = [], 0
    for family, n, kind, p in AUDIT_CASES:
        rep = solved(family, n, kind, p, "ip")
        interior, worst = audit(rep.trace)
        steps += len(rep.trace)
        if not interior:
            checks.append((False, f"{family}({n}) {kind}: non-interior iterate"))
        if worst > F_NOISE_RTOL:
            checks.append((False, f"{family}({n}) {kind}: f_mu rose by {worst:.1e}"))
    checks.append((not checks, f"{steps} accepted steps over {len(AUDIT_CASES)} solves interior, "
                               f"f_mu nonincreasing per level (noise tol {F_NOISE_RTOL:g})"))
    conclude(acceptance_log, 13, "interior invariant", checks)
