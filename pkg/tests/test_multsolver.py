import math

import numpy as np
import pytest

from optdesign import criteria, ipsolver, multsolver
from optdesign.criteria import CriterionSpec
from optdesign.exceptions import ConfigError, DegenerateScores
from optdesign.multsolver import MultConfig
from optdesign.problem import assemble, from_matrices, generate_space


def chi(family, n, kind="A", p=None):
    space = generate_space(family, n)
    return assemble(space, CriterionSpec.make(kind, space.m, p=p))


def ratio_problem():
    """Scores proportional to (1, 3) at the uniform design."""
    return from_matrices([np.array([[1.0]]), np.array([[3.0]])], CriterionSpec.make("A", 1))


class TestConfig:
    @pytest.mark.parametrize("kw", [{"lam": 0.0}, {"lam": 1.5}, {"delta": 0.0}, {"max_iters": -1}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            MultConfig(**kw)


class TestScores:
    @pytest.mark.parametrize("m", [1, 3])
    def test_single_identity_atom(self, m):
        p = from_matrices([np.eye(m)], CriterionSpec.make("A", m))
        np.testing.assert_allclose(multsolver.directional_scores(p, [1.0]), [m])

    def test_equal_atoms_equal_scores(self):
        A = np.array([[2.0, 1.0], [1.0, 3.0]])
        p = from_matrices([A, A, np.eye(2)], CriterionSpec.make("D", 2))
        d = multsolver.directional_scores(p, [0.2, 0.5, 0.3])
        assert d[0] == d[1]

    def test_trace_oracle_chi2_50(self):
        p = chi("chi2", 50)
        w = np.full(50, 0.02)
        G = criteria.grad(p.criterion, p.moment_matrix(w)).grad_matrix
        ref = np.array([-np.trace(G @ A) for A in p.atoms()])
        d = multsolver.directional_scores(p, w)
        assert np.linalg.norm(d - ref) < 1e-12 * np.linalg.norm(ref)
        assert np.all(d >= 0)


class TestStep:
    def test_constant_scores_fixed_point(self):
        A = np.eye(2)
        p = from_matrices([A, A], CriterionSpec.make("A", 2))
        np.testing.assert_allclose(multsolver.step(p, [0.3, 0.7]), [0.3, 0.7], rtol=1e-15)

    def test_lambda_one(self):
        np.testing.assert_allclose(multsolver.step(ratio_problem(), [0.5, 0.5]), [0.25, 0.75], rtol=1e-14)

    def test_lambda_half(self):
        s3 = math.sqrt(3)
        w = multsolver.step(ratio_problem(), [0.5, 0.5], MultConfig(lam=0.5))
        np.testing.assert_allclose(w, [1 / (1 + s3), s3 / (1 + s3)], rtol=1e-14)

    def test_degenerate_scores(self):
        with pytest.raises(DegenerateScores):
            multsolver._update(np.array([0.5, 0.5]), np.zeros(2), 1.0)

    def test_floor_keeps_weights_positive(self):
        w = multsolver._update(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 1.0)
        assert np.all(w > 0) and w.sum() == pytest.approx(1.0, abs=1e-15)


class TestConverged:
    def test_constant_scores(self):
        p = from_matrices([np.eye(2), np.eye(2)], CriterionSpec.make("A", 2))
        assert multsolver.converged(p, [0.4, 0.6], MultConfig(delta=1e-12))

    def test_unequal_scores(self):
        # scores (1, 3)/4 at the uniform design: 3/4 > 1.0002 * 1/2
        assert not multsolver.converged(ratio_problem(), [0.5, 0.5])

    def test_at_ip_optimum(self):
        p = chi("chi2", 100)
        w = ipsolver.solve(p).weights
        assert multsolver.converged(p, np.maximum(w, 1e-300))


class TestSolve:
    def test_simplex_preserved(self):
        sums = []
        multsolver.solve(chi("chi4", 200, "D"), MultConfig(max_iters=300),
                         callback=lambda s: sums.append((s.w.sum(), s.w.min())))
        for total, low in sums:
            assert abs(total - 1) < 1e-12 and low > 0

    @pytest.mark.parametrize("kind,p,lam", [("D", None, 1.0), ("PMean", -0.5, 1.0), ("A", None, 0.9)])
    def test_monotone_descent_chi1_1000(self, kind, p, lam):
        r = multsolver.solve(chi("chi1", 1000, kind, p), MultConfig(lam=lam, delta=1e-300, max_iters=1000))
        obj = np.array(r.trace)
        assert len(obj) == 1000
        assert np.all(np.diff(obj) <= 1e-12 * np.abs(obj[1:]))

    def test_stopping_rule_on_returned_state(self):
        p = chi("chi2", 300, "D")
        r = multsolver.solve(p)
        assert r.termination_reason == "Converged"
        assert multsolver.converged(p, r.weights)

    def test_max_iters_and_best(self):
        r_problem = chi("chi4", 500, "PMean", -1.1)
        r = multsolver.solve(r_problem, MultConfig(max_iters=50))
        assert r.termination_reason == "MaxIters" and r.iterations == 50
        assert r.best_objective <= min(r.trace)
        assert criteria.value(r_problem.criterion, r_problem.moment_matrix(r.best_weights)) == pytest.approx(r.best_objective)

    def test_tiny_problem(self):
        r = multsolver.solve(from_matrices([np.array([[1.0]]), np.array([[2.0]])], CriterionSpec.make("D", 1)),
                             MultConfig(delta=1e-10))
        assert r.objective == pytest.approx(math.log(0.5), abs=1e-6)
