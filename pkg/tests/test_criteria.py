import numpy as np
import pytest

from optdesign import criteria, symlin, verify
from optdesign.criteria import CriterionSpec
from optdesign.exceptions import InvalidCriterion, NotPositiveDefinite, SingularInformationMatrix


def spec(kind, m=2, K=None, p=None):
    return CriterionSpec.make(kind, m, K, p)


def random_K(m, k, seed):
    return np.random.default_rng(seed).standard_normal((m, k))


class TestSpec:
    def test_aliases(self):
        assert spec("a").kind == "A"
        assert spec("pmean", p=-0.5).kind == "PMean"

    def test_identity_flag(self):
        assert spec("D", 3).identity
        assert not spec("D", 3, random_K(3, 3, 0)).identity

    @pytest.mark.parametrize("p", [None, 0.0, 0.5, np.nan])
    def test_pmean_requires_negative_p(self, p):
        with pytest.raises(InvalidCriterion):
            spec("pmean", p=p)

    def test_rank_deficient_K(self):
        with pytest.raises(InvalidCriterion):
            CriterionSpec("A", np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]]))

    def test_k_above_m(self):
        with pytest.raises(InvalidCriterion):
            CriterionSpec("A", np.ones((2, 3)))

    def test_c_needs_one_column(self):
        with pytest.raises(InvalidCriterion):
            spec("C", 2)
        assert spec("C", 2, [1.0, 0.0]).k == 1

    def test_describe(self):
        assert spec("pmean", p=-0.5).describe() == "pmean(p=-0.5)"
        assert spec("C", 2, [1.0, 0.0]).describe() == "c, K 2x1"


class TestValue:
    @pytest.mark.parametrize("m", [1, 3, 5])
    def test_A_identity(self, m):
        assert criteria.value(spec("A", m), np.eye(m)) == pytest.approx(m)

    def test_D_identity(self):
        assert criteria.value(spec("D", 4), np.eye(4)) == pytest.approx(0.0, abs=1e-15)

    def test_pmean_diagonal(self):
        assert criteria.value(spec("pmean", p=-0.5), np.diag([4.0, 9.0])) == pytest.approx(5 / 6)

    def test_c_criterion(self):
        assert criteria.value(spec("A", 2, [1.0, 0.0]), np.diag([2.0, 5.0])) == pytest.approx(0.5)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            criteria.value(spec("D"), np.diag([1.0, -1.0]))

    def test_monotone_in_loewner_order(self):
        rng = np.random.default_rng(9)
        for s in verify.criterion_cases(m_values=[3, 4], seed=4):
            X1 = symlin.random_spd(s.m, rng)
            Z = rng.standard_normal((s.m, 2))
            assert criteria.value(s, X1 + Z @ Z.T) <= criteria.value(s, X1) + 1e-12


class TestGradient:
    def test_A_at_identity(self):
        g = criteria.grad(spec("A", 3), np.eye(3))
        np.testing.assert_allclose(g.grad_svec, -symlin.svec(np.eye(3)))

    def test_D_identity_K(self):
        X = symlin.random_spd(3, np.random.default_rng(0))
        g = criteria.grad(spec("D", 3), X)
        np.testing.assert_allclose(g.grad_svec, -symlin.svec(np.linalg.inv(X)), rtol=1e-12)

    def test_pmean_minus_two_diagonal(self):
        g = criteria.grad(spec("pmean", p=-2.0), np.diag([2.0, 3.0]))
        np.testing.assert_allclose(g.grad_svec, -2 * symlin.svec(np.diag([2.0 ** -3, 3.0 ** -3])))

    @pytest.mark.parametrize("seed", range(3))
    def test_pmean_minus_one_matches_A(self, seed):
        rng = np.random.default_rng(seed)
        X = symlin.random_spd(4, rng)
        K = rng.standard_normal((4, 2))
        a = criteria.grad(spec("A", 4, K), X)
        b = criteria.grad(spec("pmean", 4, K, -1.0), X)
        assert verify._rel(b.grad_svec, a.grad_svec) < 1e-12
        assert b.value == pytest.approx(a.value, rel=1e-12)

    def test_c_matches_A_with_one_column(self):
        X = symlin.random_spd(3, np.random.default_rng(2))
        c = np.array([1.0, -2.0, 0.5])
        a = criteria.grad(spec("A", 3, c[:, None]), X)
        b = criteria.grad(spec("C", 3, c), X)
        np.testing.assert_allclose(b.grad_svec, a.grad_svec, rtol=1e-13)

    def test_svec_consistency_and_sign(self):
        rng = np.random.default_rng(1)
        for s in verify.criterion_cases(m_values=[3], seed=1):
            g = criteria.grad(s, symlin.random_spd(3, rng))
            np.testing.assert_allclose(g.grad_svec, symlin.svec(g.grad_matrix), atol=1e-14)
            assert np.linalg.eigvalsh(g.grad_matrix).max() <= 1e-10 * np.abs(g.grad_matrix).max()

    def test_singular_information_matrix(self):
        X = np.diag([1.0, 1e-16 + 1e-30])
        with pytest.raises((SingularInformationMatrix, NotPositiveDefinite)):
            criteria.grad(spec("A"), X)


class TestHessian:
    def test_A_at_identity(self):
        H = criteria.hessian(spec("A", 3), np.eye(3))
        assert H.rank == 6
        np.testing.assert_allclose(H.weights, 2.0)
        np.testing.assert_allclose(H.matrix(), 2 * np.eye(6), atol=1e-13)

    def test_D_identity_is_skron_of_inverse(self):
        X = symlin.random_spd(3, np.random.default_rng(3))
        Xi = np.linalg.inv(X)
        H = criteria.hessian(spec("D", 3), X).matrix()
        np.testing.assert_allclose(H, symlin.skron_materialize(Xi, Xi), atol=1e-10)

    def test_D_identity_agrees_with_general_K_path(self):
        X = symlin.random_spd(3, np.random.default_rng(3))
        Q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((3, 3)))
        # D with an invertible K differs from K = I only by a constant.
        a = criteria.hessian(spec("D", 3), X).matrix()
        b = criteria.hessian(spec("D", 3, Q), X).matrix()
        np.testing.assert_allclose(b, a, atol=1e-10)

    def test_pmean_minus_one_matches_A(self):
        rng = np.random.default_rng(5)
        X = symlin.random_spd(4, rng)
        K = rng.standard_normal((4, 2))
        a = criteria.hessian(spec("A", 4, K), X).matrix()
        b = criteria.hessian(spec("pmean", 4, K, -1.0), X).matrix()
        assert verify._rel(b, a) < 1e-10

    @pytest.mark.parametrize("kind,p", [("A", None), ("D", None), ("PMean", -0.5), ("PMean", -2.0)])
    def test_rank_m4_k3(self, kind, p):
        rng = np.random.default_rng(6)
        K, _ = np.linalg.qr(rng.standard_normal((4, 3)))
        s = spec(kind, 4, K, p)
        H = criteria.hessian(s, symlin.random_spd(4, rng))
        assert H.rank == 9 == criteria.analytic_rank(s)
        assert verify.numerical_rank(criteria.hessian_matrix(s, symlin.random_spd(4, rng))) == 9

    def test_factor_structure(self):
        rng = np.random.default_rng(7)
        for s in verify.criterion_cases(m_values=[3], seed=7, orthonormal=True):
            X = symlin.random_spd(3, rng)
            H = criteria.hessian(s, X)
            np.testing.assert_allclose(H.basis.T @ H.basis, np.eye(H.rank), atol=1e-10)
            assert np.all(H.weights > 0)
            assert np.all(np.diff(H.weights) <= 0)
            full = criteria.hessian_matrix(s, X)
            assert np.linalg.norm(H.matrix() - full) < 1e-9 * np.linalg.norm(full)
            F = H.sqrt_factor()
            np.testing.assert_allclose(F @ F.T, H.matrix(), atol=1e-12 * np.linalg.norm(full))


class TestAnalyticRank:
    def test_full(self):
        assert criteria.analytic_rank(spec("A", 4)) == 10

    def test_m4_k3(self):
        assert criteria.analytic_rank(spec("A", 4, np.eye(4)[:, :3])) == 9

    def test_c_m5(self):
        s = spec("C", 5, np.eye(5)[:, 0])
        assert criteria.analytic_rank(s) == 5
        H = criteria.hessian_matrix(s, symlin.random_spd(5, np.random.default_rng(0)))
        assert verify.numerical_rank(H) == 5


class TestInformationMatrix:
    def test_identity_K(self):
        X = symlin.random_spd(3, np.random.default_rng(0))
        np.testing.assert_allclose(criteria.information_matrix(spec("A", 3), X), X, rtol=1e-12)

    def test_c(self):
        C = criteria.information_matrix(spec("A", 2, [1.0, 0.0]), np.diag([2.0, 5.0]))
        np.testing.assert_allclose(C, [[2.0]])

    def test_reproduces_value(self):
        rng = np.random.default_rng(1)
        X = symlin.random_spd(4, rng)
        K = rng.standard_normal((4, 2))
        C = criteria.information_matrix(spec("A", 4, K), X)
        Ci = np.linalg.inv(C)
        assert criteria.value(spec("A", 4, K), X) == pytest.approx(np.trace(Ci), rel=1e-12)
        assert criteria.value(spec("D", 4, K), X) == pytest.approx(np.linalg.slogdet(Ci)[1], rel=1e-12)
        ev = np.linalg.eigvalsh(C)
        assert criteria.value(spec("pmean", 4, K, -0.5), X) == pytest.approx(np.sum(ev ** -0.5), rel=1e-12)


def test_derivative_oracle_sample():
    """A thinned version of the full finite-difference sweep."""
    checks = verify.derivatives_suite(samples=2)
    bad = [c.line() for c in checks if not c.passed]
    assert not bad, bad
