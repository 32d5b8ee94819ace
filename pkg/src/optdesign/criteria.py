"""Optimality criteria: value, gradient and factored Hessian in svec space.

Every criterion has the form ``Phi(X) = Psi((K^T X^{-1} K)^{-1})`` on positive
definite ``X``:

=========  ==================================
kind       Phi(X)
=========  ==================================
``A``      ``tr(K^T X^{-1} K)``
``C``      ``c^T X^{-1} c`` (A with a single column ``K = c``)
``D``      ``log det(K^T X^{-1} K)``
``PMean``  ``tr((K^T X^{-1} K)^{-p})``, ``p < 0``
=========  ==================================

``phi(x) = Phi(smat(x))`` is the same function seen on svec coordinates; its
gradient is ``svec(grad Phi)`` and its Hessian is returned as an orthonormal
basis plus positive weights truncated to the exact rank
``m(m+1)/2 - (m-k)(m-k+1)/2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import symlin
from .exceptions import (
    InvalidCriterion,
    NegativeCurvature,
    NotPositiveDefinite,
    SingularInformationMatrix,
)

KINDS = ("A", "C", "D", "PMean")
_ALIASES = {"a": "A", "c": "C", "d": "D", "pmean": "PMean", "p": "PMean"}

RANK_TOL = 1e-10
COND_LIMIT = 1e14
TRUNCATION_RTOL = 1e-8


class RankMismatch(NegativeCurvature):
    """The Hessian spectrum does not drop off at the analytic rank."""


def khess_function(p: float) -> symlin.ScalarFunction:
    """g(t) = t^(-p-1), applied to the eigenvalues of K^T X^{-1} K (general K)."""
    return symlin.power_function(-p - 1.0)


def ihess_function(p: float) -> symlin.ScalarFunction:
    """g(t) = p t^(p-1), applied to the eigenvalues of X itself (K = I)."""
    return symlin.power_function(p - 1.0, coef=p)


# grad Phi(X) = g(X) when K = I; A and D are p = -1 and the -t^{-1} special case
_IDENTITY_GRAD = {
    "A": symlin.power_function(-2.0, coef=-1.0),
    "C": symlin.power_function(-2.0, coef=-1.0),
    "D": symlin.power_function(-1.0, coef=-1.0),
}


@dataclass(frozen=True)
class CriterionSpec:
    """Criterion kind plus coefficient matrix ``K`` (m x k) and exponent ``p``."""

    kind: str
    K: np.ndarray
    p: Optional[float] = None
    identity: bool = field(default=False)

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower(), self.kind)
        if kind not in KINDS:
            raise InvalidCriterion(f"unknown criterion kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        K = np.array(self.K, dtype=float)
        if K.ndim == 1:
            K = K[:, None]
        if K.ndim != 2 or K.shape[0] < 1 or K.shape[1] < 1:
            raise InvalidCriterion(f"K must be a nonempty m x k matrix, got shape {K.shape}")
        m, k = K.shape
        if k > m:
            raise InvalidCriterion(f"K must satisfy k <= m, got k={k} > m={m}")
        if not np.all(np.isfinite(K)):
            raise InvalidCriterion("K has non-finite entries")
        sv = np.linalg.svd(K, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise InvalidCriterion("K must have full column rank")
        if kind == "C" and k != 1:
            raise InvalidCriterion("c-criterion requires a single column K = c")
        if kind == "PMean":
            if self.p is None or not np.isfinite(self.p) or self.p >= 0:
                raise InvalidCriterion(f"p-th mean criterion requires p < 0, got {self.p}")
            object.__setattr__(self, "p", float(self.p))
        elif self.p is not None:
            object.__setattr__(self, "p", None)
        K.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "identity", bool(k == m and np.array_equal(K, np.eye(m))))

    @property
    def m(self) -> int:
        return self.K.shape[0]

    @property
    def k(self) -> int:
        return self.K.shape[1]

    @classmethod
    def make(cls, kind: str, m: int, K=None, p: Optional[float] = None) -> "CriterionSpec":
        """Build a spec; ``K=None`` or ``"identity"`` means ``K = I_m``."""
        if K is None or (isinstance(K, str) and K == "identity"):
            K = np.eye(m)
        spec = cls(kind, K, p)
        if spec.m != m:
            raise InvalidCriterion(f"K has {spec.m} rows but the design has dimension {m}")
        return spec

    def __eq__(self, other):
        if not isinstance(other, CriterionSpec):
            return NotImplemented
        return self.kind == other.kind and self.p == other.p and np.array_equal(self.K, other.K)

    def __hash__(self):
        return hash((self.kind, self.p, self.K.tobytes()))

    def describe(self) -> str:
        label = f"pmean(p={self.p:g})" if self.kind == "PMean" else {"A": "A", "C": "c", "D": "D"}[self.kind]
        return label if self.identity else f"{label}, K {self.m}x{self.k}"


@dataclass(frozen=True)
class HessianFactor:
    """``hess phi == basis @ diag(weights) @ basis.T`` with orthonormal basis."""

    basis: np.ndarray
    weights: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.weights)

    def matrix(self) -> np.ndarray:
        return (self.basis * self.weights) @ self.basis.T

    def sqrt_factor(self) -> np.ndarray:
        """F with ``F @ F.T == hess phi``."""
        return self.basis * np.sqrt(self.weights)


@dataclass(frozen=True)
class CriterionEval:
    value: float
    grad_matrix: np.ndarray
    grad_svec: np.ndarray
    hessian: Optional[HessianFactor] = None


def analytic_rank(spec: CriterionSpec) -> int:
    m, k = spec.m, spec.k
    return symlin.svec_dim(m) - symlin.svec_dim(m - k)


def _cholesky(X: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(X, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc


def _check_X(spec: CriterionSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape != (spec.m, spec.m):
        raise InvalidCriterion(f"expected a {spec.m}x{spec.m} matrix, got shape {X.shape}")
    return X


def _inv_from_chol(L: np.ndarray) -> np.ndarray:
    Linv = scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return Linv.T @ Linv


class _Workspace:
    """Quantities shared between value, gradient and Hessian at one X."""

    def __init__(self, spec: CriterionSpec, X: np.ndarray):
        self.spec = spec
        self.X = _check_X(spec, X)
        self.L = _cholesky(self.X)
        self.Xinv = _inv_from_chol(self.L)
        if spec.identity:
            self.B = self.Xinv
            self.Y = self.Xinv
        else:
            self.B = scipy.linalg.cho_solve((self.L, True), spec.K)
            self.Y = symlin.symmetrize(spec.K.T @ self.B)
        self._eig = None

    @property
    def eig(self) -> symlin.EigenDecomposition:
        # eigenbasis of X for K = I, of K^T X^{-1} K otherwise
        if self._eig is None:
            self._eig = symlin.eigh(self.X if self.spec.identity else self.Y)
        return self._eig

    def value(self) -> float:
        spec = self.spec
        if spec.identity:
            if spec.kind in ("A", "C"):
                return float(np.trace(self.Xinv))
            if spec.kind == "D":
                return float(-2.0 * np.sum(np.log(np.diag(self.L))))
            d = self.eig.values
            if d[-1] <= 0:
                raise NotPositiveDefinite("nonpositive eigenvalue")
            return float(np.sum(d ** spec.p))
        if spec.kind in ("A", "C"):
            return float(np.trace(self.Y))
        if spec.kind == "D":
            LY = _cholesky(self.Y)
            return float(2.0 * np.sum(np.log(np.diag(LY))))
        d = self.eig.values
        if d[-1] <= 0:
            raise SingularInformationMatrix("K^T X^{-1} K is not positive definite")
        return float(np.sum(d ** (-spec.p)))

    def check_conditioning(self) -> None:
        d = self.eig.values
        if self.spec.identity:
            # Y = X^{-1} has the reciprocal spectrum of X
            d = 1.0 / d[::-1]
        if d[-1] <= 0 or d[0] / d[-1] > COND_LIMIT:
            raise SingularInformationMatrix(
                f"information matrix is numerically singular (condition {d[0] / max(d[-1], 1e-300):.3g})"
            )

    def grad_matrix(self) -> np.ndarray:
        spec = self.spec
        if spec.identity:
            if spec.kind in _IDENTITY_GRAD:
                if spec.kind == "D":
                    return -self.Xinv
                return -symlin.symmetrize(self.Xinv @ self.Xinv)
            return symlin.sym_function(self.X, ihess_function(spec.p), self.eig)
        return symlin.symmetrize(self.B @ self.inner_weight() @ self.B.T)

    def inner_weight(self) -> np.ndarray:
        """Middle factor Z with grad Phi = B Z B^T, B = X^{-1} K."""
        spec = self.spec
        if spec.kind in ("A", "C"):
            return -np.eye(spec.k)
        if spec.kind == "D":
            return -_inv_from_chol(_cholesky(self.Y))
        return spec.p * symlin.sym_function(self.Y, symlin.power_function(-spec.p - 1.0), self.eig)

    def hessian_matrix(self) -> np.ndarray:
        spec = self.spec
        nsv = symlin.svec_dim(spec.m)
        if spec.identity:
            return self.identity_factor().matrix()
        Xinv = self.Xinv
        if spec.kind in ("A", "C"):
            G = symlin.symmetrize(self.B @ self.B.T)
            H = symlin.skron_materialize(2.0 * Xinv, G)
        elif spec.kind == "D":
            G = -self.grad_matrix()
            H = symlin.skron_materialize(2.0 * Xinv, G) - symlin.skron_materialize(G, G)
        else:
            p = spec.p
            eig = self.eig
            C = self.B @ eig.vectors
            S = symlin.divided_difference(khess_function(p), eig.values)
            G = symlin.symmetrize(self.B @ symlin.sym_function(self.Y, khess_function(p), eig) @ self.B.T)
            E = symlin.smat(np.eye(nsv))
            inner = C @ (S * (C.T @ E @ C)) @ C.T
            GEX = G @ E @ Xinv
            H = symlin.svec(-p * (inner + GEX + np.swapaxes(GEX, -1, -2))).T
        return symlin.symmetrize(H)

    def identity_factor(self) -> HessianFactor:
        spec = self.spec
        g = _IDENTITY_GRAD.get(spec.kind) or ihess_function(spec.p)
        eig = self.eig
        S = symlin.divided_difference(g, eig.values)
        rows, cols, _ = symlin._svec_layout(spec.m)
        weights = S[rows, cols]
        basis = symlin.skron_materialize(eig.vectors, eig.vectors)
        order = np.argsort(-weights, kind="stable")
        return HessianFactor(basis=basis[:, order], weights=weights[order])


def _factor_from_matrix(H: np.ndarray, r: int, strict: bool) -> HessianFactor:
    eig = symlin.eigh(H)
    d, V = eig.values, eig.vectors
    lam_max = max(d[0], 0.0)
    if lam_max <= 0:
        raise NegativeCurvature("Hessian has no positive eigenvalue")
    if strict:
        if d[-1] < -TRUNCATION_RTOL * lam_max:
            raise NegativeCurvature(f"eigenvalue {d[-1]:.3g} below -{TRUNCATION_RTOL:g} * lambda_max")
        if r < len(d) and abs(d[r]) >= TRUNCATION_RTOL * lam_max:
            raise RankMismatch(f"eigenvalue #{r + 1} = {d[r]:.3g} is not negligible (lambda_max {lam_max:.3g})")
        if d[r - 1] <= 0:
            raise RankMismatch(f"retained eigenvalue #{r} = {d[r - 1]:.3g} is not positive")
    keep = min(r, int(np.sum(d[:r] > 0)))
    return HessianFactor(basis=V[:, :keep].copy(), weights=d[:keep].copy())


def value(spec: CriterionSpec, X) -> float:
    return _Workspace(spec, X).value()


def information_matrix(spec: CriterionSpec, X) -> np.ndarray:
    ws = _Workspace(spec, X)
    return _inv_from_chol(_cholesky(ws.Y)) if not spec.identity else ws.X.copy()


def grad(spec: CriterionSpec, X, with_hessian: bool = False, strict: bool = True) -> CriterionEval:
    ws = _Workspace(spec, X)
    ws.check_conditioning()
    G = ws.grad_matrix()
    hess = _hessian(ws, strict) if with_hessian else None
    return CriterionEval(value=ws.value(), grad_matrix=G, grad_svec=symlin.svec(G), hessian=hess)


def _hessian(ws: _Workspace, strict: bool) -> HessianFactor:
    if ws.spec.identity:
        f = ws.identity_factor()
        if strict and f.weights[-1] <= 0:
            raise NegativeCurvature(f"Hessian weight {f.weights[-1]:.3g} is not positive")
        return f
    return _factor_from_matrix(ws.hessian_matrix(), analytic_rank(ws.spec), strict)


def hessian(spec: CriterionSpec, X, strict: bool = True) -> HessianFactor:
    return _hessian(_Workspace(spec, X), strict)


def hessian_matrix(spec: CriterionSpec, X) -> np.ndarray:
    """Dense (untruncated) svec-space Hessian."""
    return _Workspace(spec, X).hessian_matrix()


def evaluate(spec: CriterionSpec, X, with_hessian: bool = False, strict: bool = False) -> CriterionEval:
    """Value, gradients and optionally the Hessian factor, without the conditioning guard.

    Solver entry point: the caller decides how to treat ill-conditioned X.
    """
    ws = _Workspace(spec, X)
    G = ws.grad_matrix()
    hess = _hessian(ws, strict) if with_hessian else None
    return CriterionEval(value=ws.value(), grad_matrix=G, grad_svec=symlin.svec(G), hessian=hess)
