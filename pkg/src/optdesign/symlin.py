"""Symmetric-matrix calculus kernel.

Conventions
-----------
``svec`` stacks the lower triangle column by column, scaling off-diagonal
entries by sqrt(2)::

    svec(U) = (u11, s*u21, ..., s*um1, u22, s*u32, ..., umm),  s = sqrt(2)

so that ``trace(U @ V) == svec(U) @ svec(V)`` for symmetric ``U``, ``V``.
All functions accept a leading batch dimension where it is cheap to do so.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import (
    DimensionMismatch,
    DomainViolation,
    EigenFailure,
    FunctionUndefined,
    LengthNotTriangular,
)

SQRT2 = math.sqrt(2.0)

#: relative gap below which two eigenvalues are treated as equal
EIG_EQUAL_RTOL = 1e-12


def svec_dim(m: int) -> int:
    return m * (m + 1) // 2


def order_from_length(length: int) -> int:
    """Return ``m`` with ``m(m+1)/2 == length`` or raise LengthNotTriangular."""
    m = int(round((math.sqrt(8 * length + 1) - 1) / 2))
    if m < 1 or svec_dim(m) != length:
        raise LengthNotTriangular(f"length {length} is not a triangular number")
    return m


@lru_cache(maxsize=None)
def _svec_layout(m: int):
    rows, cols = [], []
    for j in range(m):
        for i in range(j, m):
            rows.append(i)
            cols.append(j)
    rows = np.array(rows)
    cols = np.array(cols)
    scale = np.where(rows == cols, 1.0, SQRT2)
    for a in (rows, cols, scale):
        a.setflags(write=False)
    return rows, cols, scale


def svec(U: np.ndarray) -> np.ndarray:
    """Isometric vectorization of a symmetric matrix (or a stack of them)."""
    U = np.asarray(U, dtype=float)
    if U.ndim < 2 or U.shape[-1] != U.shape[-2]:
        raise DimensionMismatch(f"expected square matrix, got shape {U.shape}")
    rows, cols, scale = _svec_layout(U.shape[-1])
    return U[..., rows, cols] * scale


def smat(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`."""
    x = np.asarray(x, dtype=float)
    m = order_from_length(x.shape[-1])
    rows, cols, scale = _svec_layout(m)
    U = np.zeros(x.shape[:-1] + (m, m))
    vals = x / scale
    U[..., rows, cols] = vals
    U[..., cols, rows] = vals
    return U


def vec(A: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    A = np.asarray(A, dtype=float)
    return np.swapaxes(A, -1, -2).reshape(A.shape[:-2] + (-1,))


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _check_square(*mats):
    m = None
    for A in mats:
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"expected square matrix, got shape {A.shape}")
        if m is None:
            m = A.shape[0]
        elif A.shape[0] != m:
            raise DimensionMismatch(f"order mismatch: {m} vs {A.shape[0]}")
    return m


def skron_apply(G: np.ndarray, H: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply the symmetric Kronecker product ``G (x)_s H`` to ``x = svec(U)``.

    Returns ``0.5 * svec(G U H^T + H U G^T)``.  ``x`` may carry leading batch
    dimensions.
    """
    G = np.asarray(G, dtype=float)
    H = np.asarray(H, dtype=float)
    m = _check_square(G, H)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != svec_dim(m):
        raise DimensionMismatch(f"svec length {x.shape[-1]} does not match order {m}")
    U = smat(x)
    GUH = G @ U @ H.T
    return svec(0.5 * (GUH + np.swapaxes(GUH, -1, -2)))


def skron_materialize(G: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Dense ``m(m+1)/2``-order matrix of ``G (x)_s H``; column j is the image of e_j."""
    G = np.asarray(G, dtype=float)
    H = np.asarray(H, dtype=float)
    m = _check_square(G, H)
    return skron_apply(G, H, np.eye(svec_dim(m))).T


@lru_cache(maxsize=32)
def _q_operator(m: int) -> np.ndarray:
    rows, cols, scale = _svec_layout(m)
    Q = np.zeros((svec_dim(m), m * m))
    for k, (i, j) in enumerate(zip(rows, cols)):
        if i == j:
            Q[k, i + j * m] = 1.0
        else:
            Q[k, i + j * m] = 1.0 / SQRT2
            Q[k, j + i * m] = 1.0 / SQRT2
    Q.setflags(write=False)
    return Q


def q_operator(m: int) -> np.ndarray:
    """The matrix Q with ``Q vec(U) = svec(U)`` and ``Q^T svec(U) = vec(U)``.

    Only meant for oracle checks; solver paths never materialize it.
    """
    if m < 1:
        raise DimensionMismatch("order must be positive")
    return _q_operator(m).copy()


@dataclass(frozen=True)
class ScalarFunction:
    """A differentiable scalar function with an identifier and a domain."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    positive_domain: bool = False

    def check_domain(self, t: np.ndarray) -> None:
        if self.positive_domain and np.any(np.asarray(t) <= 0):
            raise FunctionUndefined(f"{self.name} is undefined for nonpositive arguments")


def power_function(exponent: float, coef: float = 1.0) -> ScalarFunction:
    """``t -> coef * t**exponent`` on t > 0."""
    a = float(exponent)
    c = float(coef)
    return ScalarFunction(
        name=f"{c:g}*t^{a:g}",
        f=lambda t: c * np.power(t, a),
        df=lambda t: c * a * np.power(t, a - 1.0),
        positive_domain=not float(a).is_integer() or a < 0,
    )


LOG = ScalarFunction("log", np.log, lambda t: 1.0 / np.asarray(t), positive_domain=True)
IDENTITY = ScalarFunction("t", lambda t: np.asarray(t, dtype=float), lambda t: np.ones_like(np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class EigenDecomposition:
    vectors: np.ndarray
    values: np.ndarray


def eigh(X: np.ndarray) -> EigenDecomposition:
    """Symmetric eigendecomposition with eigenvalues sorted descending."""
    X = np.asarray(X, dtype=float)
    _check_square(X)
    try:
        d, V = scipy.linalg.eigh(symmetrize(X))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(d)):
        raise EigenFailure("non-finite eigenvalues")
    return EigenDecomposition(vectors=V[:, ::-1].copy(), values=d[::-1].copy())


def divided_difference(g: ScalarFunction, d: np.ndarray) -> np.ndarray:
    """First divided-difference matrix of ``g`` at the points ``d``.

    Entry (i, j) is ``(g(d_i) - g(d_j)) / (d_i - d_j)``, or ``g'(d_i)`` when the
    two points coincide to relative precision ``EIG_EQUAL_RTOL``.
    """
    d = np.asarray(d, dtype=float)
    g.check_domain(d)
    gd = g.f(d)
    dgd = g.df(d)
    diff = d[:, None] - d[None, :]
    scale = np.maximum(1.0, np.maximum(np.abs(d)[:, None], np.abs(d)[None, :]))
    equal = np.abs(diff) <= EIG_EQUAL_RTOL * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (gd[:, None] - gd[None, :]) / np.where(equal, 1.0, diff)
    # on the coincidence branch use the mean derivative so the result stays symmetric
    S = np.where(equal, 0.5 * (dgd[:, None] + dgd[None, :]), S)
    return S


def sym_function(X: np.ndarray, g: ScalarFunction, eig: EigenDecomposition | None = None) -> np.ndarray:
    """Spectral matrix function ``V diag(g(d)) V^T``."""
    if eig is None:
        eig = eigh(X)
    try:
        g.check_domain(eig.values)
    except FunctionUndefined as exc:
        raise DomainViolation(str(exc)) from exc
    V = eig.vectors
    return symmetrize((V * g.f(eig.values)) @ V.T)


def sym_function_derivative(X: np.ndarray, g: ScalarFunction, H: np.ndarray) -> np.ndarray:
    """Directional derivative of ``X -> g(X)`` along symmetric ``H``."""
    eig = eigh(X)
    V = eig.vectors
    S = divided_difference(g, eig.values)
    return V @ (S * (V.T @ H @ V)) @ V.T


def random_symmetric(m: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((m, m))
    return A + A.T


def random_spd(m: int, rng: np.random.Generator, shift: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((m, m))
    return A @ A.T + shift * np.eye(m)
