"""Design spaces, problem assembly and problem-file I/O.

A :class:`DesignProblem` stores the information atoms ``A_i`` only through the
svec design matrix ``M = [svec(A_1) ... svec(A_n)]``; every solver operation is
expressed through products with ``M`` or ``M.T``.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import symlin
from .criteria import CriterionSpec
from .exceptions import (
    DegenerateDesign,
    InvalidCriterion,
    NotOnSimplex,
    OptDesignError,
    ParseError,
    ZeroAtom,
)

FAMILIES = ("chi1", "chi2", "chi3", "chi4")
SIMPLEX_ATOL = 1e-12
PSD_RTOL = 1e-10


@dataclass(frozen=True)
class DesignSpace:
    points: np.ndarray  # (n, m)
    label: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ParseError(f"design points must form a nonempty n x m array, got shape {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]


def generate_space(family: str, n: int) -> DesignSpace:
    """Benchmark design spaces on equispaced grids, indices ``i = 1..n``.

    ``chi3`` is a tensor grid and returns ``n**2`` points.
    """
    if n < 1:
        raise ValueError("n must be positive")
    i = np.arange(1, n + 1, dtype=float)
    if family == "chi1":
        s = 3.0 * i / n
        es, e2s = np.exp(-s), np.exp(-2.0 * s)
        pts = np.column_stack([es, s * es, e2s, s * e2s])
    elif family == "chi2":
        s = 3.0 * i / n
        pts = np.column_stack([np.ones_like(s), s, s ** 2, s ** 3])
    elif family == "chi3":
        r = 2.0 * i / n - 1.0
        t = i / n
        R, T = np.meshgrid(r, t, indexing="ij")  # point (i-1)*n + j <-> (r_i, t_j)
        R, T = R.ravel(), T.ravel()
        pts = np.column_stack([np.ones_like(R), R, R ** 2, T, R * T])
    elif family == "chi4":
        t = i / n
        pts = np.column_stack([t, t ** 2, np.sin(2 * np.pi * t), np.cos(2 * np.pi * t)])
    else:
        raise ValueError(f"unknown design family {family!r}; expected one of {FAMILIES}")
    return DesignSpace(pts, label=f"{family}({n})")


@dataclass(frozen=True, eq=False)
class DesignProblem:
    """Information atoms (via their svec design matrix) plus a criterion."""

    svec_design: np.ndarray  # (m(m+1)/2, n)
    criterion: CriterionSpec
    points: Optional[np.ndarray] = None
    label: str = ""
    _skip_checks: bool = field(default=False, repr=False)

    def __post_init__(self):
        M = np.ascontiguousarray(self.svec_design, dtype=float)
        m = symlin.order_from_length(M.shape[0])
        if m != self.criterion.m:
            raise InvalidCriterion(f"criterion has m={self.criterion.m} but atoms have order {m}")
        M.setflags(write=False)
        object.__setattr__(self, "svec_design", M)
        if not self._skip_checks:
            _validate_atoms(M)

    @property
    def n(self) -> int:
        return self.svec_design.shape[1]

    @property
    def m(self) -> int:
        return self.criterion.m

    def atoms(self) -> np.ndarray:
        """The n atoms as an (n, m, m) array."""
        return symlin.smat(self.svec_design.T)

    def moment_matrix(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise NotOnSimplex(f"weights must have length {self.n}, got shape {w.shape}")
        return symlin.smat(self.svec_design @ w)

    def with_columns(self, order) -> "DesignProblem":
        """The same problem with its atoms reordered."""
        pts = None if self.points is None else self.points[order]
        return DesignProblem(self.svec_design[:, order], self.criterion, pts, self.label, _skip_checks=True)

    def with_criterion(self, criterion: CriterionSpec) -> "DesignProblem":
        return DesignProblem(self.svec_design, criterion, self.points, self.label, _skip_checks=True)


def _validate_atoms(M: np.ndarray) -> None:
    atoms = symlin.smat(M.T)
    norms = np.linalg.norm(M, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroAtom(f"atom {zero[0]} is the zero matrix")
    mins = np.linalg.eigvalsh(atoms)[:, 0]
    bad = np.flatnonzero(mins < -PSD_RTOL * norms)
    if bad.size:
        raise DegenerateDesign(f"atom {bad[0]} is not positive semidefinite (min eigenvalue {mins[bad[0]]:.3g})")
    X = symlin.smat(M.mean(axis=1))
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        raise DegenerateDesign("the uniform-weight moment matrix is not positive definite") from None


def assemble(space: DesignSpace, criterion: CriterionSpec) -> DesignProblem:
    """Rank-one atoms ``A_i = x_i x_i^T``."""
    if space.m != criterion.m:
        raise InvalidCriterion(f"criterion has m={criterion.m} but points have dimension {space.m}")
    X = space.points
    rows, cols, scale = symlin._svec_layout(space.m)
    M = (X[:, rows] * X[:, cols] * scale).T
    return DesignProblem(M, criterion, points=X, label=space.label)


def from_matrices(matrices: Sequence, criterion: CriterionSpec, label: str = "") -> DesignProblem:
    A = np.asarray(matrices, dtype=float)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ParseError(f"atoms must be an (n, m, m) array, got shape {A.shape}")
    if not np.allclose(A, np.swapaxes(A, 1, 2), rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ParseError("atoms must be symmetric")
    return DesignProblem(symlin.svec(symlin.symmetrize(A)).T, criterion, label=label)


def moment_matrix(problem: DesignProblem, w) -> np.ndarray:
    return problem.moment_matrix(w)


def check_simplex(w, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1 or np.any(w < 0) or abs(math.fsum(w) - 1.0) > atol:
        raise NotOnSimplex("weights must be nonnegative and sum to one")
    return w


def reduce(w) -> np.ndarray:
    """Drop the last coordinate of a full weight vector."""
    return check_simplex(w)[:-1].copy()


def lift(wt) -> np.ndarray:
    """``(w~, 1 - sum(w~))``; the inverse of :func:`reduce`."""
    wt = np.asarray(wt, dtype=float)
    if wt.ndim != 1 or np.any(wt < 0):
        raise NotOnSimplex("reduced weights must be a nonnegative vector")
    last = 1.0 - math.fsum(wt)
    if last < -SIMPLEX_ATOL:
        raise NotOnSimplex("reduced weights sum to more than one")
    return np.append(wt, max(last, 0.0))


def apply_Pt(y: np.ndarray) -> np.ndarray:
    """``P^T y = (y_1 - y_n, ..., y_{n-1} - y_n)``; works column-wise on 2-D input."""
    return y[:-1] - y[-1]


# --------------------------------------------------------------------------- I/O


def _criterion_to_json(spec: CriterionSpec) -> dict:
    kind = {"A": "A", "C": "c", "D": "D", "PMean": "pmean"}[spec.kind]
    out = {"kind": kind}
    if spec.p is not None:
        out["p"] = spec.p
    out["K"] = "identity" if spec.identity else spec.K.tolist()
    return out


def _criterion_from_json(obj, m: int) -> CriterionSpec:
    if not isinstance(obj, dict):
        raise ParseError("field 'criterion': expected an object")
    if "kind" not in obj:
        raise ParseError("field 'criterion.kind' is required")
    K = obj.get("K", "identity")
    if K != "identity":
        if "c" in obj and K is None:
            K = obj["c"]
        try:
            K = np.asarray(K, dtype=float)
        except (TypeError, ValueError):
            raise ParseError("field 'criterion.K': expected 'identity' or a list of rows") from None
        if K.ndim == 1:
            K = K[:, None]
        if K.ndim != 2:
            raise ParseError("field 'criterion.K': expected a list of rows")
        if K.shape[0] != m:
            raise ParseError(f"field 'criterion.K': has {K.shape[0]} rows but m = {m}")
        if K.shape[1] > m:
            raise ParseError(f"field 'criterion.K': k = {K.shape[1]} exceeds m = {m} (need k <= m)")
    try:
        return CriterionSpec.make(obj["kind"], m, K, obj.get("p"))
    except InvalidCriterion as exc:
        raise ParseError(f"field 'criterion': {exc}") from None


def _lower_to_matrix(flat, m: int, idx: int) -> np.ndarray:
    flat = np.asarray(flat, dtype=float)
    if flat.ndim == 2:
        if flat.shape != (m, m):
            raise ParseError(f"field 'matrices[{idx}]': expected {m}x{m}, got {flat.shape}")
        return flat
    if flat.size != symlin.svec_dim(m):
        raise ParseError(
            f"field 'matrices[{idx}]': expected {symlin.svec_dim(m)} lower-triangle entries, got {flat.size}"
        )
    A = np.zeros((m, m))
    A[np.tril_indices(m)] = flat  # row-major lower triangle
    return A + np.tril(A, -1).T


def problem_to_json(problem: DesignProblem) -> dict:
    out = {"m": problem.m, "n": problem.n}
    if problem.label:
        out["label"] = problem.label
    if problem.points is not None:
        out["points"] = problem.points.tolist()
    else:
        tril = np.tril_indices(problem.m)
        out["matrices"] = [A[tril].tolist() for A in problem.atoms()]
    out["criterion"] = _criterion_to_json(problem.criterion)
    return out


def problem_from_json(obj) -> DesignProblem:
    if not isinstance(obj, dict):
        raise ParseError("problem file must contain a JSON object")
    for key in ("m", "criterion"):
        if key not in obj:
            raise ParseError(f"field '{key}' is required")
    m = obj["m"]
    if not isinstance(m, int) or m < 1:
        raise ParseError("field 'm': expected a positive integer")
    has_points, has_mats = "points" in obj, "matrices" in obj
    if has_points == has_mats:
        raise ParseError("exactly one of 'points' or 'matrices' must be given")
    criterion = _criterion_from_json(obj["criterion"], m)
    label = str(obj.get("label", ""))
    try:
        if has_points:
            pts = np.asarray(obj["points"], dtype=float)
            if pts.ndim != 2 or pts.shape[1] != m:
                raise ParseError(f"field 'points': expected a list of length-{m} vectors")
            problem = assemble(DesignSpace(pts, label), criterion)
        else:
            mats = [_lower_to_matrix(a, m, i) for i, a in enumerate(obj["matrices"])]
            if not mats:
                raise ParseError("field 'matrices': at least one matrix is required")
            problem = from_matrices(mats, criterion, label)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, OptDesignError):
            raise
        raise ParseError(f"malformed numeric data: {exc}") from None
    if "n" in obj and obj["n"] != problem.n:
        raise ParseError(f"field 'n': declared {obj['n']} but {problem.n} atoms were given")
    return problem


def load_problem(path) -> DesignProblem:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{os.fspath(path)}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return problem_from_json(obj)


def save_problem(problem: DesignProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_json(problem), fh)
