"""Solver results and their JSON serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ParseError

SPARSE_THRESHOLD = 1e-12
SUPPORT_THRESHOLD = 1e-6


def support_size(w, threshold: float = SUPPORT_THRESHOLD) -> int:
    return int(np.count_nonzero(np.asarray(w) > threshold))


@dataclass
class SolveReport:
    solver: str
    weights: np.ndarray
    objective: float
    iterations: int
    termination_reason: str
    wall_time_seconds: float = 0.0
    inner_iterations: int = 0
    mu_trace: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    best_objective: Optional[float] = None
    best_weights: Optional[np.ndarray] = None
    kkt: Optional[dict] = None
    criterion: str = ""
    label: str = ""
    flags: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def support_size(self) -> int:
        return support_size(self.weights)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > SUPPORT_THRESHOLD)

    def to_json(self, include_trace: bool = False) -> dict:
        w = np.asarray(self.weights)
        idx = np.flatnonzero(w > SPARSE_THRESHOLD)
        out = {
            "solver": self.solver,
            "n": int(w.size),
            "w": {str(int(i)): float(w[i]) for i in idx},
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "inner_iterations": int(self.inner_iterations),
            "mu_trace": [float(mu) for mu in self.mu_trace],
            "support_size": self.support_size,
            "wall_time_seconds": float(self.wall_time_seconds),
            "termination_reason": self.termination_reason,
            "criterion": self.criterion,
            "label": self.label,
            "flags": list(self.flags),
        }
        if self.best_objective is not None:
            out["best_objective"] = float(self.best_objective)
        if self.kkt is not None:
            out["kkt"] = {k: float(v) for k, v in self.kkt.items()}
        if include_trace:
            out["trace"] = self.trace
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SolveReport":
        try:
            n = int(obj["n"])
            w = np.zeros(n)
            for key, val in obj["w"].items():
                w[int(key)] = float(val)
            return cls(
                solver=obj.get("solver", ""),
                weights=w,
                objective=float(obj["objective"]),
                iterations=int(obj["iterations"]),
                termination_reason=obj.get("termination_reason", ""),
                wall_time_seconds=float(obj.get("wall_time_seconds", 0.0)),
                inner_iterations=int(obj.get("inner_iterations", 0)),
                mu_trace=list(obj.get("mu_trace", [])),
                trace=list(obj.get("trace", [])),
                best_objective=obj.get("best_objective"),
                kkt=obj.get("kkt"),
                criterion=obj.get("criterion", ""),
                label=obj.get("label", ""),
                flags=list(obj.get("flags", [])),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"malformed report: {exc!r}") from None


def save_report(report: SolveReport, path, include_trace: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(include_trace=include_trace), fh, indent=1)


def load_report(path) -> SolveReport:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return SolveReport.from_json(obj)
