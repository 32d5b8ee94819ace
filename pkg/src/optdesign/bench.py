"""Benchmark runs: configure solvers on generated or file problems and emit rows."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import ipsolver, multsolver
from .criteria import CriterionSpec
from .exceptions import ConfigError, OptDesignError, RankDeficientAfterRetries
from .problem import FAMILIES, DesignProblem, assemble, generate_space, load_problem

logger = logging.getLogger(__name__)

SOLVERS = ("ip", "mult")
FORMATS = ("csv", "json", "md")
K_RESAMPLES = 3


@dataclass(frozen=True)
class RunConfig:
    space: Optional[str] = "chi1"  # a family name; ignored when problem_path is set
    n: int = 10000
    criterion: str = "A"
    p: Optional[float] = None
    k_mode: str = "identity"  # identity | random | file
    k: Optional[int] = None
    seeds: tuple = (0,)
    aggregate: bool = False
    solvers: tuple = ("ip",)
    ip_overrides: dict = field(default_factory=dict)
    mult_overrides: dict = field(default_factory=dict)
    problem_path: Optional[str] = None
    output_path: Optional[str] = None
    output_format: str = "csv"

    def __post_init__(self):
        kind = self.criterion.lower()
        if kind not in ("a", "c", "d", "pmean"):
            raise ConfigError(f"unknown criterion {self.criterion!r}")
        if (kind == "pmean") != (self.p is not None):
            raise ConfigError("p is required for pmean and only for pmean")
        if kind == "pmean" and not self.p < 0:
            raise ConfigError("pmean needs p < 0")
        if self.problem_path is None and self.space not in FAMILIES:
            raise ConfigError(f"space must be one of {FAMILIES} or a problem file is needed")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.k_mode not in ("identity", "random", "file"):
            raise ConfigError(f"unknown K mode {self.k_mode!r}")
        if self.k_mode == "file" and self.problem_path is None:
            raise ConfigError("K mode 'file' needs a problem file")
        if self.k_mode == "random":
            if self.k is None or self.k < 1:
                raise ConfigError("random K needs k >= 1")
            if not self.seeds:
                raise ConfigError("random K needs at least one seed")
        if kind == "c" and self.k_mode == "identity":
            raise ConfigError("the c-criterion needs a single column K (use random K with k = 1)")
        if kind == "c" and self.k_mode == "random" and self.k != 1:
            raise ConfigError("the c-criterion requires k == 1")
        bad = set(self.solvers) - set(SOLVERS)
        if not self.solvers or bad:
            raise ConfigError(f"solvers must be a nonempty subset of {SOLVERS}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        try:
            ipsolver.IPConfig(**self.ip_overrides)
            multsolver.MultConfig(**self.mult_overrides)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class BenchRow:
    space: str
    n: int
    criterion: str
    p: Optional[float]
    kMode: str
    solver: str
    objective: Optional[float]
    bestObjective: Optional[float]
    iterations: Optional[int]
    innerNewtonSteps: Optional[int]
    wallTimeSeconds: float
    terminationReason: str
    supportSize: Optional[int]
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


COLUMNS = [f.name for f in fields(BenchRow)]


def random_K(m: int, k: int, seed: int) -> np.ndarray:
    """Gaussian m x k matrix, redrawn (at most three times) until it has full column rank."""
    if not 1 <= k <= m:
        raise ConfigError(f"need 1 <= k <= m, got k={k}, m={m}")
    rng = np.random.default_rng(seed)
    for _ in range(1 + K_RESAMPLES):
        K = rng.standard_normal((m, k))
        s = np.linalg.svd(K, compute_uv=False)
        if s[-1] > 1e-10 * s[0]:
            return K
    raise RankDeficientAfterRetries(f"no full-rank {m}x{k} draw for seed {seed}")


def _build_problems(config: RunConfig) -> List[tuple]:
    """(problem, kMode label) pairs, one per K instance."""
    if config.problem_path is not None:
        base = load_problem(config.problem_path)
        space, m = base.label or Path(config.problem_path).stem, base.m
    else:
        sp = generate_space(config.space, config.n)
        space, m = sp.label, sp.m
        base = None
    kind = config.criterion

    def make(K):
        spec = CriterionSpec.make(kind, m, K, config.p)
        if base is not None:
            return base.with_criterion(spec)
        return assemble(sp, spec)

    if config.k_mode == "file":
        return [(base, "file")]
    if config.k_mode == "identity":
        return [(make(None), "identity")]
    return [(make(random_K(m, config.k, s)), f"random(k={config.k}, seed={s})") for s in config.seeds]


def _solve_row(problem: DesignProblem, k_label: str, solver: str, config: RunConfig) -> BenchRow:
    crit = problem.criterion
    kind = {"PMean": "pmean", "C": "c"}.get(crit.kind, crit.kind)
    head = dict(space=problem.label, n=problem.n, criterion=kind, p=crit.p, kMode=k_label, solver=solver)
    t0 = time.perf_counter()
    try:
        if solver == "ip":
            rep = ipsolver.solve(problem, ipsolver.IPConfig(**config.ip_overrides))
        else:
            rep = multsolver.solve(problem, multsolver.MultConfig(**config.mult_overrides))
    except OptDesignError as exc:
        logger.error("%s on %s failed: %s", solver, problem.label, exc)
        return BenchRow(**head, objective=None, bestObjective=None, iterations=None, innerNewtonSteps=None,
                        wallTimeSeconds=time.perf_counter() - t0, terminationReason="Error",
                        supportSize=None, error=f"{type(exc).__name__}: {exc}")
    return BenchRow(
        **head,
        objective=float(rep.objective),
        bestObjective=None if rep.best_objective is None else float(rep.best_objective),
        iterations=rep.iterations,
        innerNewtonSteps=rep.inner_iterations if solver == "ip" else None,
        wallTimeSeconds=rep.wall_time_seconds,
        terminationReason=rep.termination_reason,
        supportSize=rep.support_size,
    )


def worker_count() -> int:
    raw = os.environ.get("OPTDESIGN_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"OPTDESIGN_THREADS must be an integer, got {raw!r}") from None


def aggregate_rows(rows: Sequence[BenchRow]) -> List[BenchRow]:
    """Mean over random-K seeds, one row per solver."""
    out = []
    for solver in dict.fromkeys(r.solver for r in rows):
        group = [r for r in rows if r.solver == solver and r.ok]
        if not group:
            continue
        best = [r.bestObjective for r in group if r.bestObjective is not None]
        inner = [r.innerNewtonSteps for r in group if r.innerNewtonSteps is not None]
        out.append(replace(
            group[0],
            kMode=f"mean of {len(group)} seeds",
            objective=float(np.mean([r.objective for r in group])),
            bestObjective=float(np.mean(best)) if best else None,
            iterations=int(round(np.mean([r.iterations for r in group]))),
            innerNewtonSteps=int(round(np.mean(inner))) if inner else None,
            wallTimeSeconds=float(np.mean([r.wallTimeSeconds for r in group])),
            terminationReason="/".join(sorted({r.terminationReason for r in group})),
            supportSize=int(round(np.mean([r.supportSize for r in group]))),
        ))
    return out


def run(config: RunConfig) -> List[BenchRow]:
    """One row per (K instance, solver), in a deterministic order."""
    cells = [(prob, label, s) for prob, label in _build_problems(config) for s in config.solvers]
    workers = min(worker_count(), len(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda c: _solve_row(*c, config), cells))
    else:
        rows = [_solve_row(*c, config) for c in cells]
    if config.aggregate and config.k_mode == "random":
        rows += aggregate_rows(rows)
    return rows


# ------------------------------------------------------------------------ emitters


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def to_json(rows: Sequence[BenchRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1)


def to_markdown(rows: Sequence[BenchRow]) -> str:
    lines = ["| space | n | criterion | K | solver | cpu | obj |", "|---|---|---|---|---|---|---|"]
    for r in rows:
        crit = r.criterion if r.p is None else f"{r.criterion}(p={r.p:g})"
        obj = r.bestObjective if r.bestObjective is not None and r.p is not None and r.p < -1 else r.objective
        obj_s = r.error or f"{obj:.6g}"
        lines.append(f"| {r.space} | {r.n} | {crit} | {r.kMode} | {r.solver} | {r.wallTimeSeconds:.2f} | {obj_s} |")
    return "\n".join(lines) + "\n"


def render(rows: Sequence[BenchRow], fmt: str) -> str:
    try:
        return {"csv": to_csv, "json": to_json, "md": to_markdown}[fmt](rows)
    except KeyError:
        raise ConfigError(f"format must be one of {FORMATS}") from None


def emit(rows: Sequence[BenchRow], fmt: str = "csv", path=None) -> str:
    """Render rows and write them to ``path`` (or return the text when path is None)."""
    text = render(rows, fmt)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_rows(path) -> List[BenchRow]:
    """Read rows written by :func:`emit` in JSON format."""
    with open(path, "r", encoding="utf-8") as fh:
        return [BenchRow(**obj) for obj in json.load(fh)]
