"""Mesh adaptive direct search on a bounded integer lattice.

Constraints ``g_i(x) <= 0`` are handled with a progressive barrier: the
search keeps a feasible incumbent (lowest ``f``) and an infeasible one
(lowest aggregate violation ``h = Σ max(0, g_i)²``) and polls around both.
When a descent stalls at the unit mesh, an optional variable-neighborhood
perturbation restarts it from a random nearby lattice point.

The objective is supplied as a batch callback ``evaluate(X) -> (F, G)``
over ``X`` of shape ``(B, d)`` so poll sets can be evaluated in one call.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

BatchEval = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


class NoEvaluations(RuntimeError):
    pass


@dataclass
class BoxedIntProblem:
    lower: np.ndarray
    upper: np.ndarray
    evaluate: BatchEval

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=np.int64)
        self.upper = np.asarray(self.upper, dtype=np.int64)
        if self.lower.shape != self.upper.shape or np.any(self.lower > self.upper):
            raise ValueError("invalid bounds")

    @property
    def dim(self) -> int:
        return self.lower.size

    @classmethod
    def from_callbacks(cls, lower, upper, objective: Callable[[np.ndarray], float],
                       constraints: Sequence[Callable[[np.ndarray], float]] = ()) -> "BoxedIntProblem":
        """Wrap scalar callbacks into a batch evaluator."""

        def evaluate(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            F = np.array([objective(x) for x in X], dtype=float)
            G = np.array([[g(x) for g in constraints] for x in X], dtype=float).reshape(len(X), len(constraints))
            return F, G

        return cls(np.asarray(lower), np.asarray(upper), evaluate)

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class Budget:
    max_evals: int | None = 2000
    max_seconds: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_evals is None and self.max_seconds is None:
            raise ValueError("budget needs an evaluation or time limit")


@dataclass
class SolveResult:
    point: np.ndarray
    f: float
    h: float
    evals: int
    iterations: int = 0
    # (best feasible f, best infeasible h, evals) each time an incumbent changes
    history: list[tuple[float, float, int]] = field(default_factory=list, repr=False)

    @property
    def feasible(self) -> bool:
        return self.h == 0.0


def violation(g: np.ndarray | Sequence[float]) -> float | np.ndarray:
    """Aggregate violation ``Σ max(0, g_i)²`` along the last axis."""
    g = np.asarray(g, dtype=float)
    return np.sum(np.maximum(g, 0.0) ** 2, axis=-1)


def problem_violation(problem: BoxedIntProblem, point: np.ndarray) -> float:
    _, G = problem.evaluate(np.asarray(point, dtype=np.int64)[None])
    return float(violation(G[0]))


def vns_perturb(incumbent: np.ndarray, k: int, rng: np.random.Generator,
                lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Random lattice point within L1 distance ``k`` of ``incumbent``.

    Takes ``k`` unit steps, each on a random coordinate with a random sign,
    clamping to the box after every step.
    """
    x = np.array(incumbent, dtype=np.int64)
    for _ in range(max(0, int(k))):
        i = rng.integers(x.size)
        x[i] = min(max(x[i] + (1 if rng.random() < 0.5 else -1), lower[i]), upper[i])
    return x


def warm_start(plan: np.ndarray, n_zones: int = 1) -> np.ndarray:
    """Shift a plan one step forward and repeat its last step.

    ``plan`` is ``(T, n_zones)`` or flat time-major; the output has the same shape.
    """
    plan = np.asarray(plan)
    steps = plan.reshape(-1, n_zones)
    out = np.concatenate([steps[1:], steps[-1:]], axis=0)
    return out.reshape(plan.shape)


# ---------------------------------------------------------------------------


def _key(x: np.ndarray) -> bytes:
    return x.astype(np.int64).tobytes()


class _Evaluator:
    def __init__(self, problem: BoxedIntProblem, budget: Budget, trace: list | None):
        self.problem = problem
        self.cache: dict[bytes, tuple[float, float]] = {}
        self.evals = 0
        self.max_evals = budget.max_evals
        self.deadline = None if budget.max_seconds is None else time.monotonic() + budget.max_seconds
        self.trace = trace
        self.mesh = 0

    def remaining(self) -> int:
        if self.deadline is not None and time.monotonic() >= self.deadline:
            return 0
        if self.max_evals is None:
            return 1 << 30
        return self.max_evals - self.evals

    @property
    def exhausted(self) -> bool:
        return self.remaining() <= 0

    def __call__(self, points: list[np.ndarray]) -> list[tuple[np.ndarray, float, float] | None]:
        fresh: list[np.ndarray] = []
        seen: set[bytes] = set()
        for p in points:
            k = _key(p)
            if k not in self.cache and k not in seen:
                seen.add(k)
                fresh.append(p)
        fresh = fresh[: max(0, self.remaining())]
        if fresh:
            F, G = self.problem.evaluate(np.array(fresh, dtype=np.int64))
            H = violation(G) if G.size else np.zeros(len(fresh))
            for p, f, h in zip(fresh, F, H):
                self.evals += 1
                self.cache[_key(p)] = (float(f), float(h))
                if self.trace is not None:
                    self.trace.append((self.evals, p.tolist(), float(f), float(h), self.mesh))
        out = []
        for p in points:
            v = self.cache.get(_key(p))
            out.append(None if v is None else (p, v[0], v[1]))
        return out


@dataclass
class _Incumbents:
    """Feasible and infeasible incumbents under the progressive barrier."""

    feas: tuple[float, tuple, np.ndarray] | None = None  # (f, lex, x)
    infeas: tuple[float, float, tuple, np.ndarray] | None = None  # (h, f, lex, x)
    h_max: float = np.inf

    def offer(self, x: np.ndarray, f: float, h: float) -> str:
        """Consider a point; returns 'success', 'improving' or 'none'."""
        lex = tuple(x.tolist())
        if h == 0.0:
            if self.feas is None or (f, lex) < self.feas[:2]:
                strictly = self.feas is None or f < self.feas[0]
                self.feas = (f, lex, x.copy())
                return "success" if strictly else "none"
            return "none"
        if h > self.h_max or not np.isfinite(h):
            return "none"
        if self.infeas is None:
            self.infeas = (h, f, lex, x.copy())
            return "success"
        ih, if_, ilex, _ = self.infeas
        if (h, f, lex) < (ih, if_, ilex):
            dominates = h <= ih and f <= if_ and (h < ih or f < if_)
            self.infeas = (h, f, lex, x.copy())
            if dominates:
                return "success"
            return "improving" if h < ih else "none"
        return "none"

    def tighten(self) -> None:
        if self.infeas is not None:
            self.h_max = self.infeas[0]

    def centers(self) -> list[np.ndarray]:
        out = []
        if self.feas is not None:
            out.append(self.feas[2])
        if self.infeas is not None and (self.feas is None or self.infeas[1] < self.feas[0]):
            out.append(self.infeas[3])
        return out

    def best(self) -> tuple[np.ndarray, float, float] | None:
        if self.feas is not None:
            return self.feas[2], self.feas[0], 0.0
        if self.infeas is not None:
            return self.infeas[3], self.infeas[1], self.infeas[0]
        return None


def _poll_points(center: np.ndarray, mesh: int, lower: np.ndarray, upper: np.ndarray) -> list[np.ndarray]:
    pts = []
    for i in range(center.size):
        for s in (mesh, -mesh):
            p = center.copy()
            p[i] = min(max(p[i] + s, lower[i]), upper[i])
            if p[i] != center[i]:
                pts.append(p)
    return pts


def solve(
    problem: BoxedIntProblem,
    start: np.ndarray,
    budget: Budget = Budget(),
    vns: bool = True,
    trace_path: str | None = None,
    max_vns_idle: int = 50,
) -> SolveResult:
    """Minimize ``f`` subject to ``g <= 0`` over the integer box.

    Returns the best feasible point found, or the least-violating one when
    no feasible point was evaluated.  Equal ``(f, h)`` ties go to the
    lexicographically smaller point.
    """
    start = np.asarray(start, dtype=np.int64)
    if not problem.contains(start):
        raise ValueError("start point outside the box")
    if budget.max_evals is not None and budget.max_evals <= 0:
        raise NoEvaluations("evaluation budget is zero")
    rng = np.random.default_rng(budget.seed)
    trace: list | None = [] if trace_path else None
    ev = _Evaluator(problem, budget, trace)
    glob = _Incumbents()
    lo, hi = problem.lower, problem.upper
    span = int(np.max(hi - lo)) if problem.dim else 0
    mesh0 = max(1, (span + 1) // 2)
    history: list[tuple[float, float, float]] = []
    iterations = 0

    def record():
        f = glob.feas[0] if glob.feas else np.inf
        h = glob.infeas[0] if glob.infeas else np.inf
        if not history or history[-1][:2] != (f, h):
            history.append((f, h, ev.evals))

    def feed(results, local: _Incumbents) -> str:
        outcome = "none"
        for r in results:
            if r is None:
                continue
            x, f, h = r
            glob.offer(x, f, h)
            o = local.offer(x, f, h)
            if o == "success" or (o == "improving" and outcome == "none"):
                outcome = o
        return outcome

    def descend(x0: np.ndarray) -> None:
        nonlocal iterations
        local = _Incumbents()
        feed(ev([x0]), local)
        glob.tighten()
        mesh = mesh0
        direction: np.ndarray | None = None
        while not ev.exhausted:
            iterations += 1
            ev.mesh = mesh
            centers = local.centers()
            if not centers:
                return
            primary = centers[0]
            if direction is not None:
                cand = np.clip(primary + direction, lo, hi)
                if np.any(cand != primary):
                    if feed(ev([cand]), local) == "success":
                        direction = cand - primary
                        mesh = min(2 * mesh, max(span, 1))
                        record()
                        continue
            pts = [p for c in centers for p in _poll_points(c, mesh, lo, hi)]
            outcome = feed(ev(pts), local)
            local.tighten()
            glob.tighten()
            record()
            if outcome == "success":
                new = local.centers()[0]
                direction = new - primary if np.any(new != primary) else None
                mesh = min(2 * mesh, max(span, 1))
            elif outcome == "improving":
                direction = None
            else:
                direction = None
                if mesh == 1:
                    return
                mesh = max(1, mesh // 2)

    descend(start)
    if vns and problem.dim:
        k, idle = 1, 0
        k_max = max(1, min(problem.dim, 8))
        while not ev.exhausted and idle < max_vns_idle:
            before_evals = ev.evals
            before = glob.best()
            base = before[0] if before else start
            descend(vns_perturb(base, k, rng, lo, hi))
            after = glob.best()
            improved = before is None or (after is not None and _rank(after) < _rank(before))
            k = 1 if improved else (k % k_max) + 1
            idle = 0 if ev.evals > before_evals else idle + 1

    best = glob.best()
    if best is None:
        raise NoEvaluations("no point could be evaluated within the budget")
    if trace_path:
        _write_trace(trace_path, trace or [])
    x, f, h = best
    return SolveResult(point=x, f=f, h=h, evals=ev.evals, iterations=iterations, history=history)


def _rank(best: tuple[np.ndarray, float, float]) -> tuple:
    x, f, h = best
    return (0, f, 0.0) if h == 0.0 else (1, h, f)


def result_rank(res: SolveResult) -> tuple:
    """Barrier ordering of results: feasible by ``f``, then infeasible by ``(h, f)``."""
    return _rank((res.point, res.f, res.h))


def _write_trace(path: str, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eval", "point", "f", "h", "mesh"])
        for n, p, f, h, m in rows:
            w.writerow([n, " ".join(str(v) for v in p), repr(f), repr(h), m])
