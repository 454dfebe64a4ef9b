"""Search over the shift ``n``: doubling until the loss vanishes, then bisection."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from ..blockmat import build_bundle
from ..graph import MapperGraph, common_grid
from ..loss import Assignment, LossReport
from .model import EmptyBlockInfeasible, build_model
from .solver import Budget, SolveResult, solve_exact

log = logging.getLogger(__name__)

UNBOUNDED = math.inf


@dataclass
class Step:
    n: int
    k: float
    proved: bool
    stats: dict
    result: Optional[SolveResult] = field(default=None, repr=False)

    @property
    def bound(self) -> float:
        return self.n + self.k

    def to_dict(self) -> dict:
        return {"n": self.n, "k": _num(self.k), "bound": _num(self.bound), "proved": self.proved,
                **{k: v for k, v in self.stats.items() if k != "proved"}}


def _num(x: float):
    return "inf" if math.isinf(x) else int(x)


@dataclass
class SearchTrace:
    steps: List[Step] = field(default_factory=list)
    bracket: Tuple[Optional[int], Optional[int]] = (None, None)

    @property
    def best(self) -> Step:
        # ties go to the smaller n, then the earlier step
        return min(self.steps, key=lambda s: (s.bound, s.n))

    @property
    def bound(self) -> float:
        return self.best.bound

    @property
    def proved(self) -> bool:
        return all(s.proved for s in self.steps)

    def k_at(self, n: int) -> Optional[float]:
        for s in self.steps:
            if s.n == n:
                return s.k
        return None

    def to_dict(self) -> dict:
        a, b = self.bracket
        return {"bound": _num(self.bound), "best_n": self.best.n, "bracket": [a, b],
                "proved": self.proved, "steps": [s.to_dict() for s in self.steps]}


def evaluate_n(f: MapperGraph, g: MapperGraph, n: int, budget: Budget = Budget()) -> Step:
    """Optimized loss at a single shift; infeasible shifts get ``k = inf``."""
    t0 = time.perf_counter()
    bundle = build_bundle(f, g, n)
    try:
        model = build_model(bundle)
    except EmptyBlockInfeasible as exc:
        log.info("n=%d infeasible: %s", n, exc)
        return Step(n, UNBOUNDED, True, {"nodes": 0, "seconds": round(time.perf_counter() - t0, 4),
                                          "checks": 0, "infeasible": True})
    res = solve_exact(model, budget)
    stats = res.stats()
    stats["seconds"] = round(time.perf_counter() - t0, 4)
    return Step(n, res.value, res.proved, stats, res)


def search_over_n(f: MapperGraph, g: MapperGraph, budget: Budget = Budget(),
                  evaluate: Callable[..., Step] = evaluate_n) -> SearchTrace:
    """Doubling phase over ``n = 0, 1, 2, 4, ...`` (capped at ``2L``) until ``k_n = 0``,
    then bisection of the bracket.  The bound is the least ``n + k_n`` seen."""
    f, g = common_grid(f, g)
    cap = 2 * f.grid.half_range
    trace = SearchTrace()
    seen: Dict[int, Step] = {}

    def run(n: int) -> Step:
        if n not in seen:
            seen[n] = evaluate(f, g, n, budget)
            trace.steps.append(seen[n])
            log.debug("n=%d k=%s", n, seen[n].k)
        return seen[n]

    prev, n = None, 0
    while True:
        if run(n).k == 0:
            break
        if n >= cap:
            trace.bracket = (n, None)
            return trace
        prev, n = n, min(cap, 1 if n == 0 else 2 * n)
    lo, hi = prev, n
    if lo is not None:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if run(mid).k == 0:
                hi = mid
            else:
                lo = mid
    trace.bracket = (lo, hi)
    return trace
