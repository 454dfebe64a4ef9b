"""Exact minimization of the extended-basis loss for a fixed shift.

Every loss term is a maximum over columns, and each column's value depends
on two assignment columns only: a parallelogram column on two fixed columns,
a triangle column on ``phi(v)`` and the column of ``psi^n`` it selects.  A
triangle is therefore split into one binary table per candidate ``y`` of
``phi(v)``, with nonzero cost only when ``phi(v) = y``.

The optimum is the least threshold ``t`` at which the constraint network
"every table entry used is <= t" is satisfiable.  Thresholds are bisected
between a lower bound and the incumbent; each check is a depth-first search
over column choices with arc-consistency propagation (bitmask supports)
and dom/wdeg variable ordering.
"""
from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..loss import MAPS, Assignment, ColumnEvaluator, LossReport, evaluate_loss
from .model import IlpModel

log = logging.getLogger(__name__)

UNBOUNDED = math.inf


@dataclass(frozen=True)
class Budget:
    nodes: int = 1_000_000
    seconds: float = 60.0

    def __post_init__(self):
        if self.nodes <= 0 or self.seconds <= 0:
            raise ValueError("budgets must be positive")


class BudgetExceeded(RuntimeError):
    pass


class _Clock:
    def __init__(self, budget: Budget):
        self.budget = budget
        self.start = time.perf_counter()
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.nodes > self.budget.nodes:
            raise BudgetExceeded("node budget exhausted")
        if self.nodes % 256 == 0 and time.perf_counter() - self.start > self.budget.seconds:
            raise BudgetExceeded("time budget exhausted")

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start


@dataclass
class SolveResult:
    assignment: Assignment
    report: LossReport
    proved: bool
    nodes: int = 0
    seconds: float = 0.0
    checks: int = 0

    @property
    def value(self) -> float:
        return self.report.aggregate

    def stats(self) -> dict:
        return {"nodes": self.nodes, "seconds": round(self.seconds, 4), "checks": self.checks,
                "proved": self.proved}


def _mask(row: np.ndarray) -> int:
    return int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")


class _Network:
    """Variables are assignment columns; factors are binary cost tables."""

    def __init__(self, model: IlpModel):
        b, doms = model.bundle, model.domains
        self.var_of: Dict[Tuple[str, int], int] = {}
        self.values: List[np.ndarray] = []
        for m in MAPS:
            for j, dom in enumerate(doms[m]):
                self.var_of[(m, j)] = len(self.values)
                self.values.append(np.asarray(dom, dtype=np.int64))
        self.factors: List[Tuple[int, int, np.ndarray]] = []
        self._build(b)
        costs = [c[np.isfinite(c)] for _, _, c in self.factors]
        finite = np.unique(np.concatenate(costs)) if costs else np.zeros(0)
        self.levels = [float(v) for v in finite] + [UNBOUNDED]
        if 0.0 not in self.levels:
            self.levels.insert(0, 0.0)
        self.lower = max((float(c.min()) for _, _, c in self.factors if c.size), default=0.0)

    def _pair(self, xm, xc, ym, yc, cost):
        self.factors.append((self.var_of[(xm, xc)], self.var_of[(ym, yc)], cost))

    def _build(self, b):
        F, G = b.f, b.g
        fs, gs = F.sys, G.sys
        fb, gb, fn, gn = fs.base, gs.base, fs.smooth_n, gs.smooth_n
        V = self.values

        def para(d, xm, xcols, ym, yrow):
            for j, xc in enumerate(np.asarray(xcols).tolist()):
                xv, yv = V[self.var_of[(xm, xc)]], V[self.var_of[(ym, j)]]
                self._pair(xm, xc, ym, j, d[np.ix_(xv, yrow[yv])])

        para(G.d_v_n.values, "phi_v", fb.edge_upper, "phi_e", gn.edge_upper)
        para(G.d_v_n.values, "phi_v", fb.edge_lower, "phi_e", gn.edge_lower)
        para(F.d_v_n.values, "psi_v", gb.edge_upper, "psi_e", fn.edge_upper)
        para(F.d_v_n.values, "psi_v", gb.edge_lower, "psi_e", fn.edge_lower)
        para(G.d_v_2n.values, "phin_v", fs.incl_v_base, "phi_v", gs.incl_v_n)
        para(G.d_e_2n.values, "phin_e", fs.incl_e_base, "phi_e", gs.incl_e_n)
        para(F.d_v_2n.values, "psin_v", gs.incl_v_base, "psi_v", fs.incl_v_n)
        para(F.d_e_2n.values, "psin_e", gs.incl_e_base, "psi_e", fs.incl_e_n)

        def tri(d, ii, first, second):
            for j in range(len(ii)):
                xv = V[self.var_of[(first, j)]]
                for p, y in enumerate(xv.tolist()):
                    zv = V[self.var_of[(second, y)]]
                    cost = np.zeros((len(xv), len(zv)))
                    cost[p] = np.ceil(d[ii[j], zv] / 2)
                    if cost.any():
                        self._pair(first, j, second, y, cost)

        tri(F.d_v_2n.values, fs.incl_v_n[fs.incl_v_base], "phi_v", "psin_v")
        tri(F.d_e_2n.values, fs.incl_e_n[fs.incl_e_base], "phi_e", "psin_e")
        tri(G.d_v_2n.values, gs.incl_v_n[gs.incl_v_base], "psi_v", "phin_v")
        tri(G.d_e_2n.values, gs.incl_e_n[gs.incl_e_base], "psi_e", "phin_e")

    def value_of(self, choice: List[int]) -> float:
        """Largest table entry used by a full choice of value positions."""
        best = 0.0
        for x, y, cost in self.factors:
            best = max(best, float(cost[choice[x], choice[y]]))
        return best

    def to_assignment(self, n: int, choice: List[int]) -> Assignment:
        maps = {m: [] for m in MAPS}
        for (m, j), var in self.var_of.items():
            maps[m].append(int(self.values[var][choice[var]]))
        return Assignment(n, {m: np.asarray(v, dtype=np.int64) for m, v in maps.items()})

    # -- satisfiability at a threshold ---------------------------------------
    def satisfy(self, t: float, clock: _Clock) -> Optional[List[int]]:
        nvar = len(self.values)
        adj: List[List[Tuple[int, List[int], int]]] = [[] for _ in range(nvar)]
        nbr: List[List[Tuple[int, int]]] = [[] for _ in range(nvar)]
        dom = [(1 << len(v)) - 1 for v in self.values]
        weight: List[int] = []   # per active factor, bumped on every domain wipeout
        for x, y, cost in self.factors:
            ok = cost <= t
            if ok.all():
                continue
            fid = len(weight)
            weight.append(1)
            adj[y].append((x, [_mask(r) for r in ok], fid))      # supports of x-values among y
            adj[x].append((y, [_mask(c) for c in ok.T], fid))
            nbr[x].append((y, fid))
            nbr[y].append((x, fid))
        if not self._propagate(dom, range(nvar), adj, weight):
            return None
        stack = [dom]
        while stack:
            clock.tick()
            cur = stack.pop()
            # dom/wdeg: smallest domain per unit of conflict weight among open neighbours
            var, best = -1, None
            for i, d in enumerate(cur):
                if d & (d - 1) == 0:
                    continue
                wdeg = sum(weight[f] for j, f in nbr[i] if cur[j] & (cur[j] - 1))
                score = d.bit_count() / (wdeg or 0.5)
                if best is None or score < best:
                    var, best = i, score
            if var < 0:
                return [d.bit_length() - 1 for d in cur]
            # push in reverse so the smallest value is explored first
            options = []
            m = cur[var]
            while m:
                low = m & -m
                m ^= low
                options.append(low)
            for low in reversed(options):
                nxt = list(cur)
                nxt[var] = low
                if self._propagate(nxt, (var,), adj, weight):
                    stack.append(nxt)
        return None

    @staticmethod
    def _propagate(dom: List[int], changed, adj, weight: List[int]) -> bool:
        queue = deque(changed)
        queued = set(queue)
        while queue:
            y = queue.popleft()
            queued.discard(y)
            dy = dom[y]
            for x, sup, fid in adj[y]:
                dx = dom[x]
                new = dx
                m = dx
                while m:
                    low = m & -m
                    m ^= low
                    if not sup[low.bit_length() - 1] & dy:
                        new ^= low
                if new != dx:
                    if not new:
                        weight[fid] += 1
                        return False
                    dom[x] = new
                    if x not in queued:
                        queue.append(x)
                        queued.add(x)
        return True


def solve_exact(model: IlpModel, budget: Budget = Budget()) -> SolveResult:
    """Least loss over all assignments of ``model``.

    Returns the best assignment found with its loss report re-checked by the
    matrix evaluator.  ``proved`` is False when the budget ran out first; the
    incumbent is still a valid assignment and so still yields a valid bound.
    """
    clock = _Clock(budget)
    net = _Network(model)
    levels = net.levels
    checks = 0
    proved = True

    # incumbent: the first solution with no threshold
    choice = net.satisfy(UNBOUNDED, _Clock(Budget(nodes=10**9, seconds=math.inf)))
    assert choice is not None, "an unconstrained network is always satisfiable"
    upper = net.value_of(choice)
    lo = next(k for k, v in enumerate(levels) if v >= net.lower)
    hi = levels.index(upper)
    try:
        while lo < hi:
            mid = (lo + hi) // 2
            checks += 1
            found = net.satisfy(levels[mid], clock)
            if found is None:
                lo = mid + 1
            else:
                choice = found
                upper = net.value_of(found)
                hi = levels.index(upper)
    except BudgetExceeded as exc:
        log.info("budget exhausted at n=%d after %d nodes: %s", model.n, clock.nodes, exc)
        proved = False

    a = net.to_assignment(model.n, choice)
    report = evaluate_loss(model.bundle, a)
    claimed = UNBOUNDED if math.isinf(upper) else int(upper)
    if report.aggregate != claimed:
        raise AssertionError(f"solver value {claimed} disagrees with loss {report.aggregate}")
    return SolveResult(a, report, proved, clock.nodes, clock.elapsed, checks)
