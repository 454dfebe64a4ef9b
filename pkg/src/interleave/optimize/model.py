"""Integer linear model of the loss minimization and its LP-file interchange.

Variables
    ``l``                          objective, integer >= 0
    ``x_<map>_<row>_<col>``        binary entry of an assignment matrix
    ``z_<term>_<i>_<j>_<k>``       binary product ``x_<a>_<i>_<j> * x_<b>_<j>_<k>`` in a triangle term
    ``c_<term>_<i>_<j>``           integer >= 0 with ``2 c >= k`` for triangle entry ``k``

Unbounded distances are written as the surrogate ``U = 4L + 2``; since every
finite loss is at most ``2L``, an optimum above ``2L`` means "unbounded".
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from ..blockmat import MatrixBundle
from ..loss import (MAPS, TERMS, Assignment, InfeasibleAssignment, LossReport, check_assignment,
                    evaluate_loss, map_domains)

UNBOUNDED = math.inf


class EmptyBlockInfeasible(InfeasibleAssignment):
    """A column has no admissible row, so no assignment exists."""


class MalformedSolution(ValueError):
    pass


class ConstraintViolation(ValueError):
    pass


class ObjectiveMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: Tuple[Tuple[str, int], ...]
    sense: str
    rhs: int


def x_name(m: str, row: int, col: int) -> str:
    return f"x_{m}_{row}_{col}"


@dataclass
class IlpModel:
    """Loss-minimization model for one bundle (pair of graphs at shift ``n``)."""

    bundle: MatrixBundle
    domains: Dict[str, List[np.ndarray]]

    @property
    def n(self) -> int:
        return self.bundle.n

    @property
    def half_range(self) -> int:
        return self.bundle.f.sys.base.grid.half_range

    @property
    def surrogate(self) -> int:
        return 4 * self.half_range + 2

    @cached_property
    def x_variables(self) -> List[str]:
        return [x_name(m, int(r), j) for m in MAPS for j, dom in enumerate(self.domains[m]) for r in dom]

    @cached_property
    def _x_lookup(self) -> Dict[str, Tuple[str, int, int]]:
        return {x_name(m, int(r), j): (m, int(r), j)
                for m in MAPS for j, dom in enumerate(self.domains[m]) for r in dom}

    @cached_property
    def constraints(self) -> List[Constraint]:
        return _build_constraints(self)

    @cached_property
    def z_variables(self) -> List[str]:
        return sorted({v for c in self.constraints if c.name.startswith("lin") for v, _ in c.coeffs
                       if v.startswith("z_")})

    @cached_property
    def c_variables(self) -> List[str]:
        return sorted({v for c in self.constraints if c.name.startswith("ceil") for v, _ in c.coeffs
                       if v.startswith("c_")})

    def x_values(self, a: Assignment) -> Dict[str, int]:
        vals = {v: 0 for v in self.x_variables}
        for m in MAPS:
            for j, r in enumerate(a[m].tolist()):
                vals[x_name(m, r, j)] = 1
        return vals

    def objective_lower_bound(self, a: Assignment) -> float:
        """Smallest ``l`` satisfying every constraint for the 0/1 point of ``a``."""
        vals: Dict[str, float] = dict(self.x_values(a))
        for c in self.constraints:
            if c.name.startswith("lin3"):
                (zv, _), (p, _), (q, _) = c.coeffs
                vals[zv] = vals[p] * vals[q]
        for c in self.constraints:
            if c.name.startswith("ceil"):
                (cv, two), *rest = c.coeffs
                k = c.rhs - sum(coef * vals[v] for v, coef in rest)
                vals[cv] = max(0, math.ceil(k / two))
        best = 0.0
        for c in self.constraints:
            if c.coeffs and c.coeffs[0][0] == "l":
                best = max(best, c.rhs - sum(coef * vals[v] for v, coef in c.coeffs[1:]))
        return self.decode_objective(best)

    def decode_objective(self, value: float) -> float:
        value = round(value)
        return UNBOUNDED if value > 2 * self.half_range else int(value)

    def assignment_from_values(self, values: Dict[str, float]) -> Assignment:
        maps = {}
        for m in MAPS:
            targets = []
            for j, dom in enumerate(self.domains[m]):
                ones = []
                for r in dom:
                    name = x_name(m, int(r), j)
                    if name not in values:
                        raise MalformedSolution(f"solution lacks variable {name}")
                    v = values[name]
                    if v not in (0, 1):
                        raise ConstraintViolation(f"{name} = {v} is not binary")
                    if v == 1:
                        ones.append(int(r))
                if len(ones) != 1:
                    raise ConstraintViolation(f"column {j} of {m} has {len(ones)} ones, expected 1")
                targets.append(ones[0])
            maps[m] = np.asarray(targets, dtype=np.int64)
        return Assignment(self.n, maps)


def build_model(bundle: MatrixBundle) -> IlpModel:
    """Model whose optimum is the least loss over all assignments at ``bundle.n``.

    Raises :class:`EmptyBlockInfeasible` if some column has no admissible row.
    """
    doms = map_domains(bundle)
    for m in MAPS:
        for j, dom in enumerate(doms[m]):
            if not len(dom):
                raise EmptyBlockInfeasible(f"{m} column {j} has no admissible row at its level")
    return IlpModel(bundle, doms)


# -- constraint generation -------------------------------------------------

def _build_constraints(model: IlpModel) -> List[Constraint]:
    b, doms, U = model.bundle, model.domains, model.surrogate
    F, G = b.f, b.g
    fs, gs = F.sys, G.sys
    out: List[Constraint] = []

    for m in MAPS:
        for j, dom in enumerate(doms[m]):
            out.append(Constraint(f"onehot_{m}_{j}", tuple((x_name(m, int(r), j), 1) for r in dom), "=", 1))

    def finite(d):
        return np.where(np.isinf(d), U, d).astype(np.int64)

    def block_rows(d_partition_levels, level):
        return np.flatnonzero(d_partition_levels == level)

    def parallelogram(term, dmat, xmap, xcols, ymap, ycols, yrow):
        """``l >= sum_a D[r,a] x_a - sum_b D[r, yrow(b)] y_b`` for every row ``r``."""
        d = finite(dmat.values)
        rlev = dmat.row_levels
        for j in range(len(xcols)):
            xc, yc = int(xcols[j]), int(ycols[j])
            xdom, ydom = doms[xmap][xc], doms[ymap][yc]
            level = int(rlev[xdom[0]])
            for r in block_rows(rlev, level):
                coeffs: Dict[str, int] = {}
                for a in xdom.tolist():
                    if d[r, a]:
                        coeffs[x_name(xmap, a, xc)] = coeffs.get(x_name(xmap, a, xc), 0) - int(d[r, a])
                for bb in ydom.tolist():
                    w = int(d[r, yrow[bb]])
                    if w:
                        coeffs[x_name(ymap, bb, yc)] = coeffs.get(x_name(ymap, bb, yc), 0) + w
                coeffs = {k: v for k, v in coeffs.items() if v}
                if coeffs:
                    out.append(Constraint(f"para_{term}_{r}_{j}", (("l", 1),) + tuple(coeffs.items()), ">=", 0))

    def triangle(term, dmat, ii, first, second):
        """``2 c_rj >= D[r, ii(j)] - sum D[r, z] * (second[z, y] * first[y, j])``."""
        d = finite(dmat.values)
        rlev = dmat.row_levels
        for j in range(len(doms[first])):
            level = int(rlev[ii[j]])
            prods = []
            for y in doms[first][j].tolist():
                for zz in doms[second][y].tolist():
                    zv = f"z_{term}_{zz}_{y}_{j}"
                    p, q = x_name(second, zz, y), x_name(first, y, j)
                    out.append(Constraint(f"lin1_{zv}", ((zv, 1), (p, -1)), "<=", 0))
                    out.append(Constraint(f"lin2_{zv}", ((zv, 1), (q, -1)), "<=", 0))
                    out.append(Constraint(f"lin3_{zv}", ((zv, 1), (p, -1), (q, -1)), ">=", -1))
                    prods.append((zv, zz))
            for r in block_rows(rlev, level):
                coeffs = tuple((zv, int(d[r, zz])) for zv, zz in prods if d[r, zz])
                rhs = int(d[r, ii[j]])
                if not coeffs and rhs <= 0:
                    continue
                cv = f"c_{term}_{r}_{j}"
                out.append(Constraint(f"ceil_{cv}", ((cv, 2),) + coeffs, ">=", rhs))
                out.append(Constraint(f"obj_{cv}", (("l", 1), (cv, -1)), ">=", 0))

    fb, gb, fn, gn = fs.base, gs.base, fs.smooth_n, gs.smooth_n
    parallelogram("ev_phi_up", G.d_v_n, "phi_v", fb.edge_upper, "phi_e", np.arange(fb.n_edges), gn.edge_upper)
    parallelogram("ev_phi_down", G.d_v_n, "phi_v", fb.edge_lower, "phi_e", np.arange(fb.n_edges), gn.edge_lower)
    parallelogram("ev_psi_up", F.d_v_n, "psi_v", gb.edge_upper, "psi_e", np.arange(gb.n_edges), fn.edge_upper)
    parallelogram("ev_psi_down", F.d_v_n, "psi_v", gb.edge_lower, "psi_e", np.arange(gb.n_edges), fn.edge_lower)
    parallelogram("thick_phi_v", G.d_v_2n, "phin_v", fs.incl_v_base, "phi_v", np.arange(fb.n_vertices), gs.incl_v_n)
    parallelogram("thick_phi_e", G.d_e_2n, "phin_e", fs.incl_e_base, "phi_e", np.arange(fb.n_edges), gs.incl_e_n)
    parallelogram("thick_psi_v", F.d_v_2n, "psin_v", gs.incl_v_base, "psi_v", np.arange(gb.n_vertices), fs.incl_v_n)
    parallelogram("thick_psi_e", F.d_e_2n, "psin_e", gs.incl_e_base, "psi_e", np.arange(gb.n_edges), fs.incl_e_n)
    triangle("tri_f_v", F.d_v_2n, fs.incl_v_n[fs.incl_v_base], "phi_v", "psin_v")
    triangle("tri_f_e", F.d_e_2n, fs.incl_e_n[fs.incl_e_base], "phi_e", "psin_e")
    triangle("tri_g_v", G.d_v_2n, gs.incl_v_n[gs.incl_v_base], "psi_v", "phin_v")
    triangle("tri_g_e", G.d_e_2n, gs.incl_e_n[gs.incl_e_base], "psi_e", "phin_e")
    return out


# -- LP file ----------------------------------------------------------------

_HEADER = """\\ Loss minimization for an n-assignment between two mapper graphs.
\\ n = {n}, half range L = {L}; unbounded distances use the surrogate U = {U}.
\\ An optimum above 2L = {twoL} means no finite bound exists at this n.
\\ Variables:
\\   l                     objective (integer >= 0)
\\   x_<map>_<row>_<col>   binary assignment entry; map in {maps}
\\   z_<term>_<i>_<j>_<k>  binary product x_<second>_<i>_<j> * x_<first>_<j>_<k>
\\   c_<term>_<i>_<j>      integer >= 0 with 2 c >= triangle entry (i, j)
"""


def _expr(coeffs: Iterable[Tuple[str, int]]) -> str:
    parts = []
    for k, (v, c) in enumerate(coeffs):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        term = v if mag == 1 else f"{mag} {v}"
        if k == 0:
            parts.append(term if c > 0 else f"- {term}")
        else:
            parts.append(f"{sign} {term}")
    return " ".join(parts)


def _wrap(line: str, width: int = 200) -> List[str]:
    if len(line) <= width:
        return [line]
    out, cur = [], ""
    for tok in line.split(" "):
        if cur and len(cur) + 1 + len(tok) > width:
            out.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    out.append(cur)
    return out


def lp_text(model: IlpModel) -> str:
    L = model.half_range
    lines = _HEADER.format(n=model.n, L=L, U=model.surrogate, twoL=2 * L, maps=", ".join(MAPS)).splitlines()
    lines += ["Minimize", " obj: l", "Subject To"]
    for c in model.constraints:
        lines += _wrap(f" {c.name}: {_expr(c.coeffs)} {c.sense} {c.rhs}")
    lines.append("Bounds")
    lines.append(" l >= 0")
    for v in model.c_variables:
        lines.append(f" {v} >= 0")
    lines.append("Binaries")
    for v in model.x_variables + model.z_variables:
        lines.append(f" {v}")
    lines.append("Generals")
    lines.append(" l")
    for v in model.c_variables:
        lines.append(f" {v}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: IlpModel, destination: Union[str, Path]) -> Path:
    path = Path(destination)
    path.write_text(lp_text(model))
    return path


# -- solutions ----------------------------------------------------------------

_NUM = re.compile(r"^[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?$|^[-+]?inf$")


def read_solution(path: Union[str, Path]) -> Tuple[Dict[str, float], Optional[float]]:
    """Parse ``name value`` lines and an optional ``objective <v>`` line."""
    values: Dict[str, float] = {}
    objective = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or not _NUM.match(parts[1]):
            raise MalformedSolution(f"line {lineno}: expected 'name value', got {raw!r}")
        name, val = parts[0], float(parts[1])
        if name == "objective":
            objective = val
            continue
        if name in values:
            raise MalformedSolution(f"line {lineno}: duplicate variable {name}")
        values[name] = round(val) if abs(val - round(val)) < 1e-6 else val
    return values, objective


def write_solution(model: IlpModel, a: Assignment, path: Union[str, Path],
                   objective: Optional[float] = None) -> None:
    """Write the nonzero-or-not x values of ``a`` plus its objective."""
    if objective is None:
        objective = model.objective_lower_bound(a)
    obj = model.surrogate if math.isinf(objective) else int(objective)
    lines = [f"objective {obj}"] + [f"{k} {v}" for k, v in model.x_values(a).items()]
    Path(path).write_text("\n".join(lines) + "\n")


def import_solution(model: IlpModel, path: Union[str, Path]) -> Tuple[Assignment, LossReport]:
    """Rebuild the assignment from a solver's solution and re-check its loss."""
    values, objective = read_solution(path)
    a = model.assignment_from_values(values)
    check_assignment(model.bundle, a)
    report = evaluate_loss(model.bundle, a)
    if objective is None:
        raise MalformedSolution("solution has no objective line")
    claimed = model.decode_objective(objective)
    if claimed != report.aggregate:
        raise ObjectiveMismatch(f"claimed objective {claimed}, recomputed loss {report.aggregate}")
    return a, report
