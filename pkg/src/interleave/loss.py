"""Assignments between two mapper graphs and the extended-basis loss.

An assignment is stored as eight target-index arrays, one per set map:

========  ==================  ======================
name      map                 matrix shape
========  ==================  ======================
phi_v     V(F)   -> V(G^n)    |V(G^n)|  x |V(F)|
phi_e     E(F)   -> E(G^n)    |E(G^n)|  x |E(F)|
phin_v    V(F^n) -> V(G^2n)   |V(G^2n)| x |V(F^n)|
phin_e    E(F^n) -> E(G^2n)
psi_v     V(G)   -> V(F^n)
psi_e     E(G)   -> E(F^n)
psin_v    V(G^n) -> V(F^2n)
psin_e    E(G^n) -> E(F^2n)
========  ==================  ======================
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .blockmat import ASSIGNMENT, BlockMatrix, MatrixBundle, ShapeMismatch, block_multiply, one_hot
from .graph import MapperGraph, Smoothing

UNBOUNDED = math.inf

MAPS = ("phi_v", "phi_e", "phin_v", "phin_e", "psi_v", "psi_e", "psin_v", "psin_e")

TERMS = (
    "ev_phi_up", "ev_phi_down", "ev_psi_up", "ev_psi_down",
    "thick_phi_v", "thick_phi_e", "thick_psi_v", "thick_psi_e",
    "tri_f_v", "tri_f_e", "tri_g_v", "tri_g_e",
)
TRIANGLES = frozenset(t for t in TERMS if t.startswith("tri_"))


class InfeasibleAssignment(ValueError):
    """Some element has no admissible target at its level."""


# -- domains and assignments ----------------------------------------------

def _map_spaces(bundle: MatrixBundle):
    """For each map: (source graph, target graph, kind)."""
    f, g = bundle.f.sys, bundle.g.sys
    return {
        "phi_v": (f.base, g.smooth_n, "v"), "phi_e": (f.base, g.smooth_n, "e"),
        "phin_v": (f.smooth_n, g.smooth_2n, "v"), "phin_e": (f.smooth_n, g.smooth_2n, "e"),
        "psi_v": (g.base, f.smooth_n, "v"), "psi_e": (g.base, f.smooth_n, "e"),
        "psin_v": (g.smooth_n, f.smooth_2n, "v"), "psin_e": (g.smooth_n, f.smooth_2n, "e"),
    }


def _levels(g: MapperGraph, kind: str) -> np.ndarray:
    return g.vertex_level if kind == "v" else g.edge_level


def map_domains(bundle: MatrixBundle) -> Dict[str, List[np.ndarray]]:
    """Admissible target indices for every column of every map (same level)."""
    out = {}
    for name, (src, dst, kind) in _map_spaces(bundle).items():
        tl = _levels(dst, kind)
        by_level: Dict[int, np.ndarray] = {}
        cols = []
        for lev in _levels(src, kind).tolist():
            if lev not in by_level:
                by_level[lev] = np.flatnonzero(tl == lev)
            cols.append(by_level[lev])
        out[name] = cols
    return out


def is_feasible(bundle: MatrixBundle) -> bool:
    return all(len(c) for cols in map_domains(bundle).values() for c in cols)


@dataclass(frozen=True)
class Assignment:
    """Eight set maps given as target-index arrays, for shift ``n``."""

    n: int
    maps: Dict[str, np.ndarray]

    def __post_init__(self):
        missing = set(MAPS) - set(self.maps)
        if missing:
            raise ValueError(f"assignment lacks maps {sorted(missing)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.maps[name]

    def swapped(self) -> "Assignment":
        """The same assignment read with the two graphs' roles exchanged."""
        m = self.maps
        return Assignment(self.n, {"phi_v": m["psi_v"], "phi_e": m["psi_e"], "phin_v": m["psin_v"],
                                   "phin_e": m["psin_e"], "psi_v": m["phi_v"], "psi_e": m["phi_e"],
                                   "psin_v": m["phin_v"], "psin_e": m["phin_e"]})

    def key(self) -> tuple:
        return tuple(tuple(self.maps[k].tolist()) for k in MAPS)

    def to_dict(self) -> dict:
        return {"n": self.n, "maps": {k: self.maps[k].tolist() for k in MAPS}}

    @classmethod
    def from_dict(cls, d: dict) -> "Assignment":
        return cls(int(d["n"]), {k: np.asarray(d["maps"][k], dtype=np.int64) for k in MAPS})

    def matrices(self, bundle: MatrixBundle) -> Dict[str, BlockMatrix]:
        out = {}
        for name, (src, dst, kind) in _map_spaces(bundle).items():
            if kind == "v":
                rp, cp = dst.vertex_partition(), src.vertex_partition()
            else:
                rp, cp = dst.edge_partition(), src.edge_partition()
            out[name] = one_hot(self.maps[name], rp, cp, ASSIGNMENT)
        return out

    @classmethod
    def from_matrices(cls, n: int, mats: Dict[str, BlockMatrix]) -> "Assignment":
        for name in MAPS:
            v = mats[name].values
            if v.shape[1] and not np.all(v.sum(axis=0) == 1):
                raise ValueError(f"{name} is not column-one-hot")
        return cls(n, {k: mats[k].column_targets().astype(np.int64) for k in MAPS})


def check_assignment(bundle: MatrixBundle, a: Assignment) -> None:
    """Raise on wrong lengths or targets outside the level-aligned block."""
    doms = map_domains(bundle)
    if a.n != bundle.n:
        raise ShapeMismatch(f"assignment is for n={a.n}, bundle for n={bundle.n}")
    for name in MAPS:
        t, cols = np.asarray(a.maps[name]), doms[name]
        if len(t) != len(cols):
            raise ShapeMismatch(f"{name}: {len(t)} columns, expected {len(cols)}")
        for j, (x, dom) in enumerate(zip(t.tolist(), cols)):
            if not len(dom):
                raise InfeasibleAssignment(f"{name} column {j} has no admissible target")
            if x not in dom:
                raise ShapeMismatch(f"{name} column {j} maps outside its level block")


def naive_assignment(bundle: MatrixBundle) -> Assignment:
    """First admissible target for every column."""
    doms = map_domains(bundle)
    maps = {}
    for name in MAPS:
        if any(len(c) == 0 for c in doms[name]):
            raise InfeasibleAssignment(f"{name} has a column with no admissible target")
        maps[name] = np.array([int(c[0]) for c in doms[name]], dtype=np.int64)
    return Assignment(bundle.n, maps)


def random_assignment(bundle: MatrixBundle, rng: np.random.Generator) -> Assignment:
    doms = map_domains(bundle)
    maps = {}
    for name in MAPS:
        if any(len(c) == 0 for c in doms[name]):
            raise InfeasibleAssignment(f"{name} has a column with no admissible target")
        maps[name] = np.array([int(rng.choice(c)) for c in doms[name]], dtype=np.int64)
    return Assignment(bundle.n, maps)


# -- loss evaluation --------------------------------------------------------

@dataclass
class LossReport:
    """Per-term losses with witnesses, the aggregate and the resulting bound."""

    n: int
    per_term: Dict[str, float]
    witnesses: Dict[str, Optional[Tuple[int, int]]] = field(default_factory=dict)

    @property
    def aggregate(self) -> float:
        return max(self.per_term.values()) if self.per_term else 0

    @property
    def bound(self) -> float:
        return self.n + self.aggregate

    @property
    def worst_term(self) -> str:
        return max(TERMS, key=lambda t: self.per_term[t])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "aggregate": _num(self.aggregate),
            "bound": _num(self.bound),
            "per_term": {t: _num(self.per_term[t]) for t in TERMS},
            "witnesses": {t: list(self.witnesses[t]) if self.witnesses.get(t) else None for t in TERMS},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _num(x: float):
    return "inf" if math.isinf(x) else int(x)


def _term_products(bundle: MatrixBundle, m: Dict[str, BlockMatrix]) -> Dict[str, Callable[[], BlockMatrix]]:
    F, G = bundle.f, bundle.g
    mul = block_multiply

    def ev(d, a_v, b_src, b_dst, a_e):
        return lambda: mul(d, mul(a_v, b_src) - mul(b_dst, a_e))

    def tri(d, i_n, i, a2, a1):
        return lambda: mul(d, mul(i_n, i) - mul(a2, a1))

    return {
        "ev_phi_up": ev(G.d_v_n, m["phi_v"], F.b_up, G.b_up_n, m["phi_e"]),
        "ev_phi_down": ev(G.d_v_n, m["phi_v"], F.b_down, G.b_down_n, m["phi_e"]),
        "ev_psi_up": ev(F.d_v_n, m["psi_v"], G.b_up, F.b_up_n, m["psi_e"]),
        "ev_psi_down": ev(F.d_v_n, m["psi_v"], G.b_down, F.b_down_n, m["psi_e"]),
        "thick_phi_v": ev(G.d_v_2n, m["phin_v"], F.i_v, G.i_v_n, m["phi_v"]),
        "thick_phi_e": ev(G.d_e_2n, m["phin_e"], F.i_e, G.i_e_n, m["phi_e"]),
        "thick_psi_v": ev(F.d_v_2n, m["psin_v"], G.i_v, F.i_v_n, m["psi_v"]),
        "thick_psi_e": ev(F.d_e_2n, m["psin_e"], G.i_e, F.i_e_n, m["psi_e"]),
        "tri_f_v": tri(F.d_v_2n, F.i_v_n, F.i_v, m["psin_v"], m["phi_v"]),
        "tri_f_e": tri(F.d_e_2n, F.i_e_n, F.i_e, m["psin_e"], m["phi_e"]),
        "tri_g_v": tri(G.d_v_2n, G.i_v_n, G.i_v, m["phin_v"], m["psi_v"]),
        "tri_g_e": tri(G.d_e_2n, G.i_e_n, G.i_e, m["phin_e"], m["psi_e"]),
    }


def term_product(bundle: MatrixBundle, a: Assignment, term: str) -> BlockMatrix:
    """The loss matrix of one term, before taking its maximum."""
    check_assignment(bundle, a)
    return _term_products(bundle, a.matrices(bundle))[term]()


def _max_entry(p: BlockMatrix, triangle: bool) -> Tuple[float, Optional[Tuple[int, int]]]:
    v = p.values
    if v.size == 0 or np.all(np.isnan(v)):
        return 0, None
    # nan marks inf - inf rows, which never hold a column maximum
    flat = int(np.nanargmax(v))
    r, c = divmod(flat, v.shape[1])
    x = float(v[r, c])
    if x <= 0:
        return 0, None
    if triangle and math.isfinite(x):
        x = math.ceil(x / 2)
    return (UNBOUNDED if math.isinf(x) else int(x)), (r, c)


def per_term_loss(bundle: MatrixBundle, a: Assignment, term: str) -> Tuple[float, Optional[Tuple[int, int]]]:
    """Value and witness ``(row, column)`` of a single loss term."""
    if term not in TERMS:
        raise KeyError(f"unknown loss term {term!r}")
    return _max_entry(term_product(bundle, a, term), term in TRIANGLES)


def evaluate_loss(bundle: MatrixBundle, a: Assignment) -> LossReport:
    """All twelve loss terms from explicit block-matrix products."""
    check_assignment(bundle, a)
    products = _term_products(bundle, a.matrices(bundle))
    per, wit = {}, {}
    for t in TERMS:
        per[t], wit[t] = _max_entry(products[t](), t in TRIANGLES)
    return LossReport(bundle.n, per, wit)


def is_interleaving(bundle: MatrixBundle, a: Assignment) -> bool:
    return evaluate_loss(bundle, a).aggregate == 0


# -- column-local evaluation ------------------------------------------------

class ColumnEvaluator:
    """Loss terms evaluated column by column from distance lookups.

    Every column of a term product is ``D[:, x] - D[:, y]`` for one-hot
    targets ``x``, ``y``; by the ultrametric inequality its maximum is
    ``D[x, y]``.  This gives the same values as :func:`evaluate_loss` at a
    fraction of the cost and is what the optimizers use.
    """

    def __init__(self, bundle: MatrixBundle):
        self.bundle = bundle
        F, G = bundle.f, bundle.g
        self.d = {"F_v_n": F.d_v_n.values, "F_v_2n": F.d_v_2n.values, "F_e_2n": F.d_e_2n.values,
                  "G_v_n": G.d_v_n.values, "G_v_2n": G.d_v_2n.values, "G_e_2n": G.d_e_2n.values}
        fs, gs = F.sys, G.sys
        self.f, self.g = fs, gs
        self.f_ii_v = fs.incl_v_n[fs.incl_v_base]
        self.f_ii_e = fs.incl_e_n[fs.incl_e_base]
        self.g_ii_v = gs.incl_v_n[gs.incl_v_base]
        self.g_ii_e = gs.incl_e_n[gs.incl_e_base]

    def columns(self, a) -> Dict[str, np.ndarray]:
        """Per-column loss values for all terms.

        ``a`` is an :class:`Assignment` or a mapping of map names to target
        arrays; 2-D arrays score a batch of assignments (one per row).
        """
        f, g, d = self.f, self.g, self.d
        fb, gb, fn, gn = f.base, g.base, f.smooth_n, g.smooth_n
        phi_v, phi_e, phin_v, phin_e = a["phi_v"], a["phi_e"], a["phin_v"], a["phin_e"]
        psi_v, psi_e, psin_v, psin_e = a["psi_v"], a["psi_e"], a["psin_v"], a["psin_e"]

        def comp(outer, inner):
            return np.take_along_axis(outer, inner, axis=-1)

        return {
            "ev_phi_up": d["G_v_n"][phi_v[..., fb.edge_upper], gn.edge_upper[phi_e]],
            "ev_phi_down": d["G_v_n"][phi_v[..., fb.edge_lower], gn.edge_lower[phi_e]],
            "ev_psi_up": d["F_v_n"][psi_v[..., gb.edge_upper], fn.edge_upper[psi_e]],
            "ev_psi_down": d["F_v_n"][psi_v[..., gb.edge_lower], fn.edge_lower[psi_e]],
            "thick_phi_v": d["G_v_2n"][phin_v[..., f.incl_v_base], g.incl_v_n[phi_v]],
            "thick_phi_e": d["G_e_2n"][phin_e[..., f.incl_e_base], g.incl_e_n[phi_e]],
            "thick_psi_v": d["F_v_2n"][psin_v[..., g.incl_v_base], f.incl_v_n[psi_v]],
            "thick_psi_e": d["F_e_2n"][psin_e[..., g.incl_e_base], f.incl_e_n[psi_e]],
            "tri_f_v": np.ceil(d["F_v_2n"][self.f_ii_v, comp(psin_v, phi_v)] / 2),
            "tri_f_e": np.ceil(d["F_e_2n"][self.f_ii_e, comp(psin_e, phi_e)] / 2),
            "tri_g_v": np.ceil(d["G_v_2n"][self.g_ii_v, comp(phin_v, psi_v)] / 2),
            "tri_g_e": np.ceil(d["G_e_2n"][self.g_ii_e, comp(phin_e, psi_e)] / 2),
        }

    def batch_aggregate(self, maps: Dict[str, np.ndarray]) -> np.ndarray:
        """Aggregate loss of each row of a batch of assignments."""
        batch = len(next(iter(maps.values())))
        best = np.zeros(batch)
        for v in self.columns(maps).values():
            if v.shape[-1]:
                best = np.maximum(best, v.max(axis=-1))
        return best

    def aggregate(self, a: Assignment) -> float:
        best = 0.0
        for v in self.columns(a).values():
            if len(v):
                best = max(best, float(v.max()))
        return UNBOUNDED if math.isinf(best) else int(best)

    def report(self, a: Assignment) -> LossReport:
        per, wit = {}, {}
        for t, v in self.columns(a).items():
            if len(v) and v.max() > 0:
                j = int(np.argmax(v))
                per[t] = UNBOUNDED if math.isinf(v[j]) else int(v[j])
                wit[t] = (self._row(t, a, j), j)
            else:
                per[t], wit[t] = 0, None
        return LossReport(self.bundle.n, per, wit)

    def _row(self, term: str, a: Assignment, j: int) -> int:
        """Row of the maximum in column ``j``: the target of the second path."""
        f, g = self.f, self.g
        fb, gb, fn, gn = f.base, g.base, f.smooth_n, g.smooth_n
        rows = {
            "ev_phi_up": lambda: gn.edge_upper[a["phi_e"][j]],
            "ev_phi_down": lambda: gn.edge_lower[a["phi_e"][j]],
            "ev_psi_up": lambda: fn.edge_upper[a["psi_e"][j]],
            "ev_psi_down": lambda: fn.edge_lower[a["psi_e"][j]],
            "thick_phi_v": lambda: g.incl_v_n[a["phi_v"][j]],
            "thick_phi_e": lambda: g.incl_e_n[a["phi_e"][j]],
            "thick_psi_v": lambda: f.incl_v_n[a["psi_v"][j]],
            "thick_psi_e": lambda: f.incl_e_n[a["psi_e"][j]],
            "tri_f_v": lambda: a["psin_v"][a["phi_v"][j]],
            "tri_f_e": lambda: a["psin_e"][a["phi_e"][j]],
            "tri_g_v": lambda: a["phin_v"][a["psi_v"][j]],
            "tri_g_e": lambda: a["phin_e"][a["psi_e"][j]],
        }
        return int(rows[term]())


# -- extension by inclusion -------------------------------------------------

def _lift_vertex(src: Smoothing, dst: Smoothing, u: int) -> int:
    """Send vertex ``u`` of ``src.graph`` to the ``dst.graph`` vertex containing it."""
    level = int(src.graph.vertex_level[u])
    return dst.vertex_containing(level, int(src.vertex_members[u][0]))


def _lift_edge(src: Smoothing, dst: Smoothing, u: int) -> int:
    level = int(src.graph.edge_level[u])
    verts = src.edge_members[u]
    if len(verts):
        return dst.edge_containing(level, int(verts[0]))
    e = int(src.edge_member_edges[u][0])
    if dst.n == 0:
        return int(dst.edge_map[e])
    return dst.edge_containing(level, int(src.source.edge_lower[e]))


def extend_assignment(bundle: MatrixBundle, a: Assignment, target: MatrixBundle) -> Assignment:
    """Push ``a`` (shift ``n``) forward to an assignment at shift ``n' = target.n >= n``.

    Maps out of the base graphs are post-composed with the inclusions into the
    coarser smoothings.  An element of ``F^{n'}`` at level ``l`` is sent through
    an ``F^n`` element it contains at a level within ``n' - n`` of ``l``, the
    stored map on that element, and the inclusion into ``G^{2n'}``.  When
    ``n'`` is ``n + L_B(a)`` the result has zero loss.
    """
    n, n2 = bundle.n, target.n
    if n2 < n:
        raise ValueError("can only extend to a larger shift")
    if n2 == n:
        return Assignment(n, {k: v.copy() for k, v in a.maps.items()})
    out = {}
    for side, other, pre in ((bundle.f, bundle.g, "phi"), (bundle.g, bundle.f, "psi")):
        tside = target.f if side is bundle.f else target.g
        tother = target.g if side is bundle.f else target.f
        src_n, src_2n = other.sys.to_n, other.sys.to_2n
        dst_n, dst_2n = tother.sys.to_n, tother.sys.to_2n
        # base -> other^n, then into other^{n'}
        out[f"{pre}_v"] = np.array([_lift_vertex(src_n, dst_n, int(x)) for x in a[f"{pre}_v"]], dtype=np.int64)
        out[f"{pre}_e"] = np.array([_lift_edge(src_n, dst_n, int(x)) for x in a[f"{pre}_e"]], dtype=np.int64)
        base, own_n, tn = side.sys.base, side.sys.to_n, tside.sys.to_n
        vv = []
        for u in range(tn.graph.n_vertices):
            level = int(tn.graph.vertex_level[u])
            x = int(tn.vertex_members[u][0])
            lx = int(base.vertex_level[x])
            near = min(max(level, lx - n), lx + n)
            img = int(a[f"{pre}n_v"][own_n.vertex_containing(near, x)])
            vv.append(_lift_vertex_at(src_2n, dst_2n, img, level))
        ee = []
        for u in range(tn.graph.n_edges):
            level = int(tn.graph.edge_level[u])
            verts, edges = tn.edge_members[u], tn.edge_member_edges[u]
            if n >= 1:
                x = int(verts[0])
                lx = int(base.vertex_level[x])
                near = min(max(level, lx - n), lx + n - 1)
                img = int(a[f"{pre}n_e"][own_n.edge_containing(near, x)])
                ee.append(_edge_through_edge(src_2n, dst_2n, img, level))
            elif len(edges):
                img = int(a[f"{pre}n_e"][own_n.edge_map[int(edges[0])]])
                e = int(src_2n.edge_member_edges[img][0])
                ee.append(dst_2n.edge_containing(level, int(src_2n.source.edge_lower[e])))
            else:
                img = int(a[f"{pre}n_v"][own_n.vertex_map[int(verts[0])]])
                ee.append(_edge_at(src_2n, dst_2n, img, level))
        out[f"{pre}n_v"] = np.array(vv, dtype=np.int64)
        out[f"{pre}n_e"] = np.array(ee, dtype=np.int64)
    return Assignment(n2, out)


def _lift_vertex_at(src: Smoothing, dst: Smoothing, u: int, level: int) -> int:
    """Vertex of ``dst.graph`` at ``level`` containing a representative of ``u``."""
    return dst.vertex_containing(level, int(src.vertex_members[u][0]))


def _edge_at(src: Smoothing, dst: Smoothing, u: int, level: int) -> int:
    """Edge of ``dst.graph`` at ``level`` containing a representative of vertex ``u``."""
    return dst.edge_containing(level, int(src.vertex_members[u][0]))


def _edge_through_edge(src: Smoothing, dst: Smoothing, u: int, level: int) -> int:
    """Edge of ``dst.graph`` at ``level`` containing a vertex of edge ``u`` of ``src.graph``."""
    return dst.edge_containing(level, int(src.edge_members[u][0]))
