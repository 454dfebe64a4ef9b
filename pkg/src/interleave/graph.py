"""Mapper cosheaves stored as level-annotated graphs.

A vertex at level ``i`` is an element of ``F(S_sigma_i)``; an edge at level
``i`` is an element of ``F(S_tau_i)`` and joins a vertex at level ``i``
(its lower endpoint) to one at level ``i + 1``.  Graphs are kept in canonical
order: vertices sorted by level, edges sorted by level, both stable.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .grid import Grid

UNBOUNDED = math.inf


class GraphError(ValueError):
    """Malformed mapper graph (unknown ids, duplicates, invalid structure)."""


class SmoothingError(ValueError):
    pass


class MapperGraph:
    """Level-annotated multigraph.

    Parameters
    ----------
    grid : Grid
    vertices : sequence of ``(id, level)``
    edges : sequence of ``(id, lower_id, upper_id)``
    canonicalize : bool
        Stable-sort vertices and edges by level (default).  Pass ``False`` to
        keep the given order, e.g. to let :func:`validate` report it.
    """

    def __init__(self, grid: Grid, vertices: Sequence[Tuple[str, int]],
                 edges: Sequence[Tuple[str, str, str]] = (), canonicalize: bool = True):
        self.grid = grid
        vids = [str(v) for v, _ in vertices]
        levels = [int(l) for _, l in vertices]
        if len(set(vids)) != len(vids):
            raise GraphError("duplicate vertex id")
        eids = [str(e) for e, _, _ in edges]
        if len(set(eids)) != len(eids):
            raise GraphError("duplicate edge id")
        index = {v: k for k, v in enumerate(vids)}
        try:
            lower = [index[str(a)] for _, a, _ in edges]
            upper = [index[str(b)] for _, _, b in edges]
        except KeyError as exc:
            raise GraphError(f"edge references unknown vertex {exc.args[0]!r}") from None

        vlev = np.asarray(levels, dtype=np.int64)
        lower = np.asarray(lower, dtype=np.int64)
        upper = np.asarray(upper, dtype=np.int64)
        if canonicalize:
            vorder = np.argsort(vlev, kind="stable")
            inverse = np.empty_like(vorder)
            inverse[vorder] = np.arange(len(vorder))
            vids = [vids[k] for k in vorder]
            vlev = vlev[vorder]
            lower, upper = inverse[lower], inverse[upper]
            eorder = np.argsort(vlev[lower] if len(lower) else lower, kind="stable")
            eids = [eids[k] for k in eorder]
            lower, upper = lower[eorder], upper[eorder]

        self.vertex_ids: Tuple[str, ...] = tuple(vids)
        self.vertex_level = vlev
        self.edge_ids: Tuple[str, ...] = tuple(eids)
        self.edge_lower = lower
        self.edge_upper = upper
        self._vindex = {v: k for k, v in enumerate(self.vertex_ids)}
        self._eindex = {e: k for k, e in enumerate(self.edge_ids)}
        self._valid: Optional[bool] = None

    # -- basic accessors -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertex_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @property
    def edge_level(self) -> np.ndarray:
        return self.vertex_level[self.edge_lower] if self.n_edges else np.zeros(0, np.int64)

    def vertex_index(self, vid: str) -> int:
        return self._vindex[str(vid)]

    def edge_index(self, eid: str) -> int:
        return self._eindex[str(eid)]

    def vertex_slice(self, lo: int, hi: int) -> slice:
        """Index range of vertices with level in ``[lo, hi]`` (canonical order)."""
        a = int(np.searchsorted(self.vertex_level, lo, side="left"))
        b = int(np.searchsorted(self.vertex_level, hi, side="right"))
        return slice(a, b)

    def edge_slice(self, lo: int, hi: int) -> slice:
        lev = self.edge_level
        a = int(np.searchsorted(lev, lo, side="left"))
        b = int(np.searchsorted(lev, hi, side="right"))
        return slice(a, b)

    def vertices_at(self, level: int) -> np.ndarray:
        s = self.vertex_slice(level, level)
        return np.arange(s.start, s.stop)

    def edges_at(self, level: int) -> np.ndarray:
        s = self.edge_slice(level, level)
        return np.arange(s.start, s.stop)

    def vertex_partition(self) -> Tuple[Tuple[int, int], ...]:
        """``(level, size)`` for every vertex cell of the grid."""
        counts = {l: 0 for l in self.grid.vertex_levels}
        for l in self.vertex_level.tolist():
            counts[l] += 1
        return tuple(counts.items())

    def edge_partition(self) -> Tuple[Tuple[int, int], ...]:
        counts = {l: 0 for l in self.grid.edge_levels}
        for l in self.edge_level.tolist():
            counts[l] += 1
        return tuple(counts.items())

    def with_grid(self, grid: Grid) -> "MapperGraph":
        return MapperGraph(grid, self.vertex_list(), self.edge_list(), canonicalize=False)

    def vertex_list(self) -> List[Tuple[str, int]]:
        return list(zip(self.vertex_ids, self.vertex_level.tolist()))

    def edge_list(self) -> List[Tuple[str, str, str]]:
        return [(e, self.vertex_ids[a], self.vertex_ids[b])
                for e, a, b in zip(self.edge_ids, self.edge_lower.tolist(), self.edge_upper.tolist())]

    def n_components(self) -> int:
        if self.n_vertices == 0:
            return 0
        adj = coo_matrix((np.ones(self.n_edges), (self.edge_lower, self.edge_upper)),
                         shape=(self.n_vertices, self.n_vertices))
        return int(connected_components(adj, directed=False)[0])

    def cycle_rank(self) -> int:
        return self.n_edges - self.n_vertices + self.n_components()

    def require_valid(self) -> None:
        if self._valid is None:
            self._valid = not validate(self).violations
        if not self._valid:
            raise GraphError("; ".join(validate(self).violations))

    def __repr__(self):
        return f"MapperGraph(|V|={self.n_vertices}, |E|={self.n_edges}, L={self.grid.half_range})"

    def __eq__(self, other):
        if not isinstance(other, MapperGraph):
            return NotImplemented
        return (self.grid == other.grid and self.vertex_list() == other.vertex_list()
                and self.edge_list() == other.edge_list())

    __hash__ = None


@dataclass
class Diagnostics:
    violations: List[str] = field(default_factory=list)
    connected: bool = True
    n_components: int = 0

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"valid": self.valid, "connected": self.connected,
                "n_components": self.n_components, "violations": list(self.violations)}


def validate(g: MapperGraph) -> Diagnostics:
    """Check level ranges, adjacent-level edge spans, ordering, and connectivity."""
    out = Diagnostics()
    L = g.grid.half_range
    for vid, lev in zip(g.vertex_ids, g.vertex_level.tolist()):
        if not -L <= lev <= L:
            out.violations.append(f"vertex {vid} level {lev} outside [-{L}, {L}]")
    for k, eid in enumerate(g.edge_ids):
        a, b = int(g.edge_lower[k]), int(g.edge_upper[k])
        la, lb = int(g.vertex_level[a]), int(g.vertex_level[b])
        if a == b:
            out.violations.append(f"edge {eid} is a self-loop")
        elif lb != la + 1:
            out.violations.append(f"edge {eid} spans levels {la}->{lb}, expected {la}->{la + 1}")
    if np.any(np.diff(g.vertex_level) < 0):
        out.violations.append("vertices are not sorted by level")
    if g.n_edges and np.any(np.diff(g.edge_level) < 0):
        out.violations.append("edges are not sorted by level")
    out.n_components = g.n_components()
    out.connected = out.n_components <= 1
    return out


# -- JSON interchange ------------------------------------------------------

def graph_to_dict(g: MapperGraph) -> dict:
    return {
        "delta": g.grid.delta,
        "half_range": g.grid.half_range,
        "vertices": [{"id": v, "level": l} for v, l in g.vertex_list()],
        "edges": [{"id": e, "lower": a, "upper": b} for e, a, b in g.edge_list()],
    }


def graph_from_dict(d: dict, canonicalize: bool = True) -> MapperGraph:
    try:
        grid = Grid(int(d["half_range"]), float(d["delta"]))
        vertices = [(str(v["id"]), int(v["level"])) for v in d["vertices"]]
        edges = [(str(e["id"]), str(e["lower"]), str(e["upper"])) for e in d.get("edges", [])]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed mapper graph document: {exc}") from None
    return MapperGraph(grid, vertices, edges, canonicalize=canonicalize)


def read_graph(path: Union[str, Path], canonicalize: bool = True) -> MapperGraph:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GraphError(f"{path}: {exc}") from None
    return graph_from_dict(doc, canonicalize=canonicalize)


def write_graph(g: MapperGraph, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_dict(g), fh, indent=1)
        fh.write("\n")


def common_grid(f: MapperGraph, g: MapperGraph) -> Tuple[MapperGraph, MapperGraph]:
    """Put two graphs on one grid (the larger half-range); deltas must agree."""
    if not math.isclose(f.grid.delta, g.grid.delta):
        raise GraphError(f"grid resolutions differ: {f.grid.delta} vs {g.grid.delta}")
    if f.grid == g.grid:
        return f, g
    grid = Grid(max(f.grid.half_range, g.grid.half_range), f.grid.delta)
    return f.with_grid(grid), g.with_grid(grid)


# -- smoothing -------------------------------------------------------------

@dataclass(frozen=True)
class Smoothing:
    """Result of smoothing ``source`` by ``n``.

    ``vertex_map``/``edge_map`` send each source element to the component
    containing it at its own level; ``*_members`` list the source vertices
    (and, for edges, source edges) making up each output element.
    """

    source: MapperGraph
    n: int
    graph: MapperGraph
    vertex_map: np.ndarray
    edge_map: np.ndarray
    vertex_members: Tuple[np.ndarray, ...]
    edge_members: Tuple[np.ndarray, ...]
    edge_member_edges: Tuple[np.ndarray, ...]
    _vertex_lookup: Dict[int, Dict[int, int]] = field(repr=False)
    _edge_lookup: Dict[int, Dict[int, int]] = field(repr=False)

    def vertex_containing(self, level: int, source_vertex: int) -> int:
        """Output vertex at ``level`` whose component holds ``source_vertex``."""
        return self._vertex_lookup[level][source_vertex]

    def edge_containing(self, level: int, source_vertex: int) -> int:
        return self._edge_lookup[level][source_vertex]


def _window_components(g: MapperGraph, vwin, ewin):
    """Components of the window graph on vertices ``vwin`` and edges ``ewin``.

    Edges whose endpoints fall outside the vertex window stay as isolated
    pieces attached to whichever endpoint is present.
    """
    vs = g.vertex_slice(*vwin) if vwin else slice(0, 0)
    es = g.edge_slice(*ewin) if ewin else slice(0, 0)
    nv, ne = vs.stop - vs.start, es.stop - es.start
    if nv + ne == 0:
        return []
    # windows are small; a union-find beats building a sparse matrix per window
    ds = DisjointSet(range(nv + ne))
    elow = (g.edge_lower[es] - vs.start).tolist()
    eup = (g.edge_upper[es] - vs.start).tolist()
    for k in range(ne):
        for end in (elow[k], eup[k]):
            if 0 <= end < nv:
                ds.merge(nv + k, end)
    comps = []
    for members in ds.subsets():
        members = np.sort(np.fromiter(members, dtype=np.int64))
        verts = members[members < nv] + vs.start
        edges = members[members >= nv] - nv + es.start
        key = (0, int(verts[0])) if len(verts) else (1, int(edges[0]))
        comps.append((key, verts, edges))
    comps.sort(key=lambda t: t[0])
    return [(v, e) for _, v, e in comps]


def smooth(g: MapperGraph, n: int) -> Smoothing:
    """Build the ``n``-smoothing of ``g`` together with its inclusion maps.

    Vertices at level ``i`` are components of the subgraph induced by levels
    ``[i-n, i+n]``; edges at level ``i`` are components for levels
    ``[i-n+1, i+n]`` (edge elements at levels ``[i-n, i+n]`` are kept so that
    ``n = 0`` returns the original edges).  Windows are clamped to the grid.
    """
    if int(n) != n or n < 0:
        raise SmoothingError(f"smoothing parameter must be a nonnegative integer, got {n!r}")
    n = int(n)
    g.require_valid()
    grid = g.grid

    out_v: List[Tuple[str, int]] = []
    v_members: List[np.ndarray] = []
    vertex_map = np.full(g.n_vertices, -1, dtype=np.int64)
    vlookup: Dict[int, Dict[int, int]] = {}
    for i in grid.vertex_levels:
        vwin = grid.clamp_vertex_window(i - n, i + n)
        ewin = grid.clamp_edge_window(vwin[0], vwin[1] - 1) if vwin else None
        table = {}
        for verts, edges in _window_components(g, vwin, ewin):
            idx = len(out_v)
            out_v.append((f"[{g.vertex_ids[verts[0]]}]@{i}", i))
            v_members.append(verts)
            for v in verts.tolist():
                table[v] = idx
        vlookup[i] = table
        for v in g.vertices_at(i).tolist():
            vertex_map[v] = table[v]

    out_e: List[Tuple[str, str, str]] = []
    e_members: List[np.ndarray] = []
    e_member_edges: List[np.ndarray] = []
    edge_map = np.full(g.n_edges, -1, dtype=np.int64)
    elookup: Dict[int, Dict[int, int]] = {}
    for i in grid.edge_levels:
        vwin = grid.clamp_vertex_window(i - n + 1, i + n) if n >= 1 else None
        ewin = grid.clamp_edge_window(i - n, i + n)
        table = {}
        for verts, edges in _window_components(g, vwin, ewin):
            idx = len(out_e)
            if len(verts):
                rep = verts[0]
                lo, up = vlookup[i][rep], vlookup[i + 1][rep]
                eid = f"[{g.vertex_ids[rep]}]@{i}"
            else:
                e = int(edges[0])
                lo = vlookup[i][int(g.edge_lower[e])]
                up = vlookup[i + 1][int(g.edge_upper[e])]
                eid = f"[{g.edge_ids[e]}]@{i}"
            out_e.append((eid, out_v[lo][0], out_v[up][0]))
            e_members.append(verts)
            e_member_edges.append(edges)
            for v in verts.tolist():
                table[v] = idx
            for e in edges.tolist():
                if g.vertex_level[g.edge_lower[e]] == i:
                    edge_map[e] = idx
        elookup[i] = table

    out = MapperGraph(grid, out_v, out_e, canonicalize=False)
    return Smoothing(g, n, out, vertex_map, edge_map, tuple(v_members), tuple(e_members),
                     tuple(e_member_edges), vlookup, elookup)


@dataclass(frozen=True)
class SmoothSystem:
    """The graphs ``F``, ``F^n``, ``F^{2n}`` and inclusions ``F => F^n => F^{2n}``."""

    base: MapperGraph
    n: int
    to_n: Smoothing
    to_2n: Smoothing
    incl_v_n: np.ndarray
    incl_e_n: np.ndarray

    @property
    def smooth_n(self) -> MapperGraph:
        return self.to_n.graph

    @property
    def smooth_2n(self) -> MapperGraph:
        return self.to_2n.graph

    @property
    def incl_v_base(self) -> np.ndarray:
        return self.to_n.vertex_map

    @property
    def incl_e_base(self) -> np.ndarray:
        return self.to_n.edge_map


def smooth_system(g: MapperGraph, n: int) -> SmoothSystem:
    to_n = smooth(g, n)
    to_2n = smooth(g, 2 * n)
    gn = to_n.graph
    incl_v = np.array([to_2n.vertex_containing(int(gn.vertex_level[u]), int(to_n.vertex_members[u][0]))
                       for u in range(gn.n_vertices)], dtype=np.int64)
    incl_e = np.empty(gn.n_edges, dtype=np.int64)
    for u in range(gn.n_edges):
        level = int(gn.vertex_level[gn.edge_lower[u]])
        verts = to_n.edge_members[u]
        if len(verts):
            incl_e[u] = to_2n.edge_containing(level, int(verts[0]))
        else:
            incl_e[u] = to_2n.edge_map[int(to_n.edge_member_edges[u][0])]
    return SmoothSystem(g, n, to_n, to_2n, incl_v, incl_e)


# -- distances -------------------------------------------------------------

@dataclass(frozen=True)
class DistanceTables:
    """Per-level distance blocks; ``inf`` marks pairs that never merge."""

    vertex: Dict[int, np.ndarray]
    edge: Dict[int, np.ndarray]


def _sweep(size: int, endpoints_of, add_levels, saturated) -> np.ndarray:
    """Shared incremental union-find sweep for one level block."""
    d = np.full((size, size), UNBOUNDED)
    np.fill_diagonal(d, 0.0)
    if size < 2:
        return d
    ds = DisjointSet()
    pending = {(a, b) for a in range(size) for b in range(a + 1, size)}
    reps = endpoints_of
    k = 0
    while pending:
        k += 1
        for a, b in add_levels(k):
            ds.add(a)
            ds.add(b)
            ds.merge(a, b)
        done = []
        for a, b in pending:
            ra, rb = reps[a], reps[b]
            if ra in ds and rb in ds and ds.connected(ra, rb):
                d[a, b] = d[b, a] = k
                done.append((a, b))
        pending.difference_update(done)
        if saturated(k):
            break
    return d


def distance_tables(g: MapperGraph) -> DistanceTables:
    """Ultrametric distances within each level block.

    Vertex block at level ``i``: least ``k`` with the two vertices joined in
    the subgraph on levels ``[i-k, i+k]``.  Edge block at level ``i``: least
    ``k`` with the two edges joined on levels ``[i-k+1, i+k]``.  Built by
    adding edge levels outward from ``i`` into a union-find structure.
    """
    g.require_valid()
    L = g.grid.half_range
    elev = g.edge_level

    def edges_between(lo, hi):
        if lo > hi:
            return []
        s = g.edge_slice(lo, hi)
        return list(zip(g.edge_lower[s].tolist(), g.edge_upper[s].tolist()))

    vertex = {}
    for i in g.grid.vertex_levels:
        verts = g.vertices_at(i).tolist()
        if not verts:
            continue

        def add(k, i=i):
            pairs = []
            for lev in {i - k, i + k - 1}:
                if -L <= lev <= L - 1:
                    pairs += edges_between(lev, lev)
            return pairs

        vertex[i] = _sweep(len(verts), verts, add, lambda k, i=i: i - k <= -L and i + k >= L)

    edge = {}
    for i in g.grid.edge_levels:
        es = g.edges_at(i).tolist()
        if not es:
            continue
        reps = [int(g.edge_lower[e]) for e in es]

        def add(k, i=i):
            pairs = []
            for lev in {i - k + 1, i + k - 1}:
                if -L <= lev <= L - 1:
                    pairs += edges_between(lev, lev)
            return pairs

        edge[i] = _sweep(len(es), reps, add, lambda k, i=i: i - k + 1 <= -L and i + k >= L)
    del elev
    return DistanceTables(vertex, edge)
