import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interleave.graph import (GraphError, MapperGraph, common_grid, distance_tables, graph_from_dict,
                              graph_to_dict, read_graph, smooth, smooth_system, validate, write_graph)
from interleave.grid import Grid
from interleave.ingest.generators import random_mapper_graph


def _components(g, vkeep, ekeep):
    """Union-find labels of the subgraph on the given vertex/edge masks (oracle)."""
    parent = list(range(g.n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k in np.flatnonzero(ekeep):
        a, b = int(g.edge_lower[k]), int(g.edge_upper[k])
        if vkeep[a] and vkeep[b]:
            parent[find(a)] = find(b)
    return find


def brute_vertex_distance(g, a, b):
    i = int(g.vertex_level[a])
    for k in range(0, 4 * g.grid.half_range + 2):
        vkeep = (g.vertex_level >= i - k) & (g.vertex_level <= i + k)
        ekeep = (g.edge_level >= i - k) & (g.edge_level <= i + k - 1)
        find = _components(g, vkeep, ekeep)
        if find(a) == find(b):
            return k
    return math.inf


def brute_edge_distance(g, e, f):
    i = int(g.edge_level[e])
    for k in range(1, 4 * g.grid.half_range + 2):
        vkeep = (g.vertex_level >= i - k + 1) & (g.vertex_level <= i + k)
        ekeep = (g.edge_level >= i - k + 1) & (g.edge_level <= i + k - 1)
        find = _components(g, vkeep, ekeep)
        if find(int(g.edge_lower[e])) == find(int(g.edge_lower[f])):
            return k
    return math.inf


def test_canonical_order_and_slices(loop):
    assert list(loop.vertex_level) == sorted(loop.vertex_level)
    assert list(loop.vertex_ids[loop.vertex_slice(9, 9)]) == ["15", "22"]
    assert loop.vertices_at(9).tolist() == [5, 6]
    assert loop.edges_at(9).tolist() == [6, 7]
    assert loop.n_components() == 1 and loop.cycle_rank() == 1
    vp = dict(loop.vertex_partition())
    assert vp[9] == 2 and vp[0] == 0 and sum(vp.values()) == 12
    assert len(loop.vertex_partition()) == 29 and len(loop.edge_partition()) == 28


def test_unsorted_input_is_canonicalized():
    g = MapperGraph(Grid(2), [("b", 1), ("a", 0)], [("e", "a", "b")])
    assert g.vertex_ids == ("a", "b")
    raw = MapperGraph(Grid(2), [("b", 1), ("a", 0)], [("e", "a", "b")], canonicalize=False)
    assert "vertices are not sorted by level" in validate(raw).violations


@pytest.mark.parametrize("vertices, edges, message", [
    ([("a", 0), ("a", 1)], [], "duplicate vertex"),
    ([("a", 0), ("b", 1)], [("e", "a", "c")], "unknown vertex"),
    ([("a", 0), ("b", 1)], [("e", "a", "b"), ("e", "a", "b")], "duplicate edge"),
])
def test_malformed_graphs(vertices, edges, message):
    with pytest.raises(GraphError, match=message):
        MapperGraph(Grid(2), vertices, edges)


def test_validate_reports_violations():
    g = MapperGraph(Grid(2), [("a", 0), ("b", 2), ("c", 5), ("d", 0)], [("e", "a", "b"), ("s", "d", "d")])
    v = validate(g)
    assert not v.valid
    text = " ".join(v.violations)
    assert "spans levels 0->2" in text and "outside [-2, 2]" in text and "self-loop" in text
    assert not v.connected
    with pytest.raises(GraphError):
        g.require_valid()


def test_json_round_trip(tmp_path, loop):
    p = tmp_path / "g.json"
    write_graph(loop, p)
    assert read_graph(p) == loop
    assert graph_from_dict(json.loads(p.read_text())) == loop
    doc = graph_to_dict(loop)
    assert set(doc) == {"delta", "half_range", "vertices", "edges"}


def test_json_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(GraphError):
        read_graph(p)
    with pytest.raises(GraphError, match="malformed"):
        graph_from_dict({"vertices": []})


def test_common_grid():
    f = MapperGraph(Grid(2), [("a", 0)])
    g = MapperGraph(Grid(5), [("a", 0)])
    f2, g2 = common_grid(f, g)
    assert f2.grid == g2.grid == Grid(5)
    with pytest.raises(GraphError, match="resolutions"):
        common_grid(f, MapperGraph(Grid(2, 0.5), [("a", 0)]))


def test_loop_distances(loop):
    d = distance_tables(loop)
    assert d.vertex[9].tolist() == [[0, 3], [3, 0]]
    assert d.edge[9].tolist() == [[0, 3], [3, 0]]
    assert d.vertex[7].tolist() == [[0, 1], [1, 0]]
    assert d.edge[6].tolist() == [[0, 1], [1, 0]]


def test_disconnected_distance_is_unbounded():
    g = MapperGraph(Grid(2), [("a", 0), ("b", 0)])
    assert math.isinf(distance_tables(g).vertex[0][0, 1])


def test_smoothing_loop(loop):
    s = smooth(loop, 1)
    g = s.graph
    assert dict(g.vertex_partition())[9] == 2
    assert dict(g.vertex_partition())[5] == 1
    assert g.vertex_ids[:3] == ("[8]@5", "[8]@6", "[8]@7")
    # at level 9 the window [8, 10] joins 15 to a8
    assert g.vertex_ids[s.vertex_map[loop.vertex_index("15")]] == "[a8]@9"
    d = distance_tables(g)
    assert {k: v[0, 1] for k, v in d.vertex.items() if len(v) > 1} == {8: 1, 9: 2, 10: 1}
    assert {k: v[0, 1] for k, v in d.edge.items() if len(v) > 1} == {7: 1, 8: 2, 9: 2, 10: 1}
    # smoothing by 3 closes the loop at every level
    assert smooth(loop, 3).graph.cycle_rank() == 0


def test_smoothing_zero_is_identity(loop):
    s = smooth(loop, 0)
    g = s.graph
    assert g.vertex_partition() == loop.vertex_partition()
    assert g.edge_partition() == loop.edge_partition()
    assert s.vertex_map.tolist() == list(range(loop.n_vertices))
    assert s.edge_map.tolist() == list(range(loop.n_edges))


def test_smoothing_rejects_negative(loop):
    with pytest.raises(ValueError):
        smooth(loop, -1)


def _member_keys(sm, vsrc, esrc):
    g = sm.graph
    vk = [(int(g.vertex_level[w]), frozenset(vsrc(sm.vertex_members[w]))) for w in range(g.n_vertices)]
    ek = []
    for w in range(g.n_edges):
        verts = set(vsrc(sm.edge_members[w]))
        edges = set()
        for e in sm.edge_member_edges[w]:
            a, b = esrc(int(e))
            verts |= a
            edges |= b
        ek.append((int(g.edge_level[w]), frozenset(verts), frozenset(edges),
                   vk[g.edge_lower[w]], vk[g.edge_upper[w]]))
    return sorted(vk, key=repr), sorted(ek, key=repr)


def _ints(xs):
    return {int(x) for x in xs}


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), nv=st.integers(1, 8), a=st.integers(0, 2), b=st.integers(0, 2))
def test_smoothing_composition_isomorphism(seed, nv, a, b):
    """``(G^a)^b`` and ``G^(a+b)`` agree level by level once members are traced back to ``G``."""
    g = random_mapper_graph(np.random.default_rng(seed), nv, half_range=3, p_edge=0.6)
    sa = smooth(g, a)
    composed = smooth(sa.graph, b)
    direct = smooth(g, a + b)
    want = _member_keys(direct, _ints, lambda e: (set(), {e}))
    got = _member_keys(composed,
                       lambda us: set().union(*[_ints(sa.vertex_members[u]) for u in us]),
                       lambda e: (_ints(sa.edge_members[e]), _ints(sa.edge_member_edges[e])))
    assert got == want
    assert composed.graph.vertex_partition() == direct.graph.vertex_partition()
    assert composed.graph.edge_partition() == direct.graph.edge_partition()


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), nv=st.integers(2, 9), n=st.integers(0, 2))
def test_distance_tables_ultrametric_and_match_bruteforce(seed, nv, n):
    g = smooth(random_mapper_graph(np.random.default_rng(seed), nv, half_range=3, p_edge=0.5), n).graph
    d = distance_tables(g)
    for level, block in list(d.vertex.items()) + list(d.edge.items()):
        assert np.all(np.diag(block) == 0)
        assert np.array_equal(block, block.T)
        m = len(block)
        for x in range(m):
            for y in range(m):
                for z in range(m):
                    assert block[x, z] <= max(block[x, y], block[y, z])
    for level, block in d.vertex.items():
        idx = g.vertices_at(level)
        for x in range(len(idx)):
            for y in range(x + 1, len(idx)):
                assert block[x, y] == brute_vertex_distance(g, idx[x], idx[y])
    for level, block in d.edge.items():
        idx = g.edges_at(level)
        for x in range(len(idx)):
            for y in range(x + 1, len(idx)):
                assert block[x, y] == brute_edge_distance(g, idx[x], idx[y])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), nv=st.integers(1, 8), n=st.integers(0, 3))
def test_smooth_system_inclusions_respect_levels(seed, nv, n):
    g = random_mapper_graph(np.random.default_rng(seed), nv, half_range=3, p_edge=0.5)
    sys = smooth_system(g, n)
    gn, g2n = sys.smooth_n, sys.smooth_2n
    assert np.array_equal(g2n.vertex_level[sys.incl_v_n], gn.vertex_level)
    assert np.array_equal(g2n.edge_level[sys.incl_e_n], gn.edge_level)
    assert np.array_equal(gn.vertex_level[sys.incl_v_base], g.vertex_level)
    # inclusions commute with the boundary maps
    assert np.array_equal(sys.incl_v_n[gn.edge_lower], g2n.edge_lower[sys.incl_e_n])
    assert np.array_equal(sys.incl_v_n[gn.edge_upper], g2n.edge_upper[sys.incl_e_n])
    assert np.array_equal(sys.incl_v_base[g.edge_lower], gn.edge_lower[sys.incl_e_base])
