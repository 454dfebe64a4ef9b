import math

import numpy as np
import pytest

from interleave.blockmat import build_bundle
from interleave.graph import validate
from interleave.ingest.generators import (LETTERS, SpecError, TorusSpec, annulus_cloud, counterexample_pair,
                                          letter_cloud, letter_dataset, line_mapper, random_mapper_graph,
                                          torus_mapper)
from interleave.ingest.mapper import (AllBackground, CoverError, CoverSpec, DegenerateRange, PointCloud2D,
                                      build_mapper, image_to_cloud, largest_component, mapper_details,
                                      read_bitmap, read_point_csv, write_point_csv)
from interleave.ingest.oracle import (TooLarge, brute_force_interleaving, count_assignments,
                                      exhaustive_minimum, oracle_distance)


# -- generators ----------------------------------------------------------------

def test_line():
    g = line_mapper(0, 20)
    assert g.n_vertices == 21 and g.n_edges == 20 and g.grid.half_range == 20
    assert validate(g).valid
    with pytest.raises(SpecError):
        line_mapper(3, 3)
    with pytest.raises(SpecError):
        line_mapper(0, 5, half_range=2)


@pytest.mark.parametrize("h", [1, 2, 3, 11, 20])
def test_torus_shape(h):
    g = torus_mapper(TorusSpec(h))
    assert validate(g).valid and g.n_components() == 1
    assert g.cycle_rank() == 1
    assert g.vertex_level.min() == 0 and g.vertex_level.max() == 20
    loop = [lvl for lvl in range(21) if len(g.vertices_at(lvl)) == 2]
    assert len(loop) == h - 1


def test_torus_spec_validation():
    with pytest.raises(SpecError):
        TorusSpec(0)
    with pytest.raises(SpecError):
        TorusSpec(21)
    assert TorusSpec(11).loop_bottom == 4


def test_counterexample_pair_shape():
    f, g = counterexample_pair()
    assert "x" in f.vertex_ids and "z" in f.vertex_ids and "y" in g.vertex_ids
    assert f.cycle_rank() == g.cycle_rank() == 0
    assert len(f.vertices_at(0)) == 2 and len(g.vertices_at(0)) == 1


def test_random_graphs_are_valid(rng):
    for _ in range(50):
        g = random_mapper_graph(rng, int(rng.integers(1, 10)), 3, 0.5)
        assert validate(g).valid
    g = random_mapper_graph(rng, 6, 3, 0.9, connected=True)
    assert g.n_components() == 1


def test_letters_are_deterministic():
    a = letter_dataset("AB", sizes=(200,), noises=(0.01,), seed=4)
    b = letter_dataset("AB", sizes=(200,), noises=(0.01,), seed=4)
    assert [n for n, _ in a] == ["A_200_0.01", "B_200_0.01"]
    assert all(np.array_equal(x.points, y.points) for (_, x), (_, y) in zip(a, b))
    assert len(letter_dataset()) == len(LETTERS) * 9


@pytest.mark.parametrize("letter, loops", [("A", 1), ("B", 2), ("D", 1), ("I", 0), ("R", 1), ("W", 0)])
def test_letter_mapper_topology(letter, loops):
    cloud = letter_cloud(letter, 1000, 0.0, np.random.default_rng(0))
    g = build_mapper(cloud, CoverSpec(10, 0.3, 0.06, 20))
    assert validate(g).valid and g.n_components() == 1
    assert g.cycle_rank() == loops


def test_annulus_has_one_loop():
    g = build_mapper(annulus_cloud(), CoverSpec(10, 0.3, 0.1, 20))
    assert g.cycle_rank() == 1


# -- mapper ----------------------------------------------------------------------

def test_cover_intervals_overlap():
    spec = CoverSpec(4, 0.25, 1.0, 6)
    iv = spec.intervals(0.0, 13.0)
    assert iv[0, 0] == 0 and iv[-1, 1] == 13
    length = iv[0, 1] - iv[0, 0]
    assert math.isclose(iv[0, 1] - iv[1, 0], 0.25 * length)
    assert [spec.level_of(k) for k in range(4)] == [0, 2, 4, 6]
    assert CoverSpec(3, 0.3, 1.0, 5).level_of(1) == 3  # 2.5 rounds up


@pytest.mark.parametrize("kwargs", [dict(num_intervals=0), dict(overlap=0), dict(overlap=1),
                                    dict(epsilon=0), dict(level_range=0),
                                    dict(num_intervals=30, level_range=10)])
def test_cover_validation(kwargs):
    with pytest.raises(CoverError):
        CoverSpec(**kwargs)


def test_mapper_of_two_blobs_keeps_largest():
    rng = np.random.default_rng(0)
    big = np.c_[rng.uniform(0, 1, 300), np.linspace(0, 10, 300)]
    small = np.c_[rng.uniform(50, 50.2, 30), np.linspace(0, 2, 30)]
    b = mapper_details(PointCloud2D(np.vstack([big, small])), CoverSpec(5, 0.3, 0.5, 8))
    assert b.components == 2 and b.kept_largest
    assert b.graph.n_components() == 1
    assert b.graph.vertex_level.max() == 8


def test_mapper_subdivides_long_edges():
    pts = np.c_[np.zeros(200), np.linspace(0, 1, 200)]
    g = build_mapper(PointCloud2D(pts), CoverSpec(3, 0.3, 0.1, 10))
    assert validate(g).valid
    assert g.n_vertices == 11 and g.n_edges == 10


def test_mapper_input_errors(tmp_path):
    with pytest.raises(DegenerateRange):
        build_mapper(PointCloud2D(np.c_[np.arange(5.0), np.zeros(5)]), CoverSpec())
    with pytest.raises(ValueError):
        PointCloud2D(np.zeros((0, 2)))
    with pytest.raises(AllBackground):
        image_to_cloud(np.zeros((4, 4)))


def test_bitmap_and_csv_inputs(tmp_path):
    from PIL import Image

    img = np.full((20, 10), 255, dtype=np.uint8)
    img[2:18, 4:6] = 0
    p = tmp_path / "bar.png"
    Image.fromarray(img).save(p)
    bits = read_bitmap(p)
    cloud = image_to_cloud(bits)
    assert len(cloud) == 32
    # image row 17 is the bottom of the bar: y = 20 - 1 - 17
    assert cloud.points[:, 1].min() == 2
    g = build_mapper(cloud, CoverSpec(4, 0.3, 1.5, 6))
    assert g.n_components() == 1 and g.cycle_rank() == 0
    q = tmp_path / "pts.csv"
    write_point_csv(cloud, q)
    again = read_point_csv(q)
    assert np.array_equal(again.points, cloud.points)
    q.write_text("x,y\n1,2\nfoo,bar\n")
    with pytest.raises(ValueError, match="line 3"):
        read_point_csv(q)


# -- oracle -------------------------------------------------------------------------

def test_oracle_on_tiny_pairs():
    f = line_mapper(0, 2, half_range=3)
    assert oracle_distance(f, f) == 0
    g = torus_mapper(TorusSpec(2, 0, 2), half_range=3)
    assert oracle_distance(f, g) == 1


def test_oracle_cap():
    f = line_mapper(0, 20)
    g = torus_mapper(TorusSpec(11))
    with pytest.raises(TooLarge):
        exhaustive_minimum(build_bundle(f, g, 1), cap=1000)


def test_brute_force_witness():
    f = line_mapper(0, 3, half_range=3)
    ok, a = brute_force_interleaving(f, f, 0)
    assert ok and a is not None
    b = build_bundle(line_mapper(0, 2, half_range=3), line_mapper(1, 3, half_range=3), 0)
    assert count_assignments(b) == 0
    assert exhaustive_minimum(b) == (math.inf, None)
