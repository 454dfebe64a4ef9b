"""Synthetic mapper graphs with known interleaving distances."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..graph import MapperGraph
from ..grid import Grid


class SpecError(ValueError):
    pass


def _grid_for(lo: int, hi: int, half_range: Optional[int]) -> Grid:
    need = max(abs(lo), abs(hi), 1)
    if half_range is None:
        half_range = need
    if half_range < need:
        raise SpecError(f"levels [{lo}, {hi}] do not fit half range {half_range}")
    return Grid(half_range)


class _Builder:
    def __init__(self):
        self.vertices: List[Tuple[str, int]] = []
        self.edges: List[Tuple[str, str, str]] = []

    def vertex(self, vid: str, level: int) -> str:
        self.vertices.append((vid, level))
        return vid

    def edge(self, a: str, b: str, eid: Optional[str] = None) -> None:
        self.edges.append((eid or f"{a}-{b}", a, b))

    def chain(self, prefix: str, lo: int, hi: int, below: Optional[str] = None,
              above: Optional[str] = None) -> List[str]:
        """Vertices ``prefix<level>`` for ``lo..hi`` joined in a path."""
        ids = [self.vertex(f"{prefix}{l}", l) for l in range(lo, hi + 1)]
        path = ([below] if below else []) + ids + ([above] if above else [])
        for a, b in zip(path, path[1:]):
            self.edge(a, b)
        return ids

    def build(self, grid: Grid) -> MapperGraph:
        return MapperGraph(grid, self.vertices, self.edges)


def line_mapper(lo: int, hi: int, half_range: Optional[int] = None) -> MapperGraph:
    """Path with one vertex per level in ``[lo, hi]``."""
    if lo >= hi:
        raise SpecError("line needs lo < hi")
    b = _Builder()
    b.chain("t", lo, hi)
    return b.build(_grid_for(lo, hi, half_range))


@dataclass(frozen=True)
class TorusSpec:
    h: int
    lo: int = 0
    hi: int = 20

    def __post_init__(self):
        if self.h < 1:
            raise SpecError("loop height must be positive")
        if self.h > self.hi - self.lo:
            raise SpecError(f"loop of height {self.h} does not fit in [{self.lo}, {self.hi}]")

    @property
    def loop_bottom(self) -> int:
        return self.lo + (self.hi - self.lo - self.h) // 2


def torus_mapper(spec: TorusSpec, half_range: Optional[int] = None) -> MapperGraph:
    """Path, then a loop of height ``h`` made of two parallel chains, then a path."""
    s, t = spec.loop_bottom, spec.loop_bottom + spec.h
    b = _Builder()
    low = b.chain("t", spec.lo, s)
    high = b.chain("t", t, spec.hi)
    if spec.h == 1:
        b.edge(low[-1], high[0], f"a{s}")
        b.edge(low[-1], high[0], f"b{s}")
    else:
        b.chain("a", s + 1, t - 1, below=low[-1], above=high[0])
        b.chain("b", s + 1, t - 1, below=low[-1], above=high[0])
    return b.build(_grid_for(spec.lo, spec.hi, half_range))


def counterexample_pair(half_range: int = 10) -> Tuple[MapperGraph, MapperGraph]:
    """Two merge trees where shift 1 gives loss 2 but shift 2 interleaves.

    ``F`` has two branches meeting at level 5: the left one starts at level
    -4 and passes through ``x`` at level 0, the right one starts at ``z`` on
    level 0.  ``G`` is the same tree with the right branch starting at level
    2, so ``G`` has the single vertex ``y`` at level 0.  In the 2-smoothing
    of ``F`` the classes of ``x`` and ``z`` are at distance 3.
    """
    f = _Builder()
    top = f.chain("t", 5, 8)
    f.chain("a", -4, 4, above=top[0])
    f.chain("b", 0, 4, above=top[0])
    g = _Builder()
    top = g.chain("t", 5, 8)
    g.chain("a", -4, 4, above=top[0])
    g.chain("b", 2, 4, above=top[0])
    grid = Grid(half_range)
    return _rename(f.build(grid), {"a0": "x", "b0": "z"}), _rename(g.build(grid), {"a0": "y"})


def _rename(g: MapperGraph, names: dict) -> MapperGraph:
    vs = [(names.get(v, v), l) for v, l in g.vertex_list()]
    es = [(e, names.get(a, a), names.get(b, b)) for e, a, b in g.edge_list()]
    return MapperGraph(g.grid, vs, es)


def random_mapper_graph(rng: np.random.Generator, n_vertices: int, half_range: int = 3,
                        p_edge: float = 0.5, connected: bool = False, max_tries: int = 1000) -> MapperGraph:
    """Random graph with ``n_vertices`` vertices on ``[-L, L]``.

    Each pair of vertices on adjacent levels is joined with probability
    ``p_edge``; with ``connected=True`` samples are redrawn until connected.
    """
    grid = Grid(half_range)
    for _ in range(max_tries):
        levels = np.sort(rng.integers(-half_range, half_range + 1, size=n_vertices))
        vs = [(f"v{k}", int(l)) for k, l in enumerate(levels)]
        es = []
        for a in range(n_vertices):
            for b in range(n_vertices):
                if levels[b] == levels[a] + 1 and rng.random() < p_edge:
                    es.append((f"e{len(es)}", f"v{a}", f"v{b}"))
        g = MapperGraph(grid, vs, es)
        if not connected or g.n_components() == 1:
            return g
    raise SpecError("could not draw a connected graph; raise p_edge or lower n_vertices")


# -- point clouds -------------------------------------------------------------

# strokes in the unit box, as polylines
LETTER_STROKES = {
    "A": [[(0, 0), (0.5, 1), (1, 0)], [(0.25, 0.5), (0.75, 0.5)]],
    "B": [[(0, 0), (0, 1)],
          [(0, 1), (0.6, 1), (0.75, 0.875), (0.75, 0.625), (0.6, 0.5), (0, 0.5)],
          [(0, 0.5), (0.7, 0.5), (0.85, 0.375), (0.85, 0.125), (0.7, 0), (0, 0)]],
    "D": [[(0, 0), (0, 1), (0.5, 1), (0.9, 0.75), (0.9, 0.25), (0.5, 0), (0, 0)]],
    "I": [[(0.5, 0), (0.5, 1)], [(0.3, 0), (0.7, 0)], [(0.3, 1), (0.7, 1)]],
    "R": [[(0, 0), (0, 1), (0.6, 1), (0.75, 0.875), (0.75, 0.625), (0.6, 0.5), (0, 0.5)],
          [(0.3, 0.5), (0.8, 0)]],
    "W": [[(0, 1), (0.25, 0), (0.5, 0.7), (0.75, 0), (1, 1)]],
}
LETTERS = tuple(LETTER_STROKES)


def _sample_polylines(polylines, n_points: int, width: float, rng: np.random.Generator) -> np.ndarray:
    segs = [(np.asarray(a, float), np.asarray(b, float))
            for line in polylines for a, b in zip(line, line[1:])]
    lengths = np.array([np.linalg.norm(b - a) for a, b in segs])
    which = rng.choice(len(segs), size=n_points, p=lengths / lengths.sum())
    t = rng.random(n_points)
    starts = np.array([segs[k][0] for k in which])
    ends = np.array([segs[k][1] for k in which])
    pts = starts + t[:, None] * (ends - starts)
    d = ends - starts
    normal = np.stack([-d[:, 1], d[:, 0]], axis=1) / np.linalg.norm(d, axis=1)[:, None]
    return pts + normal * rng.uniform(-width, width, size=(n_points, 1))


def letter_cloud(letter: str, n_points: int = 500, noise: float = 0.0,
                 rng: Optional[np.random.Generator] = None, width: float = 0.02):
    """Points sampled along the strokes of a capital letter, plus Gaussian noise."""
    from .mapper import PointCloud2D

    if letter not in LETTER_STROKES:
        raise SpecError(f"no strokes for letter {letter!r}; known: {''.join(LETTERS)}")
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = _sample_polylines(LETTER_STROKES[letter], n_points, width, rng)
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, size=pts.shape)
    return PointCloud2D(pts, letter)


def letter_dataset(letters: str = "".join(LETTERS), sizes=(500, 700, 1000), noises=(0.0, 0.01, 0.02),
                   seed: int = 0):
    """One cloud per (letter, size, noise); names like ``A_500_0.01``."""
    out = []
    for li, letter in enumerate(letters):
        for si, n in enumerate(sizes):
            for ni, s in enumerate(noises):
                rng = np.random.default_rng([seed, li, si, ni])
                out.append((f"{letter}_{n}_{s}", letter_cloud(letter, n, s, rng)))
    return out


def annulus_cloud(n_points: int = 800, inner: float = 0.8, outer: float = 1.0,
                  rng: Optional[np.random.Generator] = None):
    """Uniform samples of a ring."""
    from .mapper import PointCloud2D

    rng = rng if rng is not None else np.random.default_rng(0)
    theta = rng.uniform(0, 2 * np.pi, n_points)
    r = np.sqrt(rng.uniform(inner ** 2, outer ** 2, n_points))
    return PointCloud2D(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1), "annulus")
