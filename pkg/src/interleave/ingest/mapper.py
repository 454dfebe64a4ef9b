"""Point clouds and bitmaps to mapper graphs (height filter, interval cover)."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..graph import MapperGraph
from ..grid import Grid

log = logging.getLogger(__name__)


class DegenerateRange(ValueError):
    pass


class AllBackground(ValueError):
    pass


class CoverError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud2D:
    points: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("point cloud is empty")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class CoverSpec:
    num_intervals: int = 10
    overlap: float = 0.3
    epsilon: float = 3.0
    level_range: int = 20

    def __post_init__(self):
        if self.num_intervals < 1:
            raise CoverError("need at least one interval")
        if not 0 < self.overlap < 1:
            raise CoverError("overlap must lie strictly between 0 and 1")
        if not self.epsilon > 0:
            raise CoverError("clustering epsilon must be positive")
        if self.level_range < 1:
            raise CoverError("level range must be positive")
        if self.num_intervals > self.level_range + 1:
            raise CoverError("more intervals than levels; raise level_range")

    def intervals(self, lo: float, hi: float) -> np.ndarray:
        """``(num_intervals, 2)`` array of closed intervals covering ``[lo, hi]``."""
        n, p = self.num_intervals, self.overlap
        length = (hi - lo) / (n - (n - 1) * p)
        step = length * (1 - p)
        starts = lo + step * np.arange(n)
        out = np.stack([starts, starts + length], axis=1)
        out[-1, 1] = hi
        return out

    def level_of(self, k: int) -> int:
        """Round-half-up rescale of interval index ``k`` to ``[0, level_range]``."""
        if self.num_intervals == 1:
            return 0
        return int(math.floor(k * self.level_range / (self.num_intervals - 1) + 0.5))


@dataclass
class MapperBuild:
    graph: MapperGraph
    clusters_per_interval: List[int]
    components: int
    kept_largest: bool


def _clusters(points: np.ndarray, eps: float) -> np.ndarray:
    """Single-linkage clusters at threshold ``eps`` (labels per point)."""
    if len(points) == 1:
        return np.zeros(1, dtype=np.int64)
    pairs = cKDTree(points).query_pairs(eps, output_type="ndarray")
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(points),) * 2)
    return connected_components(adj, directed=False)[1]


def mapper_details(cloud: PointCloud2D, spec: CoverSpec) -> MapperBuild:
    """Mapper graph of ``cloud`` under the height filter, with build diagnostics.

    Clusters of interval ``k`` become vertices at level ``level_of(k)``;
    clusters of adjacent intervals sharing a point are joined.  An edge that
    spans several levels after rescaling is subdivided by one vertex per
    intermediate level.  Only the largest connected component is kept.
    """
    pts = cloud.points
    y = pts[:, 1]
    lo, hi = float(y.min()), float(y.max())
    if not hi > lo:
        raise DegenerateRange("all points have the same height")
    ivs = spec.intervals(lo, hi)
    members: List[List[np.ndarray]] = []   # per interval, per cluster: point indices
    for a, b in ivs:
        idx = np.flatnonzero((y >= a) & (y <= b))
        if not len(idx):
            members.append([])
            continue
        labels = _clusters(pts[idx], spec.epsilon)
        members.append([idx[labels == c] for c in range(labels.max() + 1)])

    vertices: List[Tuple[str, int]] = []
    edges: List[Tuple[str, str, str]] = []
    vid: Dict[Tuple[int, int], str] = {}
    for k, clusters in enumerate(members):
        for c in range(len(clusters)):
            vid[(k, c)] = f"c{k}_{c}"
            vertices.append((vid[(k, c)], spec.level_of(k)))
    for k in range(len(members) - 1):
        for c, pa in enumerate(members[k]):
            for d, pb in enumerate(members[k + 1]):
                if np.intersect1d(pa, pb, assume_unique=True).size == 0:
                    continue
                a, b = vid[(k, c)], vid[(k + 1, d)]
                la, lb = spec.level_of(k), spec.level_of(k + 1)
                chain = [a] + [f"{a}~{b}@{l}" for l in range(la + 1, lb)] + [b]
                for l, s in zip(range(la + 1, lb), chain[1:-1]):
                    vertices.append((s, l))
                for s, t in zip(chain, chain[1:]):
                    edges.append((f"{s}|{t}", s, t))

    grid = Grid(spec.level_range)
    g = MapperGraph(grid, vertices, edges)
    ncomp = g.n_components()
    kept = False
    if ncomp > 1:
        g = largest_component(g)
        kept = True
        log.warning("mapper graph has %d components; keeping the largest", ncomp)
    return MapperBuild(g, [len(c) for c in members], ncomp, kept)


def build_mapper(cloud: PointCloud2D, spec: CoverSpec) -> MapperGraph:
    return mapper_details(cloud, spec).graph


def largest_component(g: MapperGraph) -> MapperGraph:
    """Component with the most vertices (ties: the one holding the lowest index)."""
    adj = coo_matrix((np.ones(g.n_edges), (g.edge_lower, g.edge_upper)), shape=(g.n_vertices,) * 2)
    _, labels = connected_components(adj, directed=False)
    counts = np.bincount(labels)
    keep = int(np.argmax(counts))
    vs = [v for v, lab in zip(g.vertex_list(), labels) if lab == keep]
    es = [e for e, a in zip(g.edge_list(), g.edge_lower.tolist()) if labels[a] == keep]
    return MapperGraph(g.grid, vs, es)


# -- inputs -----------------------------------------------------------------

def image_to_cloud(bitmap: np.ndarray, label: Optional[str] = None) -> PointCloud2D:
    """One point per foreground (nonzero) pixel at ``(column, height)``.

    Heights increase upward: the bottom row has ``y = 0``.
    """
    img = np.asarray(bitmap).astype(bool)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("bitmap must be a nonempty 2-D array")
    rows, cols = np.nonzero(img)
    if not len(rows):
        raise AllBackground("bitmap has no foreground pixels")
    return PointCloud2D(np.stack([cols, img.shape[0] - 1 - rows], axis=1).astype(float), label)


def read_bitmap(path: Union[str, Path], threshold: int = 128) -> np.ndarray:
    """PBM/PGM (or any Pillow-readable image); dark pixels are foreground."""
    from PIL import Image

    with Image.open(path) as im:
        gray = np.asarray(im.convert("L"))
    return gray < threshold


def read_point_csv(path: Union[str, Path], label: Optional[str] = None) -> PointCloud2D:
    """``x,y`` per line; a non-numeric first line is taken as a header."""
    pts = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            try:
                pts.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if k == 0:
                    continue
                raise ValueError(f"{path}: bad point on line {k + 1}: {row!r}") from None
    return PointCloud2D(np.asarray(pts), label)


def write_point_csv(cloud: PointCloud2D, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for x, y in cloud.points:
            w.writerow([repr(float(x)), repr(float(y))])
