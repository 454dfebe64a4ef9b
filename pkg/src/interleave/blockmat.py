"""Level-partitioned matrices: boundary, inclusion, distance and assignment.

Matrices are dense float64 arrays carrying row/column level partitions.
Integer entries are stored exactly; ``inf`` marks an unbounded distance.
Products go through :func:`extended_matmul`, which uses ``inf * 0 = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from collections import OrderedDict
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .graph import MapperGraph, SmoothSystem, common_grid, distance_tables, smooth_system

BOUNDARY = "boundary"
INCLUSION = "inclusion"
DISTANCE = "distance"
ASSIGNMENT = "assignment"
GENERAL = "general"

Partition = Tuple[Tuple[int, int], ...]


class ShapeMismatch(ValueError):
    pass


class StructureError(ValueError):
    pass


def _offsets(part: Partition) -> Dict[int, Tuple[int, int]]:
    out, start = {}, 0
    for level, size in part:
        out[level] = (start, start + size)
        start += size
    return out


def _levels_of(part: Partition) -> np.ndarray:
    return np.repeat([l for l, _ in part], [s for _, s in part]).astype(np.int64)


class BlockMatrix:
    """Matrix with level-indexed row and column blocks.

    ``shift`` applies to column-one-hot classes: the single 1 of a column at
    level ``l`` must sit in the row block of level ``l + shift``.
    """

    def __init__(self, values: np.ndarray, row_partition: Partition, col_partition: Partition,
                 structure: str = GENERAL, shift: int = 0):
        values = np.asarray(values, dtype=np.float64)
        rows = sum(s for _, s in row_partition)
        cols = sum(s for _, s in col_partition)
        if values.shape != (rows, cols):
            raise ShapeMismatch(f"values {values.shape} do not fit partitions ({rows}, {cols})")
        self.values = values
        self.values.setflags(write=False)
        self.row_partition = tuple(row_partition)
        self.col_partition = tuple(col_partition)
        self.structure = structure
        self.shift = shift

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @cached_property
    def row_levels(self) -> np.ndarray:
        return _levels_of(self.row_partition)

    @cached_property
    def col_levels(self) -> np.ndarray:
        return _levels_of(self.col_partition)

    def block(self, row_level: int, col_level: int) -> np.ndarray:
        r0, r1 = _offsets(self.row_partition)[row_level]
        c0, c1 = _offsets(self.col_partition)[col_level]
        return self.values[r0:r1, c0:c1]

    def column_targets(self) -> np.ndarray:
        """Row index of the single 1 in each column (column-one-hot classes)."""
        return np.argmax(self.values, axis=0)

    def __sub__(self, other: "BlockMatrix") -> "BlockMatrix":
        if self.row_partition != other.row_partition or self.col_partition != other.col_partition:
            raise ShapeMismatch("cannot subtract matrices with different partitions")
        return BlockMatrix(self.values - other.values, self.row_partition, self.col_partition)

    def __matmul__(self, other: "BlockMatrix") -> "BlockMatrix":
        return block_multiply(self, other)

    def __repr__(self):
        return f"BlockMatrix({self.structure}, shape={self.shape})"

    def check(self) -> None:
        """Raise :class:`StructureError` if the structure-class invariant fails."""
        v = self.values
        if self.structure == DISTANCE:
            if self.row_partition != self.col_partition:
                raise StructureError("distance matrix partitions differ")
            same = self.row_levels[:, None] == self.col_levels[None, :]
            if np.any(v[~same] != 0):
                raise StructureError("distance matrix has off-block entries")
            if not np.array_equal(v, v.T):
                raise StructureError("distance matrix is not symmetric")
            if np.any(np.diag(v) != 0) or np.any(v < 0):
                raise StructureError("distance matrix has nonzero diagonal or negative entries")
            off = v[same & ~np.eye(len(v), dtype=bool)]
            if np.any(off == 0):
                raise StructureError("distinct elements at distance 0")
        elif self.structure in (BOUNDARY, INCLUSION, ASSIGNMENT):
            if not np.all((v == 0) | (v == 1)):
                raise StructureError(f"{self.structure} matrix has entries outside {{0, 1}}")
            if not np.all(v.sum(axis=0) == 1):
                raise StructureError(f"{self.structure} matrix is not column-one-hot")
            if v.shape[1]:
                target = self.row_levels[self.column_targets()]
                if not np.array_equal(target, self.col_levels + self.shift):
                    raise StructureError(f"{self.structure} matrix has a 1 outside its level block")

    def to_csv(self, path: Union[str, Path], row_labels: Optional[Sequence[str]] = None,
               col_labels: Optional[Sequence[str]] = None) -> None:
        """Dump with level-annotated headers, ``label@level``; unbounded as ``inf``."""
        rl = row_labels or [str(k) for k in range(self.shape[0])]
        cl = col_labels or [str(k) for k in range(self.shape[1])]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([""] + [f"{c}@{l}" for c, l in zip(cl, self.col_levels.tolist())])
            for r, l, row in zip(rl, self.row_levels.tolist(), self.values):
                w.writerow([f"{r}@{l}"] + [_fmt(x) for x in row])


def _fmt(x: float) -> str:
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    if np.isnan(x):
        return "nan"
    return str(int(x))


def extended_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with ``inf * 0 = 0``.

    Infinite contributions of each sign are tracked separately; an entry that
    receives both becomes ``nan`` (undefined), which loss maxima skip.
    """
    fa, fb = np.isfinite(a), np.isfinite(b)
    if fa.all() and fb.all():
        return a @ b
    out = np.where(fa, a, 0.0) @ np.where(fb, b, 0.0)
    ap, an = (a == np.inf).astype(float), (a == -np.inf).astype(float)
    bp, bn = (b == np.inf).astype(float), (b == -np.inf).astype(float)
    pos = ap @ (b > 0) + an @ (b < 0) + (a > 0) @ bp + (a < 0) @ bn
    neg = ap @ (b < 0) + an @ (b > 0) + (a > 0) @ bn + (a < 0) @ bp
    out = np.where(pos > 0, np.inf, out)
    out = np.where(neg > 0, -np.inf, out)
    out[(pos > 0) & (neg > 0)] = np.nan
    return out


def _nonzero_blocks(m: BlockMatrix):
    """``(row_level, col_level)`` of every block holding a nonzero entry."""
    r, c = np.nonzero(m.values)
    if not len(r):
        return []
    pairs = np.unique(np.stack([m.row_levels[r], m.col_levels[c]], axis=1), axis=0)
    return [(int(a), int(b)) for a, b in pairs]


def block_multiply(a: BlockMatrix, b: BlockMatrix) -> BlockMatrix:
    """Product computed over level blocks, skipping blocks that are all zero."""
    if a.col_partition != b.row_partition:
        raise ShapeMismatch(f"inner partitions differ: {a.shape} x {b.shape}")
    ra, inner, cb = _offsets(a.row_partition), _offsets(a.col_partition), _offsets(b.col_partition)
    out = np.zeros((a.shape[0], b.shape[1]))
    right: Dict[int, list] = {}
    for kl, cl in _nonzero_blocks(b):
        right.setdefault(kl, []).append(cl)
    for rl, kl in _nonzero_blocks(a):
        (r0, r1), (k0, k1) = ra[rl], inner[kl]
        for cl in right.get(kl, ()):
            c0, c1 = cb[cl]
            out[r0:r1, c0:c1] += extended_matmul(a.values[r0:r1, k0:k1], b.values[k0:k1, c0:c1])
    return BlockMatrix(out, a.row_partition, b.col_partition)


def one_hot(targets: np.ndarray, row_partition: Partition, col_partition: Partition,
            structure: str, shift: int = 0) -> BlockMatrix:
    rows = sum(s for _, s in row_partition)
    m = np.zeros((rows, len(targets)))
    m[np.asarray(targets, dtype=np.int64), np.arange(len(targets))] = 1.0
    return BlockMatrix(m, row_partition, col_partition, structure, shift)


def boundary_matrices(g: MapperGraph) -> Tuple[BlockMatrix, BlockMatrix]:
    """``(B_up, B_down)``, each ``|V| x |E|``: upper and lower endpoint of every edge."""
    vp, ep = g.vertex_partition(), g.edge_partition()
    up = one_hot(g.edge_upper, vp, ep, BOUNDARY, shift=1)
    down = one_hot(g.edge_lower, vp, ep, BOUNDARY, shift=0)
    return up, down


def inclusion_matrices(sys: SmoothSystem) -> Tuple[BlockMatrix, BlockMatrix, BlockMatrix, BlockMatrix]:
    """``(I^V, I^E)`` for ``F => F^n`` followed by ``(I^V, I^E)`` for ``F^n => F^{2n}``."""
    f, fn, f2n = sys.base, sys.smooth_n, sys.smooth_2n
    return (
        one_hot(sys.incl_v_base, fn.vertex_partition(), f.vertex_partition(), INCLUSION),
        one_hot(sys.incl_e_base, fn.edge_partition(), f.edge_partition(), INCLUSION),
        one_hot(sys.incl_v_n, f2n.vertex_partition(), fn.vertex_partition(), INCLUSION),
        one_hot(sys.incl_e_n, f2n.edge_partition(), fn.edge_partition(), INCLUSION),
    )


def distance_matrices(g: MapperGraph) -> Tuple[BlockMatrix, BlockMatrix]:
    """Block-diagonal ``(D^V, D^E)``; entries across levels are 0."""
    tables = distance_tables(g)
    out = []
    for blocks, part in ((tables.vertex, g.vertex_partition()), (tables.edge, g.edge_partition())):
        size = sum(s for _, s in part)
        d = np.zeros((size, size))
        for level, (a, b) in _offsets(part).items():
            if b - a > 0:
                d[a:b, a:b] = blocks[level]
        out.append(BlockMatrix(d, part, part, DISTANCE))
    return out[0], out[1]


@dataclass(frozen=True)
class SideMatrices:
    """Constant matrices for one graph of the pair and its smoothings."""

    sys: SmoothSystem
    b_up: BlockMatrix
    b_down: BlockMatrix
    b_up_n: BlockMatrix
    b_down_n: BlockMatrix
    i_v: BlockMatrix      # F => F^n
    i_e: BlockMatrix
    i_v_n: BlockMatrix    # F^n => F^{2n}
    i_e_n: BlockMatrix
    d_v_n: BlockMatrix
    d_e_n: BlockMatrix
    d_v_2n: BlockMatrix
    d_e_2n: BlockMatrix

    def matrices(self) -> Dict[str, BlockMatrix]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "sys"}


_SIDE_CACHE: "OrderedDict[tuple, SideMatrices]" = OrderedDict()
_SIDE_CACHE_SIZE = 256


def side_matrices(g: MapperGraph, n: int) -> SideMatrices:
    """Constant matrices of ``g`` at shift ``n``, memoized by graph content.

    A graph appears in many pairs and at many shifts during a pairwise run,
    so its smoothings are built once per process.
    """
    key = (g.grid, g.vertex_ids, g.edge_ids, g.vertex_level.tobytes(), g.edge_lower.tobytes(),
           g.edge_upper.tobytes(), int(n))
    hit = _SIDE_CACHE.get(key)
    if hit is not None:
        _SIDE_CACHE.move_to_end(key)
        return hit
    out = _side_matrices(g, n)
    _SIDE_CACHE[key] = out
    if len(_SIDE_CACHE) > _SIDE_CACHE_SIZE:
        _SIDE_CACHE.popitem(last=False)
    return out


def _side_matrices(g: MapperGraph, n: int) -> SideMatrices:
    sys = smooth_system(g, n)
    b_up, b_down = boundary_matrices(g)
    b_up_n, b_down_n = boundary_matrices(sys.smooth_n)
    incl = inclusion_matrices(sys)
    dn = distance_matrices(sys.smooth_n)
    d2n = distance_matrices(sys.smooth_2n)
    return SideMatrices(sys, b_up, b_down, b_up_n, b_down_n, *incl, *dn, *d2n)


@dataclass(frozen=True)
class MatrixBundle:
    """Every constant matrix needed to score an ``n``-assignment from ``f`` to ``g``."""

    f: SideMatrices
    g: SideMatrices
    n: int

    def swapped(self) -> "MatrixBundle":
        return MatrixBundle(self.g, self.f, self.n)


def build_bundle(f: MapperGraph, g: MapperGraph, n: int) -> MatrixBundle:
    f, g = common_grid(f, g)
    return MatrixBundle(side_matrices(f, n), side_matrices(g, n), n)
